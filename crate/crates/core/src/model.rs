//! Parameters, right-hand side, equilibria and linearization of the
//! two-delay phytoplankton / zooplankton / fish system
//!
//! ```text
//! x'(t) = r x (1 - x/K) - c1 x y
//! y'(t) = -d1 y + e1 c1 x(t-tau1) y(t-tau1) - c2 y z
//! z'(t) = -d2 z + e2 c2 y(t-tau2) z(t-tau2)
//! ```
//!
//! with conversion efficiencies `e1 = b1 exp(-c1 tau1)` and
//! `e2 = b2 exp(-c2 tau2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{Mat3, Vec3};

/// Physical inputs as a user writes them down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub r: f64,
    #[serde(rename = "K", alias = "k")]
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub b1: f64,
    pub b2: f64,
    pub tau1: f64,
    pub tau2: f64,
}

/// Validated parameters together with the derived efficiencies and
/// delay extremes. Fields are read-only so the derived values can never
/// drift from the raw ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    raw: RawParams,
    e1: f64,
    e2: f64,
    tau_max: f64,
    tau_min: f64,
}

impl ModelParams {
    pub fn new(raw: RawParams) -> Result<Self> {
        derive_params(raw)
    }

    pub fn raw(&self) -> &RawParams {
        &self.raw
    }
    pub fn r(&self) -> f64 {
        self.raw.r
    }
    pub fn k(&self) -> f64 {
        self.raw.k
    }
    pub fn c1(&self) -> f64 {
        self.raw.c1
    }
    pub fn c2(&self) -> f64 {
        self.raw.c2
    }
    pub fn d1(&self) -> f64 {
        self.raw.d1
    }
    pub fn d2(&self) -> f64 {
        self.raw.d2
    }
    pub fn b1(&self) -> f64 {
        self.raw.b1
    }
    pub fn b2(&self) -> f64 {
        self.raw.b2
    }
    pub fn tau1(&self) -> f64 {
        self.raw.tau1
    }
    pub fn tau2(&self) -> f64 {
        self.raw.tau2
    }
    pub fn e1(&self) -> f64 {
        self.e1
    }
    pub fn e2(&self) -> f64 {
        self.e2
    }
    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }
    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    /// `e1 c1 K`: upper end of the plankton-only existence interval for `d1`.
    pub fn zooplankton_threshold(&self) -> f64 {
        self.e1 * self.raw.c1 * self.raw.k
    }

    /// `e1 c1 K (1 - c1 d2 / (e2 c2 r))`, or `-inf` when `e2 c2 = 0`.
    pub fn coexistence_threshold(&self) -> f64 {
        let e2c2 = self.e2 * self.raw.c2;
        if e2c2 == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.zooplankton_threshold() * (1.0 - self.raw.c1 * self.raw.d2 / (e2c2 * self.raw.r))
    }
}

/// Validate raw inputs and compute the derived quantities.
pub fn derive_params(raw: RawParams) -> Result<ModelParams> {
    let positive = [("r", raw.r), ("K", raw.k), ("d1", raw.d1), ("d2", raw.d2)];
    let non_negative = [
        ("c1", raw.c1),
        ("c2", raw.c2),
        ("b1", raw.b1),
        ("b2", raw.b2),
        ("tau1", raw.tau1),
        ("tau2", raw.tau2),
    ];
    for (field, v) in positive.iter().chain(non_negative.iter()) {
        if !v.is_finite() {
            return Err(Error::InvalidParam {
                field,
                reason: format!("must be finite, got {v}"),
            });
        }
    }
    for (field, v) in positive {
        if v <= 0.0 {
            return Err(Error::InvalidParam {
                field,
                reason: format!("must be > 0, got {v}"),
            });
        }
    }
    for (field, v) in non_negative {
        if v < 0.0 {
            return Err(Error::InvalidParam {
                field,
                reason: format!("must be >= 0, got {v}"),
            });
        }
    }
    Ok(ModelParams {
        raw,
        e1: raw.b1 * (-raw.c1 * raw.tau1).exp(),
        e2: raw.b2 * (-raw.c2 * raw.tau2).exp(),
        tau_max: raw.tau1.max(raw.tau2),
        tau_min: raw.tau1.min(raw.tau2),
    })
}

/// Time derivative of the state. `delayed1` is the state at `t - tau1`,
/// `delayed2` the state at `t - tau2`.
pub fn rhs(current: &Vec3, delayed1: &Vec3, delayed2: &Vec3, p: &ModelParams) -> Vec3 {
    let [x, y, z] = *current;
    let (r, k, c1, c2) = (p.r(), p.k(), p.c1(), p.c2());
    [
        r * x * (1.0 - x / k) - c1 * x * y,
        -p.d1() * y + p.e1() * c1 * delayed1[0] * delayed1[1] - c2 * y * z,
        -p.d2() * z + p.e2() * c2 * delayed2[1] * delayed2[2],
    ]
}

/// Which of the three equilibrium configurations holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumCase {
    /// `d1 >= e1 c1 K`: extinction and phytoplankton-only.
    Case1,
    /// Adds the plankton-only point `(x0, y0, 0)`.
    Case2,
    /// Adds the coexistence point `(x*, y*, z*)`.
    Case3,
}

impl EquilibriumCase {
    pub fn number(self) -> u8 {
        match self {
            EquilibriumCase::Case1 => 1,
            EquilibriumCase::Case2 => 2,
            EquilibriumCase::Case3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    Extinction,
    PhytoOnly,
    PlanktonOnly,
    Coexistence,
}

impl EquilibriumLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumLabel::Extinction => "extinction",
            EquilibriumLabel::PhytoOnly => "phyto-only",
            EquilibriumLabel::PlanktonOnly => "plankton-only",
            EquilibriumLabel::Coexistence => "coexistence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub label: EquilibriumLabel,
    pub state: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSet {
    pub case_id: EquilibriumCase,
    pub points: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn get(&self, label: EquilibriumLabel) -> Option<&Equilibrium> {
        self.points.iter().find(|e| e.label == label)
    }
}

/// Classify the non-negative equilibria.
///
/// The split follows the displayed inequalities: `d1 >= e1 c1 K` is case 1,
/// `thr3 <= d1 < e1 c1 K` is case 2 and `d1 < thr3` is case 3, where `thr3`
/// is [`ModelParams::coexistence_threshold`].
pub fn classify_equilibria(p: &ModelParams) -> EquilibriumSet {
    let thr2 = p.zooplankton_threshold();
    let thr3 = p.coexistence_threshold();
    let mut points = vec![
        Equilibrium {
            label: EquilibriumLabel::Extinction,
            state: [0.0, 0.0, 0.0],
        },
        Equilibrium {
            label: EquilibriumLabel::PhytoOnly,
            state: [p.k(), 0.0, 0.0],
        },
    ];
    let d1 = p.d1();
    if d1 >= thr2 {
        return EquilibriumSet {
            case_id: EquilibriumCase::Case1,
            points,
        };
    }
    // d1 < thr2 implies e1 c1 > 0, so the plankton-only point exists.
    let (x0, y0) = plankton_only_point(p).expect("d1 < e1 c1 K");
    points.push(Equilibrium {
        label: EquilibriumLabel::PlanktonOnly,
        state: [x0, y0, 0.0],
    });
    if d1 >= thr3 {
        return EquilibriumSet {
            case_id: EquilibriumCase::Case2,
            points,
        };
    }
    let e2c2 = p.e2() * p.c2();
    let ratio = 1.0 - p.c1() * p.d2() / (e2c2 * p.r());
    let xs = p.k() * ratio;
    let ys = p.d2() / e2c2;
    let zs = (p.e1() * p.c1() * p.k() * ratio - d1) / p.c2();
    points.push(Equilibrium {
        label: EquilibriumLabel::Coexistence,
        state: [xs, ys, zs],
    });
    EquilibriumSet {
        case_id: EquilibriumCase::Case3,
        points,
    }
}

/// `(x0, y0)` of the phytoplankton + zooplankton equilibrium.
pub fn plankton_only_point(p: &ModelParams) -> Result<(f64, f64)> {
    let e1c1 = p.e1() * p.c1();
    if e1c1 <= 0.0 {
        return Err(Error::Domain(format!(
            "plankton-only point needs e1*c1 > 0, got e1*c1 = {e1c1}"
        )));
    }
    let thr = e1c1 * p.k();
    if p.d1() > thr {
        return Err(Error::Domain(format!(
            "plankton-only point needs d1 <= e1*c1*K, got d1 = {} > {thr}",
            p.d1()
        )));
    }
    let x0 = p.d1() / e1c1;
    let y0 = (p.r() / p.c1()) * (1.0 - p.d1() / thr);
    Ok((x0, y0.max(0.0)))
}

/// Linear part of the system about `(x0, y0, 0)`:
/// `u' = A u + B1 u(t-tau1) + B2 u(t-tau2) + nonlinear terms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSystem {
    pub x0: f64,
    pub y0: f64,
    pub a: Mat3,
    pub b1: Mat3,
    pub b2: Mat3,
}

impl LinearizedSystem {
    pub fn equilibrium(&self) -> Vec3 {
        [self.x0, self.y0, 0.0]
    }
}

pub fn linearize(p: &ModelParams) -> Result<LinearizedSystem> {
    let (x0, y0) = plankton_only_point(p)?;
    let rxk = p.r() * x0 / p.k();
    let a = [
        [-rxk, -p.d1() / p.e1(), 0.0],
        [0.0, -p.d1(), -p.c2() * y0],
        [0.0, 0.0, -p.d2()],
    ];
    let b1 = [
        [0.0, 0.0, 0.0],
        [p.e1() * p.c1() * y0, p.d1(), 0.0],
        [0.0, 0.0, 0.0],
    ];
    let b2 = [
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
        [0.0, 0.0, p.e2() * p.c2() * y0],
    ];
    Ok(LinearizedSystem { x0, y0, a, b1, b2 })
}

/// Quadratic remainders `(F, G1, G2)` of the shifted system; arguments are
/// deviations from `(x0, y0, 0)`.
pub fn eval_nonlinear(
    current: &Vec3,
    delayed1: &Vec3,
    delayed2: &Vec3,
    p: &ModelParams,
) -> (Vec3, Vec3, Vec3) {
    let [x, y, z] = *current;
    let f = [
        -(p.r() / p.k()) * x * x - p.c1() * x * y,
        -p.c2() * y * z,
        0.0,
    ];
    let g1 = [0.0, p.e1() * p.c1() * delayed1[0] * delayed1[1], 0.0];
    let g2 = [0.0, 0.0, p.e2() * p.c2() * delayed2[1] * delayed2[2]];
    (f, g1, g2)
}
