//! Characteristic quasi-polynomial of the linearization about the
//! plankton-only equilibrium, the delay-independent stability test, and a
//! numerical root locator used to corroborate it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{plankton_only_point, LinearizedSystem, ModelParams};
use crate::numlin::Mat3;

/// `Q(lambda) = det(lambda I - A - exp(-lambda tau1) B1 - exp(-lambda tau2) B2)`
/// by direct 3x3 complex determinant.
pub fn eval_q(lambda: Complex64, lin: &LinearizedSystem, p: &ModelParams) -> Complex64 {
    let e1 = (-lambda * p.tau1()).exp();
    let e2 = (-lambda * p.tau2()).exp();
    let m: [[Complex64; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let diag = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
            diag - lin.a[i][j] - e1 * lin.b1[i][j] - e2 * lin.b2[i][j]
        })
    });
    det3(&m)
}

fn det3(m: &[[Complex64; 3]; 3]) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// The two factors `Q = Q1 * Q2`:
///
/// ```text
/// Q1 = (lambda + r x0/K)(lambda + d1 - d1 e^{-lambda tau1}) + c1 d1 y0 e^{-lambda tau1}
/// Q2 = lambda + d2 - e2 c2 y0 e^{-lambda tau2}
/// ```
pub fn eval_factors(lambda: Complex64, lin: &LinearizedSystem, p: &ModelParams) -> (Complex64, Complex64) {
    let a = p.r() * lin.x0 / p.k();
    let d1 = p.d1();
    let e1 = (-lambda * p.tau1()).exp();
    let e2 = (-lambda * p.tau2()).exp();
    let q1 = (lambda + a) * (lambda + d1 - d1 * e1) + p.c1() * d1 * lin.y0 * e1;
    let q2 = lambda + p.d2() - p.e2() * p.c2() * lin.y0 * e2;
    (q1, q2)
}

/// `Q` and `dQ/dlambda` via the product rule over the factorization.
pub fn eval_q_with_derivative(
    lambda: Complex64,
    lin: &LinearizedSystem,
    p: &ModelParams,
) -> (Complex64, Complex64) {
    let a = p.r() * lin.x0 / p.k();
    let (d1, tau1, tau2) = (p.d1(), p.tau1(), p.tau2());
    let e1 = (-lambda * tau1).exp();
    let e2 = (-lambda * tau2).exp();
    let c = p.c1() * d1 * lin.y0;
    let b = p.e2() * p.c2() * lin.y0;
    let inner = lambda + d1 - d1 * e1;
    let q1 = (lambda + a) * inner + c * e1;
    let dq1 = inner + (lambda + a) * (1.0 + d1 * tau1 * e1) - c * tau1 * e1;
    let q2 = lambda + p.d2() - b * e2;
    let dq2 = 1.0 + b * tau2 * e2;
    (q1 * q2, dq1 * q2 + q1 * dq2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    AsymptoticallyStable,
    Unstable,
    DelayDependent,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::AsymptoticallyStable => "asymptotically-stable",
            VerdictKind::Unstable => "unstable",
            VerdictKind::DelayDependent => "delay-dependent",
        }
    }
}

/// Outcome of the delay-independent test for `(x0, y0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub kind: VerdictKind,
    pub d1: f64,
    /// `e1 c1 K max{1/3, 1 - c1 d2/(e2 c2 r)}`
    pub stable_lower: f64,
    /// `e1 c1 K`
    pub stable_upper: f64,
    /// `e1 c1 K (1 - c1 d2/(e2 c2 r))`, `-inf` when `e2 c2 = 0`.
    pub unstable_upper: f64,
    pub witness: String,
}

/// Stable when `stable_lower < d1 < e1 c1 K`, unstable when
/// `d1 < unstable_upper`; every comparison strict. Anything in between is
/// reported as delay dependent and not analysed further.
pub fn lemma_classify(p: &ModelParams) -> Result<StabilityVerdict> {
    plankton_only_point(p)?;
    let upper = p.zooplankton_threshold();
    let thr3 = p.coexistence_threshold();
    let lower = upper * (1.0 / 3.0f64).max(thr3 / upper);
    let d1 = p.d1();
    let (kind, witness) = if lower < d1 && d1 < upper {
        (
            VerdictKind::AsymptoticallyStable,
            format!("{lower:e} < d1 = {d1:e} < e1*c1*K = {upper:e}"),
        )
    } else if d1 < thr3 {
        (
            VerdictKind::Unstable,
            format!("d1 = {d1:e} < e1*c1*K*(1 - c1*d2/(e2*c2*r)) = {thr3:e}"),
        )
    } else {
        (
            VerdictKind::DelayDependent,
            format!(
                "d1 = {d1:e} lies in the delay-dependent gap [{:e}, {lower:e}]",
                thr3.max(0.0)
            ),
        )
    };
    Ok(StabilityVerdict {
        kind,
        d1,
        stable_lower: lower,
        stable_upper: upper,
        unstable_upper: thr3,
        witness,
    })
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    fn height(&self) -> f64 {
        self.im_max - self.im_min
    }
}

/// Default search rectangle. The left edge is `-10 max(r, d1, d2)`. The
/// right and vertical extents are at least `1` and `50` and are widened to
/// cover `|lambda| <= ||A|| + ||B1|| + ||B2||` (infinity norms), which
/// bounds every root with non-negative real part.
pub fn default_region(lin: &LinearizedSystem, p: &ModelParams) -> Rect {
    let bound = rhp_root_bound(lin);
    let reach = 1.1 * bound + 0.1;
    let left = -10.0 * p.r().max(p.d1()).max(p.d2());
    Rect::new(left, reach.max(1.0), -reach.max(50.0), reach.max(50.0))
}

/// Any root with `Re lambda >= 0` is an eigenvalue of
/// `A + e^{-lambda tau1} B1 + e^{-lambda tau2} B2` with `|e^{..}| <= 1`.
pub fn rhp_root_bound(lin: &LinearizedSystem) -> f64 {
    fn inf_norm(m: &Mat3) -> f64 {
        m.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
    inf_norm(&lin.a) + inf_norm(&lin.b1) + inf_norm(&lin.b2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 16, ny: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoundRoot {
    pub value: Complex64,
    /// `|Q(value)|`
    pub residual: f64,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCount {
    pub cell: Rect,
    pub winding: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootReport {
    pub roots: Vec<FoundRoot>,
    /// `-inf` when no root was found.
    pub rightmost_real_part: f64,
    pub search_region: Rect,
    /// Winding numbers of the top-level grid cells.
    pub counts: Vec<CellCount>,
    /// Sum of the top-level winding numbers.
    pub total_count: i64,
    /// Cells whose roots could not be polished below the residual limit.
    pub unresolved: Vec<CellCount>,
}

impl RootReport {
    pub fn has_root_with_positive_real_part(&self) -> bool {
        self.roots.iter().any(|r| r.value.re > 0.0)
    }
}

/// Contour closer than this to a root triggers a jittered re-split.
const NEAR_ROOT: f64 = 1e-12;
const MAX_DEPTH: usize = 12;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
/// Residual a polished root must reach to be reported.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug)]
struct NearRoot;

struct Scanner<'a> {
    lin: &'a LinearizedSystem,
    p: &'a ModelParams,
}

impl Scanner<'_> {
    fn q(&self, z: Complex64) -> std::result::Result<Complex64, NearRoot> {
        let v = eval_q(z, self.lin, self.p);
        if v.norm() < NEAR_ROOT || !v.is_finite() {
            return Err(NearRoot);
        }
        Ok(v)
    }

    /// Change of `arg Q` along the segment `a -> b`, refined until every
    /// sub-step turns by less than `pi/4` and agrees with its halves.
    fn arg_change(&self, a: Complex64, b: Complex64) -> std::result::Result<f64, NearRoot> {
        let qa = self.q(a)?;
        let qb = self.q(b)?;
        let n = 4;
        let mut total = 0.0;
        let mut prev = (a, qa);
        for k in 1..=n {
            let z = if k == n { b } else { a + (b - a) * (k as f64 / n as f64) };
            let qz = if k == n { qb } else { self.q(z)? };
            total += self.arg_change_rec(prev.0, prev.1, z, qz, 0)?;
            prev = (z, qz);
        }
        Ok(total)
    }

    fn arg_change_rec(
        &self,
        a: Complex64,
        qa: Complex64,
        b: Complex64,
        qb: Complex64,
        depth: usize,
    ) -> std::result::Result<f64, NearRoot> {
        let m = (a + b) * 0.5;
        let qm = self.q(m)?;
        let d1 = (qm / qa).arg();
        let d2 = (qb / qm).arg();
        let whole = (qb / qa).arg();
        let quarter = std::f64::consts::FRAC_PI_4;
        if d1.abs() < quarter && d2.abs() < quarter && (d1 + d2 - whole).abs() < 1e-9 {
            return Ok(d1 + d2);
        }
        if depth >= 40 {
            return Err(NearRoot);
        }
        Ok(self.arg_change_rec(a, qa, m, qm, depth + 1)? + self.arg_change_rec(m, qm, b, qb, depth + 1)?)
    }

    fn winding(&self, r: &Rect) -> std::result::Result<i64, NearRoot> {
        let c = [
            Complex64::new(r.re_min, r.im_min),
            Complex64::new(r.re_max, r.im_min),
            Complex64::new(r.re_max, r.im_max),
            Complex64::new(r.re_min, r.im_max),
        ];
        let mut total = 0.0;
        for k in 0..4 {
            total += self.arg_change(c[k], c[(k + 1) % 4])?;
        }
        Ok((total / std::f64::consts::TAU).round() as i64)
    }

    fn newton(&self, start: Complex64) -> Option<(Complex64, f64)> {
        let mut z = start;
        for _ in 0..NEWTON_MAX_ITER {
            let (q, dq) = eval_q_with_derivative(z, self.lin, self.p);
            if q == Complex64::new(0.0, 0.0) {
                break;
            }
            let step = q / dq;
            if !step.is_finite() {
                return None;
            }
            z -= step;
            if step.norm() <= NEWTON_TOL * z.norm().max(1.0) {
                break;
            }
        }
        let res = eval_q(z, self.lin, self.p).norm();
        z.is_finite().then_some((z, res))
    }

    /// Split `r` into four children at a jittered interior point, retrying
    /// with a different split when a child contour touches a root.
    fn split(&self, r: &Rect, depth: usize) -> Result<Vec<(Rect, i64)>> {
        for attempt in 0..8 {
            let jx = 0.5 + jitter(depth * 8 + attempt, 0.05);
            let jy = 0.5 + jitter(depth * 8 + attempt + 1000, 0.05);
            let xm = r.re_min + jx * r.width();
            let ym = r.im_min + jy * r.height();
            let kids = [
                Rect::new(r.re_min, xm, r.im_min, ym),
                Rect::new(xm, r.re_max, r.im_min, ym),
                Rect::new(r.re_min, xm, ym, r.im_max),
                Rect::new(xm, r.re_max, ym, r.im_max),
            ];
            let counted: std::result::Result<Vec<_>, NearRoot> =
                kids.iter().map(|k| self.winding(k).map(|w| (*k, w))).collect();
            if let Ok(v) = counted {
                return Ok(v);
            }
        }
        Err(Error::Numerical(format!(
            "root scan: every split of {r:?} passes within {NEAR_ROOT:e} of a root"
        )))
    }

    fn resolve(
        &self,
        r: &Rect,
        count: i64,
        depth: usize,
        roots: &mut Vec<FoundRoot>,
        unresolved: &mut Vec<CellCount>,
    ) -> Result<()> {
        if count <= 0 {
            return Ok(());
        }
        let slack = 1e-9 * (1.0 + r.width().max(r.height()));
        if count == 1 || depth == MAX_DEPTH {
            if let Some((z, res)) = self.newton(r.center()) {
                if r.contains(z, slack) && res <= ROOT_RESIDUAL_TOL {
                    push_root(roots, z, res, count as u32);
                    return Ok(());
                }
            }
            if depth == MAX_DEPTH {
                unresolved.push(CellCount {
                    cell: *r,
                    winding: count,
                });
                return Ok(());
            }
        }
        for (kid, w) in self.split(r, depth)? {
            self.resolve(&kid, w, depth + 1, roots, unresolved)?;
        }
        Ok(())
    }
}

fn push_root(roots: &mut Vec<FoundRoot>, z: Complex64, residual: f64, multiplicity: u32) {
    let dup = roots
        .iter()
        .any(|r| (r.value - z).norm() <= 1e-8 * (1.0 + z.norm()));
    if !dup {
        roots.push(FoundRoot {
            value: z,
            residual,
            multiplicity,
        });
    }
}

/// Deterministic pseudo-random offset in `[-amp, amp]`.
fn jitter(k: usize, amp: f64) -> f64 {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let f = ((k as f64 + 1.0) * GOLDEN + 0.137).fract();
    amp * (2.0 * f - 1.0)
}

/// Locate the roots of `Q` in `region` by counting winding numbers on a
/// `grid` of sub-rectangles and polishing with Newton's method.
pub fn root_scan(
    lin: &LinearizedSystem,
    p: &ModelParams,
    region: Rect,
    grid: GridSpec,
) -> Result<RootReport> {
    let corners = [region.re_min, region.re_max, region.im_min, region.im_max];
    if corners.iter().any(|v| !v.is_finite()) || region.width() <= 0.0 || region.height() <= 0.0 {
        return Err(Error::Domain(format!("invalid search region {region:?}")));
    }
    if grid.nx < 8 || grid.ny < 8 {
        return Err(Error::Domain(format!(
            "grid {}x{} is coarser than the 8x8 minimum",
            grid.nx, grid.ny
        )));
    }
    let scanner = Scanner { lin, p };

    let mut cells = None;
    for attempt in 0..MAX_DEPTH {
        let xs = grid_lines(region.re_min, region.re_max, grid.nx, attempt);
        let ys = grid_lines(region.im_min, region.im_max, grid.ny, attempt + 500);
        let mut out = Vec::with_capacity(grid.nx * grid.ny);
        let mut ok = true;
        'scan: for j in 0..grid.ny {
            for i in 0..grid.nx {
                let cell = Rect::new(xs[i], xs[i + 1], ys[j], ys[j + 1]);
                match scanner.winding(&cell) {
                    Ok(w) => out.push(CellCount { cell, winding: w }),
                    Err(NearRoot) => {
                        ok = false;
                        break 'scan;
                    }
                }
            }
        }
        if ok {
            cells = Some(out);
            break;
        }
    }
    let counts = cells.ok_or_else(|| {
        Error::Numerical(format!(
            "root scan: grid contours keep passing within {NEAR_ROOT:e} of a root"
        ))
    })?;

    let mut roots = Vec::new();
    let mut unresolved = Vec::new();
    for c in &counts {
        scanner.resolve(&c.cell, c.winding, 0, &mut roots, &mut unresolved)?;
    }
    roots.sort_by(|a, b| b.value.re.total_cmp(&a.value.re));
    let rightmost_real_part = roots.first().map_or(f64::NEG_INFINITY, |r| r.value.re);
    Ok(RootReport {
        rightmost_real_part,
        search_region: region,
        total_count: counts.iter().map(|c| c.winding).sum(),
        counts,
        roots,
        unresolved,
    })
}

/// Grid lines with the outer edges fixed and interior lines shifted by a
/// small deterministic jitter, so no interior line sits on the real axis.
fn grid_lines(lo: f64, hi: f64, n: usize, seed: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n {
                hi
            } else {
                lo + h * (i as f64 + jitter(seed * 31 + i, 0.02) + 0.0123)
            }
        })
        .collect()
}
