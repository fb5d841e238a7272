//! TOML scenario files. Every field except `[params]` has a default; the
//! schema is documented in `docs/config.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certificate::CertificateOptions;
use crate::error::{Error, Result};
use crate::history::{History, HistoryShape, Table};
use crate::model::{classify_equilibria, EquilibriumLabel, ModelParams, RawParams};
use crate::numlin::Vec3;
use crate::spectrum::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: RawParams,
    #[serde(default)]
    pub history: HistoryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub overrides: CertificateOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryKind {
    Constant,
    EquilibriumPlusConstant,
    EquilibriumPlusSine,
    Table,
}

/// Base point of the equilibrium presets: a named equilibrium or a vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasePoint {
    Named(String),
    Point(Vec3),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistoryConfig {
    pub kind: HistoryKind,
    /// `constant` only.
    pub value: Option<Vec3>,
    pub base: BasePoint,
    pub offset: Vec3,
    pub amplitude: Vec3,
    pub frequency: f64,
    pub phase: f64,
    /// Multiplier on the deviation from `base` (equilibrium presets only).
    pub scale: f64,
    /// `table` only; relative paths resolve against the config file.
    pub path: Option<PathBuf>,
    /// Halve the deviation from the plankton-only point until all
    /// admissibility conditions hold.
    pub autoscale: bool,
    pub max_halvings: u32,
}

impl Default for HistoryConfig {
    fn default() -> Self {
        HistoryConfig {
            kind: HistoryKind::EquilibriumPlusConstant,
            value: None,
            base: BasePoint::Named("plankton-only".into()),
            offset: [0.0; 3],
            amplitude: [0.0; 3],
            frequency: 1.0,
            phase: 0.0,
            scale: 1.0,
            path: None,
            autoscale: false,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub t_end: f64,
    /// Defaults to `min(tau1, tau2, 0.01) / 20`.
    pub step: Option<f64>,
    /// Node stride of `trajectory.csv`.
    pub stride: usize,
    /// Node stride of the verification samples.
    pub verify_stride: usize,
    /// Re-run at half step to size the solver allowance.
    pub error_estimate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t_end: 50.0,
            step: None,
            stride: 100,
            verify_stride: 100,
            error_estimate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub scan: bool,
    pub nx: usize,
    pub ny: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        SpectrumConfig {
            scan: true,
            nx: g.nx,
            ny: g.ny,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths resolve against the config file.
    pub dir: PathBuf,
    pub equilibria: bool,
    pub certificate: bool,
    pub trajectory: bool,
    pub verification: bool,
    pub report: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            equilibria: true,
            certificate: true,
            trajectory: true,
            verification: true,
            report: true,
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_value(v: toml::Value) -> Result<Self> {
        v.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.params)
    }

    /// Build the initial history; `base_dir` anchors a relative table path.
    pub fn build_history(&self, p: &ModelParams, base_dir: &Path) -> Result<History> {
        let h = &self.history;
        if h.scale != 1.0 && matches!(h.kind, HistoryKind::Constant | HistoryKind::Table) {
            return Err(Error::Config("history.scale applies only to the equilibrium presets".into()));
        }
        if !(h.scale.is_finite() && h.scale >= 0.0) {
            return Err(Error::Config(format!("history.scale must be finite and >= 0, got {}", h.scale)));
        }
        let shape = match h.kind {
            HistoryKind::Constant => HistoryShape::Constant(
                h.value
                    .ok_or_else(|| Error::Config("history.value is required for kind = \"constant\"".into()))?,
            ),
            HistoryKind::EquilibriumPlusConstant => HistoryShape::EquilibriumPlusConstant {
                base: resolve_base(&h.base, p)?,
                offset: h.offset,
            },
            HistoryKind::EquilibriumPlusSine => HistoryShape::EquilibriumPlusSine {
                base: resolve_base(&h.base, p)?,
                amplitude: h.amplitude,
                frequency: h.frequency,
                phase: h.phase,
            },
            HistoryKind::Table => {
                let rel = h
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("history.path is required for kind = \"table\"".into()))?;
                HistoryShape::Table(Table::from_csv(&base_dir.join(rel))?)
            }
        };
        let hist = History::new(shape, p)?;
        if h.scale == 1.0 {
            return Ok(hist);
        }
        hist.scaled_about(resolve_base(&h.base, p)?, h.scale)
    }
}

fn resolve_base(base: &BasePoint, p: &ModelParams) -> Result<Vec3> {
    match base {
        BasePoint::Point(v) => Ok(*v),
        BasePoint::Named(name) => {
            let label = match name.as_str() {
                "extinction" => EquilibriumLabel::Extinction,
                "phyto-only" | "phyto_only" => EquilibriumLabel::PhytoOnly,
                "plankton-only" | "plankton_only" => EquilibriumLabel::PlanktonOnly,
                "coexistence" => EquilibriumLabel::Coexistence,
                other => {
                    return Err(Error::Config(format!(
                        "history.base: unknown equilibrium `{other}` (expected extinction, phyto-only, plankton-only, coexistence or [x, y, z])"
                    )))
                }
            };
            classify_equilibria(p)
                .get(label)
                .map(|e| e.state)
                .ok_or_else(|| Error::Config(format!("history.base: equilibrium `{name}` does not exist for these parameters")))
        }
    }
}

/// Read and parse a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Scenario::from_toml_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Set a dotted key such as `params.d1` in a TOML tree, creating
/// intermediate tables as needed.
pub fn set_dotted(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("key `{key}`: `{part}` is not inside a table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("key `{key}` does not address a table field")))?;
    let last = parts[parts.len() - 1];
    if let Some(existing) = table.get(last) {
        if existing.is_table() || existing.is_array() {
            return Err(Error::Config(format!("key `{key}` addresses a non-scalar field")));
        }
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Parse one sweep value as a TOML scalar, falling back to a string.
pub fn parse_scalar(text: &str) -> toml::Value {
    let text = text.trim();
    match format!("v = {text}").parse::<toml::Table>() {
        Ok(mut t) => match t.remove("v") {
            Some(v) if !v.is_table() && !v.is_array() => v,
            _ => toml::Value::String(text.to_string()),
        },
        Err(_) => toml::Value::String(text.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[params]
r = 1.0
K = 1.0
c1 = 1.0
c2 = 1.0
d1 = 1.5
d2 = 1.0
b1 = 3.0
b2 = 1.0
tau1 = 0.1
tau2 = 0.1
"#;

    #[test]
    fn defaults_fill_everything_but_params() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.solver, SolverConfig::default());
        assert_eq!(s.overrides, CertificateOptions::default());
        assert_eq!(s.history.kind, HistoryKind::EquilibriumPlusConstant);
        let p = s.model().unwrap();
        let h = s.build_history(&p, Path::new(".")).unwrap();
        let v = h.eval(0.0).unwrap();
        assert!(v[2] == 0.0 && v[1] > 0.0);
    }

    #[test]
    fn missing_params_is_an_error() {
        let err = Scenario::from_toml_str("[solver]\nt_end = 3.0\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("params")), "{err}");
    }

    #[test]
    fn unknown_field_reports_location() {
        let text = format!("{MINIMAL}\n[solver]\nt_edn = 3.0\n");
        let err = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("t_edn") && err.contains("line"), "{err}");
    }

    #[test]
    fn named_and_explicit_bases() {
        let text = format!(
            "{MINIMAL}\n[history]\nkind = \"equilibrium_plus_sine\"\nbase = [0.5, 0.5, 0.1]\namplitude = [0.1, 0.0, 0.0]\n"
        );
        let s = Scenario::from_toml_str(&text).unwrap();
        let p = s.model().unwrap();
        assert!(s.build_history(&p, Path::new(".")).is_ok());
        let text = format!("{MINIMAL}\n[history]\nbase = \"coexistence\"\n");
        let s = Scenario::from_toml_str(&text).unwrap();
        assert!(matches!(s.build_history(&p, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn dotted_keys() {
        let mut v: toml::Value = toml::from_str(MINIMAL).unwrap();
        set_dotted(&mut v, "params.d1", parse_scalar("1.2")).unwrap();
        set_dotted(&mut v, "overrides.alpha", parse_scalar("2")).unwrap();
        set_dotted(&mut v, "history.kind", parse_scalar("constant")).unwrap();
        assert!(set_dotted(&mut v, "params", parse_scalar("1")).is_err());
        assert!(set_dotted(&mut v, "params..d1", parse_scalar("1")).is_err());
        let s = Scenario::from_value(v).unwrap();
        assert_eq!(s.params.d1, 1.2);
        assert_eq!(s.overrides.alpha, 2.0);
        assert_eq!(s.history.kind, HistoryKind::Constant);
    }

    #[test]
    fn scale_shrinks_the_offset() {
        let text = format!("{MINIMAL}\n[history]\noffset = [0.02, 0.0, 0.01]\nscale = 0.5\n");
        let s = Scenario::from_toml_str(&text).unwrap();
        let p = s.model().unwrap();
        let v = s.build_history(&p, Path::new(".")).unwrap().eval(-0.05).unwrap();
        assert!((v[2] - 0.005).abs() < 1e-15);
        let text = format!("{MINIMAL}\n[history]\nkind = \"constant\"\nvalue = [0.5, 0.5, 0.0]\nscale = 0.5\n");
        let s = Scenario::from_toml_str(&text).unwrap();
        assert!(matches!(s.build_history(&p, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), s);
    }
}
