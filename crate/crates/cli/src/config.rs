//! Run configuration: JSON file, command line overrides and validation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use g2cones::curve_builder::CurveSeed;
use g2cones::toda_lattice::TodaState;
use g2cones::tolerances;
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// A configuration problem, located by the dotted path of the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field {}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parse JSON text, reporting the path of the field that failed.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(path, e.into_inner().to_string())
    })
}

/// Read and parse a JSON file. I/O errors are passed through unchanged.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    parse_json(&text).map_err(|e| anyhow::Error::new(e).context(path.display().to_string()))
}

/// Pass/fail thresholds of every check.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub algebra: f64,
    pub sum_v: f64,
    pub spectral: f64,
    pub closed_form: f64,
    pub classify: f64,
    pub aks: f64,
    pub frames: f64,
    pub ac: f64,
    pub cone: f64,
    pub sl_alpha: f64,
    pub sl_normal: f64,
    pub quadric: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            algebra: tolerances::ALGEBRAIC,
            sum_v: tolerances::SUM_V_DRIFT,
            spectral: tolerances::SPECTRAL_DRIFT,
            closed_form: 1e-6,
            classify: tolerances::CLASSIFY_RELATIVE,
            aks: tolerances::AKS_CONSISTENCY,
            frames: tolerances::FRAME_IN_G2,
            ac: tolerances::GRID_GEOMETRY,
            cone: tolerances::GRID_GEOMETRY,
            sl_alpha: tolerances::SL_ALPHA,
            sl_normal: tolerances::SL_NORMAL,
            quadric: tolerances::QUADRIC_ISOTROPY,
        }
    }
}

impl Tolerances {
    fn fields_mut(&mut self) -> [(&'static str, &mut f64); 12] {
        [
            ("algebra", &mut self.algebra),
            ("sum_v", &mut self.sum_v),
            ("spectral", &mut self.spectral),
            ("closed_form", &mut self.closed_form),
            ("classify", &mut self.classify),
            ("aks", &mut self.aks),
            ("frames", &mut self.frames),
            ("ac", &mut self.ac),
            ("cone", &mut self.cone),
            ("sl_alpha", &mut self.sl_alpha),
            ("sl_normal", &mut self.sl_normal),
            ("quadric", &mut self.quadric),
        ]
    }

    /// Apply `name=value` overrides.
    pub fn apply(&mut self, overrides: &[ToleranceOverride]) -> Result<(), ConfigError> {
        for o in overrides {
            let slot = self
                .fields_mut()
                .into_iter()
                .find(|(name, _)| *name == o.name)
                .ok_or_else(|| ConfigError::new(format!("tolerances.{}", o.name), "unknown tolerance"))?;
            *slot.1 = o.value;
        }
        Ok(())
    }

    pub fn validate(&mut self) -> Result<(), ConfigError> {
        for (name, value) in self.fields_mut() {
            if !(*value > 0.0 && value.is_finite()) {
                return Err(ConfigError::new(format!("tolerances.{name}"), format!("must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

/// `--tol name=value` on the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct ToleranceOverride {
    pub name: String,
    pub value: f64,
}

impl FromStr for ToleranceOverride {
    type Err = String;

    fn from_str(s: &str) -> Result<ToleranceOverride, String> {
        let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
        let value = value.trim().parse().map_err(|e| format!("{name}: {e}"))?;
        Ok(ToleranceOverride { name: name.trim().to_string(), value })
    }
}

/// Where artifacts go. Paths ending in `.json` get JSON, anything else CSV.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub trajectory: Option<PathBuf>,
    pub frames: Option<PathBuf>,
    pub grid: Option<PathBuf>,
}

/// Checks run by `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Algebra,
    Toda,
    ClosedForm,
    Classify,
    Aks,
    Frames,
    Ac,
    Cone,
    Sl,
    Quadric,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::Algebra,
        Check::Toda,
        Check::ClosedForm,
        Check::Classify,
        Check::Aks,
        Check::Frames,
        Check::Ac,
        Check::Cone,
        Check::Sl,
        Check::Quadric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Algebra => "algebra",
            Check::Toda => "toda",
            Check::ClosedForm => "closed-form",
            Check::Classify => "classify",
            Check::Aks => "aks",
            Check::Frames => "frames",
            Check::Ac => "ac",
            Check::Cone => "cone",
            Check::Sl => "sl",
            Check::Quadric => "quadric",
        }
    }
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<CurveSeed>,
    pub tolerances: Tolerances,
    pub outputs: Outputs,
    pub checks: Option<Vec<Check>>,
}

/// Seed fields that may be given on the command line.
#[derive(Clone, Debug, Default, PartialEq, clap::Args)]
pub struct SeedFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub a1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub v1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub v2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub v3: Option<f64>,
    /// Integration interval [default: 0.5]
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Integrator step [default: 0.001]
    #[arg(long)]
    pub step: Option<f64>,
}

impl SeedFlags {
    /// Overlay the flags on a seed.
    pub fn apply(&self, seed: &mut CurveSeed) {
        let pairs = [
            (self.a1, &mut seed.a1),
            (self.b1, &mut seed.b1),
            (self.v1, &mut seed.v1),
            (self.v2, &mut seed.v2),
            (self.v3, &mut seed.v3),
            (self.t_end, &mut seed.t_end),
            (self.step, &mut seed.step),
        ];
        for (flag, slot) in pairs {
            if let Some(v) = flag {
                *slot = v;
            }
        }
    }
}

/// Seed from, in increasing precedence: defaults, config file, flags.
pub fn resolve_seed(config: Option<&CurveSeed>, flags: &SeedFlags) -> Result<CurveSeed, ConfigError> {
    let mut seed = config.cloned().unwrap_or_else(|| CurveSeed::from_state(&TodaState::default()));
    flags.apply(&mut seed);
    validate_seed(&seed, "seed")?;
    Ok(seed)
}

/// Field checks on a resolved seed; `prefix` names it in error paths.
pub fn validate_seed(seed: &CurveSeed, prefix: &str) -> Result<(), ConfigError> {
    let at = |field: &str| if prefix.is_empty() { field.to_string() } else { format!("{prefix}.{field}") };
    for (name, v) in [("a1", seed.a1), ("b1", seed.b1), ("v1", seed.v1), ("v2", seed.v2), ("v3", seed.v3)] {
        if !v.is_finite() {
            return Err(ConfigError::new(at(name), format!("must be finite, got {v}")));
        }
    }
    if !(seed.t_end > 0.0 && seed.t_end.is_finite()) {
        return Err(ConfigError::new(at("t_end"), format!("must be positive, got {}", seed.t_end)));
    }
    if !(seed.step > 0.0) {
        return Err(ConfigError::new(at("step"), format!("must be positive, got {}", seed.step)));
    }
    if !(seed.step < seed.t_end) {
        return Err(ConfigError::new(
            at("step"),
            format!("step {} must be smaller than t_end {}", seed.step, seed.t_end),
        ));
    }
    if let Some(h) = seed.s_step {
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConfigError::new(at("s_step"), format!("must be positive, got {h}")));
        }
    }
    for (name, n) in [("s_samples", seed.s_samples), ("t_samples", seed.t_samples)] {
        if n < 3 {
            return Err(ConfigError::new(at(name), format!("need at least 3 samples, got {n}")));
        }
    }
    Ok(())
}

pub fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(RunConfig::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_path_in_errors() {
        let e = parse_json::<RunConfig>(r#"{"tolerances": {"cone": "big"}}"#).unwrap_err();
        assert_eq!(e.path, "tolerances.cone");
        let e = parse_json::<RunConfig>(r#"{"seed": {"a1": 0, "b1": 0, "v1": 0, "v2": 0, "v3": 0, "stp": 1}}"#)
            .unwrap_err();
        assert!(e.path.starts_with("seed"), "{e}");
        let e = parse_json::<RunConfig>(r#"{"checks": ["ac", "nope"]}"#).unwrap_err();
        assert_eq!(e.path, "checks[1]");
    }

    #[test]
    fn step_larger_than_t_end_is_rejected() {
        let mut seed = CurveSeed::from_state(&TodaState::default());
        seed.t_end = 0.1;
        seed.step = 0.5;
        let e = validate_seed(&seed, "seed").unwrap_err();
        assert_eq!(e.path, "seed.step");
    }

    #[test]
    fn flags_override_config_override_defaults() {
        let cfg: RunConfig =
            parse_json(r#"{"seed": {"a1": 1, "b1": 2, "v1": 3, "v2": 4, "v3": 5, "step": 0.01}}"#).unwrap();
        let flags = SeedFlags { b1: Some(-2.0), t_end: Some(2.0), ..Default::default() };
        let s = resolve_seed(cfg.seed.as_ref(), &flags).unwrap();
        assert_eq!((s.a1, s.b1, s.step, s.t_end), (1.0, -2.0, 0.01, 2.0));
        assert_eq!(s.s_samples, 100);
    }

    #[test]
    fn tolerance_overrides() {
        let mut t = Tolerances::default();
        t.apply(&["ac=1e-3".parse().unwrap()]).unwrap();
        assert_eq!(t.ac, 1e-3);
        assert!(t.apply(&["nope=1".parse().unwrap()]).is_err());
        t.apply(&["cone=-1".parse().unwrap()]).unwrap();
        assert_eq!(t.validate().unwrap_err().path, "tolerances.cone");
    }
}
