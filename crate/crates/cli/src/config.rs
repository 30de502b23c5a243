//! Run configuration: JSON document, dot-path overrides, validation, hash.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use wavemap_core::evolution::PerturbationShape;
use wavemap_core::geometry::SurfaceProfile;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceConfig {
    #[default]
    Round,
    Bumpy {
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Flat {
        #[serde(default = "default_extent")]
        extent: f64,
    },
    Tabulated {
        table: PathBuf,
    },
}

fn default_eps() -> f64 {
    0.05
}

fn default_extent() -> f64 {
    1.0
}

impl SurfaceConfig {
    pub fn build(&self) -> Result<SurfaceProfile<f64>> {
        Ok(match self {
            SurfaceConfig::Round => SurfaceProfile::round(),
            SurfaceConfig::Bumpy { eps } => SurfaceProfile::bumpy(*eps),
            SurfaceConfig::Flat { extent } => SurfaceProfile::flat(*extent),
            SurfaceConfig::Tabulated { table } => {
                SurfaceProfile::from_csv(table).with_context(|| format!("reading profile table {}", table.display()))?
            }
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    #[default]
    Round,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 2000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub multistart: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 2000, multistart: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub cfl: f64,
    pub record_every: usize,
    /// Size of the perturbation added to the stationary data before evolving.
    pub delta: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { t_final: 1.0, cfl: 0.4, record_every: 50, delta: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub delta: f64,
    /// When non-empty, one run per entry instead of `delta`.
    pub deltas: Vec<f64>,
    pub epsilon: f64,
    pub seed: u64,
    pub shape: PerturbationShape,
    #[serde(rename = "T")]
    pub t_final: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { delta: 1e-3, deltas: Vec::new(), epsilon: 1e-2, seed: 0, shape: PerturbationShape::Bump, t_final: 5.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub delta_hoelder: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { delta_hoelder: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub triangles: usize,
    pub curvature_factor: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { triangles: 200, curvature_factor: 1.05 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub target: TargetConfig,
    pub l: u32,
    pub omega: f64,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub evolve: EvolveConfig,
    pub stability: StabilityConfig,
    pub diagnostics: DiagnosticsConfig,
    pub geometry: GeometryConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            surface: SurfaceConfig::Round,
            target: TargetConfig::Round,
            l: 1,
            omega: 0.0,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            evolve: EvolveConfig::default(),
            stability: StabilityConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            geometry: GeometryConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut copy = self.clone();
        copy.output.directory = PathBuf::new();
        let bytes = serde_json::to_vec(&copy).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn validate(&self) -> Result<()> {
        if self.grid.n < 16 {
            bail!("grid.N must be at least 16, got {}", self.grid.n);
        }
        if !(self.evolve.cfl > 0.0 && self.evolve.cfl < 1.0) {
            bail!("evolve.cfl must lie in (0, 1), got {}", self.evolve.cfl);
        }
        if !(self.evolve.t_final > 0.0) || !(self.stability.t_final > 0.0) {
            bail!("final times must be positive");
        }
        if !(self.solver.tol > 0.0) {
            bail!("solver.tol must be positive");
        }
        if !(self.stability.epsilon > 0.0) {
            bail!("stability.epsilon must be positive");
        }
        let deltas = std::iter::once(self.stability.delta).chain(self.stability.deltas.iter().copied());
        for d in deltas.chain(std::iter::once(self.evolve.delta)) {
            if !(d >= 0.0 && d.is_finite()) {
                bail!("perturbation sizes must be finite and non-negative, got {d}");
            }
        }
        if !self.omega.is_finite() {
            bail!("omega must be finite");
        }
        if !(self.diagnostics.delta_hoelder > 0.0 && self.diagnostics.delta_hoelder < 0.5) {
            bail!("diagnostics.delta_hoelder must lie in (0, 1/2)");
        }
        match &self.surface {
            SurfaceConfig::Bumpy { eps } if !eps.is_finite() => bail!("surface.eps must be finite"),
            SurfaceConfig::Flat { extent } if !(*extent > 0.0) => bail!("surface.extent must be positive"),
            SurfaceConfig::Tabulated { table } if !table.is_file() => {
                bail!("surface.table: no such file {}", table.display())
            }
            _ => {}
        }
        if self.output.formats.is_empty() {
            bail!("output.formats must not be empty");
        }
        Ok(())
    }
}

/// Sets `path` (dot separated) to `value` inside `doc`, creating objects on the way.
fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("malformed override key {path:?}");
    }
    for key in &keys[..keys.len() - 1] {
        let Value::Object(map) = node else { bail!("override {path:?} descends into a non-object") };
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let Value::Object(map) = node else { bail!("override {path:?} descends into a non-object") };
    map.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is read as JSON and falls back to a string.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text.split_once('=').with_context(|| format!("override {text:?} is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

/// Parses a JSON config, applies overrides, resolves relative paths against
/// `base` and checks the invariants.
pub fn parse_config(text: &str, base: &Path, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let mut doc: Value = serde_json::from_str(text).context("config is not valid JSON")?;
    if !doc.is_object() {
        bail!("config must be a JSON object");
    }
    for (key, value) in overrides {
        set_path(&mut doc, key, value.clone())?;
    }
    let mut config: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("config error at {path}: {}", e.into_inner())
    })?;
    if let SurfaceConfig::Tabulated { table } = &mut config.surface {
        if table.is_relative() {
            *table = base.join(&*table);
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse_config(&text, p.parent().unwrap_or(Path::new(".")), overrides)
        }
        None => parse_config("{}", Path::new("."), overrides),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("."), &[])
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(r#"{"surface": {"kind": "round"}, "l": 1}"#).unwrap();
        assert_eq!(c.omega, 0.0);
        assert_eq!(c.grid.n, 2000);
        assert_eq!(c.evolve.cfl, 0.4);
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse(r#"{"omgea": 0.5}"#).unwrap_err().to_string();
        assert!(err.contains("omgea"), "{err}");
        let err = parse(r#"{"evolve": {"cfl": 0.3, "dtt": 1}}"#).unwrap_err().to_string();
        assert!(err.contains("evolve") && err.contains("dtt"), "{err}");
    }

    #[test]
    fn missing_table_fails_at_parse_time() {
        let err = parse(r#"{"surface": {"kind": "tabulated", "table": "nope.csv"}}"#).unwrap_err();
        assert!(err.to_string().contains("nope.csv"), "{err}");
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(parse(r#"{"grid": {"N": 8}}"#).is_err());
        assert!(parse(r#"{"evolve": {"cfl": 1.5}}"#).is_err());
        assert!(parse(r#"{"evolve": {"cfl": 0.0}}"#).is_err());
        assert!(parse(r#"{"stability": {"delta": -1e-3}}"#).is_err());
        assert!(parse(r#"{"surface": {"kind": "bumpy", "eps": 0.1}}"#).is_ok());
    }

    #[test]
    fn overrides_use_dot_paths() {
        let ov = vec![parse_override("omega=0.5").unwrap(), parse_override("grid.N=400").unwrap()];
        let c = parse_config("{}", Path::new("."), &ov).unwrap();
        assert_eq!(c.omega, 0.5);
        assert_eq!(c.grid.n, 400);
        let ov = vec![parse_override("stability.shape=mode").unwrap()];
        let c = parse_config("{}", Path::new("."), &ov).unwrap();
        assert_eq!(c.stability.shape, PerturbationShape::Mode);
        assert!(parse_override("omega").is_err());
        assert!(parse_config("{}", Path::new("."), &[parse_override("omega.x=1").unwrap()]).is_err());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.directory = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.omega = 0.25;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
