use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slablab::gamma_zero::DEFAULT_CEILING;
use slablab::prob_model::DEFAULT_TOL;
use slablab::{ConditionReport, EdgeProbabilityModel, GammaOptions, ModelKind, Poset, SlabProbabilityModel};

/// A configuration problem, with the offending key path when there is one.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, why: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{key}: {why}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Constant,
    Table,
    PowerDecay,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Kind,
    pub p: Option<f64>,
    pub table: Option<Vec<f64>>,
    pub tail: Option<f64>,
    pub exponent: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_vertical")]
    pub vertical: f64,
    #[serde(default)]
    pub lateral: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_vertical() -> f64 {
    0.5
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: Kind::Constant,
            p: Some(0.5),
            table: None,
            tail: None,
            exponent: None,
            tol: DEFAULT_TOL,
            vertical: default_vertical(),
            lateral: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Chain,
    Diamond,
    Covers,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetSection {
    pub shape: Shape,
    /// Number of levels of a chain.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Cover pairs `[lower, upper]` over `size` elements.
    #[serde(default)]
    pub covers: Vec<[usize; 2]>,
    pub size: Option<usize>,
}

fn default_levels() -> usize {
    2
}

impl Default for PosetSection {
    fn default() -> Self {
        Self { shape: Shape::Chain, levels: 2, covers: vec![], size: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub replications: u64,
    pub window: u64,
    pub n: u64,
    /// Per-window miss probability allowed when choosing a skeleton buffer.
    pub eps: f64,
    pub buffer: Option<u64>,
    /// Margin sampled on each side of a slab window.
    pub margin: u64,
    pub t_grid: Vec<f64>,
    pub alpha: f64,
    pub gamma_tol: f64,
    pub ceiling: u64,
    pub z_count: u64,
    pub grid_steps: u64,
    /// GUE dimension; defaults to the number of levels of a chain.
    pub dim: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 100,
            window: 1000,
            n: 10_000,
            eps: 1e-6,
            buffer: None,
            margin: 4000,
            t_grid: vec![1.0, 2.0],
            alpha: 0.01,
            gamma_tol: DEFAULT_TOL,
            ceiling: DEFAULT_CEILING,
            z_count: 10_000,
            grid_steps: 400,
            dim: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
    /// Zero means the environment decides.
    pub workers: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: Format::Jsonl, workers: 0 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub poset: PosetSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Flag values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub window: Option<u64>,
    pub n: Option<u64>,
}

/// A validated config with its models built and conditions evaluated.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub line: EdgeProbabilityModel,
    pub slab: SlabProbabilityModel,
    pub conditions: ConditionReport,
}

pub fn parse(text: &str) -> Result<Config, ConfigError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().to_string();
        if path == "." {
            ConfigError(msg)
        } else {
            bad(&path, msg)
        }
    })
}

pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Loaded, ConfigError> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            parse(&text)?
        }
        None => Config::default(),
    };
    let e = &mut config.experiment;
    if let Some(v) = o.seed {
        e.seed = v;
    }
    if let Some(v) = o.replications {
        e.replications = v;
    }
    if let Some(v) = o.window {
        e.window = v;
    }
    if let Some(v) = o.n {
        e.n = v;
    }
    if let Some(v) = &o.out {
        config.output.dir = v.clone();
    }
    if let Some(v) = o.workers {
        config.output.workers = v;
    }
    config.build()
}

impl Config {
    pub fn kind(&self) -> Result<ModelKind, ConfigError> {
        let m = &self.model;
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| bad(&format!("model.{key}"), "missing"));
        Ok(match m.kind {
            Kind::Constant => ModelKind::Constant { p: need(m.p, "p")? },
            Kind::Table => ModelKind::Table {
                table: m.table.clone().ok_or_else(|| bad("model.table", "missing"))?,
                tail: need(m.tail, "tail")?,
            },
            Kind::PowerDecay => ModelKind::PowerDecay { exponent: need(m.exponent, "exponent")? },
        })
    }

    pub fn poset(&self) -> Result<Poset, ConfigError> {
        let p = &self.poset;
        match p.shape {
            Shape::Chain if p.levels == 0 => Err(bad("poset.levels", "must be at least 1")),
            Shape::Chain => Ok(Poset::chain(p.levels - 1)),
            Shape::Diamond => Ok(Poset::diamond()),
            Shape::Covers => {
                let size = p.size.ok_or_else(|| bad("poset.size", "missing"))?;
                let names = (0..size).map(|i| i.to_string()).collect();
                let covers: Vec<(usize, usize)> = p.covers.iter().map(|c| (c[0], c[1])).collect();
                Poset::from_covers(names, &covers).map_err(|e| bad("poset.covers", e))
            }
        }
    }

    pub fn gamma_options(&self) -> GammaOptions {
        GammaOptions { tol: self.experiment.gamma_tol, ceiling: self.experiment.ceiling }
    }

    fn build(self) -> Result<Loaded, ConfigError> {
        let e = &self.experiment;
        for (key, v) in [("model.tol", self.model.tol), ("experiment.eps", e.eps), ("experiment.gamma_tol", e.gamma_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(key, format!("must be positive, got {v}")));
            }
        }
        if !(e.alpha > 0.0 && e.alpha < 1.0) {
            return Err(bad("experiment.alpha", format!("must lie in (0, 1), got {}", e.alpha)));
        }
        if e.t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(bad("experiment.t_grid", "times must be positive"));
        }
        if e.window < 2 {
            return Err(bad("experiment.window", "must be at least 2"));
        }
        let line = EdgeProbabilityModel::new(self.kind()?).map_err(|e| bad("model", e))?;
        let slab = SlabProbabilityModel::new(line.clone(), self.poset()?, self.model.vertical, self.model.lateral)
            .map_err(|e| bad("model", e))?;
        let conditions = line.check_conditions(self.model.tol).map_err(|e| bad("model", e))?;
        Ok(Loaded { config: self, line, slab, conditions })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let l = load(None, &Overrides::default()).unwrap();
        assert!(l.conditions.c1 && l.conditions.c2() && l.conditions.c3());
        assert_eq!(l.slab.poset.len(), 2);
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = parse("[experiment]\nwindow = 10\nwindw = 3\n").unwrap_err();
        assert!(err.0.contains("windw"), "{err}");
        let err = parse("[model]\nkind = \"constant\"\np = \"half\"\n").unwrap_err();
        assert!(err.0.starts_with("model.p"), "{err}");
    }

    #[test]
    fn flags_win() {
        let path = std::env::temp_dir().join(format!("slablab-flags-{}.toml", std::process::id()));
        std::fs::write(&path, "[experiment]\nseed = 4\nreplications = 9\n").unwrap();
        let o = Overrides { seed: Some(7), ..Default::default() };
        let l = load(Some(&path), &o).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!((l.config.experiment.seed, l.config.experiment.replications), (7, 9));
    }

    #[test]
    fn tolerances_must_be_positive() {
        let c = parse("[model]\nkind = \"constant\"\np = 0.5\ntol = 0.0\n").unwrap();
        assert!(c.build().unwrap_err().0.starts_with("model.tol"));
    }

    #[test]
    fn missing_parameters_are_reported() {
        let c = parse("[model]\nkind = \"table\"\ntable = [0.5]\n").unwrap();
        assert!(c.build().unwrap_err().0.starts_with("model.tail"));
    }
}
