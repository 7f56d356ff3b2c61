//! TOML run configuration for `benchmark`.
//!
//! ```toml
//! [generator]            # synthetic ground truth; omit when [matrix] is used
//! n1 = 30
//! n2 = 30
//! rank = 2
//! density_left = 0.3
//! density_right = 0.5
//!
//! # [matrix]             # fixed ground truth instead of [generator]
//! # path = "responses.csv"   # relative to the config file
//! # row_subsample = 100      # optional random row subset per trial
//!
//! [grid]                 # every key optional
//! zero_rates = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
//! nonzero_rates = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
//! alphas = [0.1, 0.01, 0.001, 0.0001]
//! trials = 10
//! seed = 0
//! noise_sigma = 0.0
//!
//! [solver]               # every key optional
//! max_iters = 5000
//! primal_tol = 1e-6
//! dual_tol = 1e-6
//! admm_penalty = 1.0
//! adapt_iters = 1000
//!
//! [output]               # file names inside the output directory
//! results = "results.csv"
//! heatmap_ratio = "heatmap_ratio.csv"
//! heatmap_alpha = "heatmap_alpha.csv"
//! manifest = "manifest.json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{default_rates, SweepParams, DEFAULT_ALPHAS};
use crate::problem::SolverConfig;
use crate::synth::GeneratorSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSection {
    n1: usize,
    n2: usize,
    rank: usize,
    density_left: f64,
    density_right: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixSection {
    path: PathBuf,
    row_subsample: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GridSection {
    zero_rates: Vec<f64>,
    nonzero_rates: Vec<f64>,
    alphas: Vec<f64>,
    trials: usize,
    seed: u64,
    noise_sigma: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            zero_rates: default_rates(),
            nonzero_rates: default_rates(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            trials: 10,
            seed: 0,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputNames {
    pub results: String,
    pub heatmap_ratio: String,
    pub heatmap_alpha: String,
    pub manifest: String,
}

impl Default for OutputNames {
    fn default() -> Self {
        Self {
            results: "results.csv".into(),
            heatmap_ratio: "heatmap_ratio.csv".into(),
            heatmap_alpha: "heatmap_alpha.csv".into(),
            manifest: "manifest.json".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    generator: Option<GeneratorSection>,
    matrix: Option<MatrixSection>,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    output: OutputNames,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroundTruth {
    Synthetic(GeneratorSpec),
    Matrix {
        path: PathBuf,
        row_subsample: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub truth: GroundTruth,
    pub params: SweepParams,
    pub output: OutputNames,
}

fn config_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        msg: msg.into(),
    }
}

/// Runs a validator and relabels its complaint with the config key.
fn check(key: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::InvalidArgument(msg) => config_err(key, msg),
        other => config_err(key, other.to_string()),
    })
}

fn check_file_name(key: &str, name: &str) -> Result<()> {
    let p = Path::new(name);
    if name.is_empty() || p.components().count() != 1 || p.file_name().is_none() {
        return Err(config_err(key, format!("`{name}` must be a plain file name")));
    }
    Ok(())
}

impl BenchmarkConfig {
    /// Parses a config document. A relative `matrix.path` is resolved
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err("", e.to_string().trim_end()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let key = if key == "." { String::new() } else { key };
            config_err(&key, e.into_inner().message().trim_end())
        })?;

        let truth = match (raw.generator, raw.matrix) {
            (Some(_), Some(_)) => {
                return Err(config_err("matrix", "give either [generator] or [matrix], not both"))
            }
            (None, None) => return Err(config_err("", "missing [generator] or [matrix] section")),
            (Some(g), None) => {
                let spec = GeneratorSpec::new(g.n1, g.n2, g.rank, g.density_left, g.density_right, 0);
                check("generator", spec.validate())?;
                GroundTruth::Synthetic(spec)
            }
            (None, Some(m)) => {
                if m.row_subsample == Some(0) {
                    return Err(config_err("matrix.row_subsample", "must be at least 1"));
                }
                GroundTruth::Matrix {
                    path: base_dir.join(m.path),
                    row_subsample: m.row_subsample,
                }
            }
        };

        let g = raw.grid;
        for (key, rates) in [("grid.zero_rates", &g.zero_rates), ("grid.nonzero_rates", &g.nonzero_rates)] {
            if rates.is_empty() {
                return Err(config_err(key, "must be nonempty"));
            }
            if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(config_err(key, format!("rate {r} outside [0, 1]")));
            }
        }
        if g.alphas.is_empty() {
            return Err(config_err("grid.alphas", "must be nonempty"));
        }
        if let Some(a) = g.alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(config_err("grid.alphas", format!("alpha {a} must be positive")));
        }
        if g.trials == 0 {
            return Err(config_err("grid.trials", "must be at least 1"));
        }
        if !(g.noise_sigma >= 0.0 && g.noise_sigma.is_finite()) {
            return Err(config_err("grid.noise_sigma", "must be nonnegative"));
        }
        check("solver", raw.solver.validate())?;
        let o = &raw.output;
        for (key, name) in [
            ("output.results", &o.results),
            ("output.heatmap_ratio", &o.heatmap_ratio),
            ("output.heatmap_alpha", &o.heatmap_alpha),
            ("output.manifest", &o.manifest),
        ] {
            check_file_name(key, name)?;
        }

        let params = SweepParams {
            zero_rates: g.zero_rates,
            nonzero_rates: g.nonzero_rates,
            alphas: g.alphas,
            trials: g.trials,
            noise_sigma: g.noise_sigma,
            base_seed: g.seed,
            solver: raw.solver,
        };
        Ok(Self {
            truth,
            params,
            output: raw.output,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }
}
