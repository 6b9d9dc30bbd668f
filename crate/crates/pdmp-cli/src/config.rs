//! Run configuration: one JSON file drives every subcommand. All fields
//! except the model carry defaults, so a minimal config is just
//! `{"model": {"kind": "tcp"}}`; `print-config` shows the filled-in result.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use pdmp::models::{build_oracle, build_tcp, BacteriaModel, CrackParams};
use pdmp::{PdmpError, PdmpModel, PipelineSettings, Result};

/// Which process to run and its model-level parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Tcp,
    Bacteria {
        #[serde(default = "default_rate")]
        const_rate: f64,
    },
    Oracle {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_rate")]
        rate: f64,
        #[serde(default = "default_true")]
        bounded: bool,
    },
    Crack {
        #[serde(default)]
        params: CrackParams,
        /// CSV of observed histories; synthetic generation when absent.
        #[serde(default)]
        histories: Option<PathBuf>,
        /// Number of synthetic specimens.
        #[serde(default = "default_count")]
        count: usize,
        /// Target crack lengths, millimetres.
        #[serde(default = "default_targets")]
        targets: Vec<f64>,
        /// Node spacing of the material-parameter grid.
        #[serde(default = "default_m_step")]
        m_grid_step: f64,
    },
}

fn default_rate() -> f64 {
    1.0
}
fn default_dim() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_count() -> usize {
    500
}
fn default_targets() -> Vec<f64> {
    vec![25.0, 30.0, 35.0, 40.0, 45.0]
}
fn default_m_step() -> f64 {
    0.04
}

impl ModelConfig {
    /// Builds the simulatable models. The crack model estimates in a frozen
    /// parameter space and is wired specially by each command.
    pub fn build(&self) -> Result<Box<dyn PdmpModel>> {
        match self {
            ModelConfig::Tcp => Ok(Box::new(build_tcp())),
            ModelConfig::Bacteria { const_rate } => {
                if !(const_rate.is_finite() && *const_rate > 0.0) {
                    return Err(PdmpError::Config {
                        context: format!("swim rate {const_rate} must be positive"),
                    });
                }
                Ok(Box::new(BacteriaModel::with_constant_rate(*const_rate)))
            }
            ModelConfig::Oracle { dim, rate, bounded } => {
                if *dim == 0 {
                    return Err(PdmpError::Config { context: "oracle dimension 0".into() });
                }
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(PdmpError::Config {
                        context: format!("oracle rate {rate} must be nonnegative"),
                    });
                }
                Ok(Box::new(build_oracle(*dim, *rate, *bounded)))
            }
            ModelConfig::Crack { .. } => Err(PdmpError::Config {
                context: "the crack model has no simulatable flow; use its switch records"
                    .into(),
            }),
        }
    }

    pub fn is_crack(&self) -> bool {
        matches!(self, ModelConfig::Crack { .. })
    }

    /// A sensible interior start for the chain.
    pub fn default_x0(&self) -> Vec<f64> {
        match self {
            ModelConfig::Tcp => vec![0.3, 0.6],
            ModelConfig::Bacteria { .. } => vec![0.0, 0.0, 0.0],
            ModelConfig::Oracle { dim, .. } => vec![0.4; *dim],
            ModelConfig::Crack { .. } => Vec::new(),
        }
    }

    /// A sensible estimation target when the config leaves it empty.
    pub fn default_target(&self) -> Vec<f64> {
        match self {
            ModelConfig::Tcp => vec![0.75, 0.5],
            ModelConfig::Bacteria { .. } => vec![0.5, 0.0, 0.0],
            ModelConfig::Oracle { dim, .. } => vec![0.5; *dim],
            ModelConfig::Crack { .. } => Vec::new(),
        }
    }

    /// The interior material-parameter grid of the crack model.
    pub fn crack_m_grid(&self) -> Vec<f64> {
        match self {
            ModelConfig::Crack { params, m_grid_step, .. } => {
                let (lo, hi) = params.m_band;
                let mut grid = Vec::new();
                let mut m = lo + m_grid_step;
                while m < hi - 0.5 * m_grid_step {
                    grid.push(m);
                    m += m_grid_step;
                }
                grid
            }
            _ => Vec::new(),
        }
    }
}

/// Fixed bandwidth exponents; their presence skips cross-validation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    pub alpha_g: f64,
    pub alpha_f: f64,
    pub beta_f: f64,
}

/// One estimation query for the `estimate` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    pub x: Vec<f64>,
    pub t: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Main chain length.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Validation chain length.
    #[serde(default = "default_n_val")]
    pub n_val: usize,
    /// Chain start; a model default when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Estimation target; a model default when empty.
    #[serde(default)]
    pub target_x: Vec<f64>,
    /// Reverse-curve node spacing; 0 picks one from `min_curve_nodes`.
    #[serde(default)]
    pub curve_step: f64,
    #[serde(default = "default_min_nodes")]
    pub min_curve_nodes: usize,
    #[serde(default = "default_curve_cap")]
    pub curve_cap: f64,
    /// Tube radius of the survival criterion.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Tube radius and time window of the density criterion.
    #[serde(default = "default_rho2")]
    pub rho2: f64,
    #[serde(default = "default_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_grid")]
    pub beta_grid: Vec<f64>,
    #[serde(default = "default_v0")]
    pub v0: f64,
    #[serde(default = "default_v0")]
    pub w0: f64,
    /// Probe radius multiplier of the feasibility check, in units of the
    /// kernel support.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub fixed: Option<FixedConfig>,
    #[serde(default)]
    pub strict_feasibility: bool,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Extra query points for the `estimate` subcommand.
    #[serde(default)]
    pub queries: Vec<QueryConfig>,
}

fn default_seed() -> u64 {
    1
}
fn default_n() -> usize {
    10_000
}
fn default_n_val() -> usize {
    1_000
}
fn default_min_nodes() -> usize {
    100
}
fn default_curve_cap() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    0.01
}
fn default_rho2() -> f64 {
    0.1
}
fn default_grid() -> Vec<f64> {
    pdmp::default_exponent_grid()
}
fn default_v0() -> f64 {
    0.3
}
fn default_delta() -> f64 {
    1.0
}
fn default_replicates() -> usize {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// The default run of a model, also what `print-config` shows.
    pub fn template(model: ModelConfig) -> RunConfig {
        let target_x = model.default_target();
        RunConfig {
            model,
            seed: default_seed(),
            n: default_n(),
            n_val: default_n_val(),
            x0: None,
            target_x,
            curve_step: 0.0,
            min_curve_nodes: default_min_nodes(),
            curve_cap: default_curve_cap(),
            rho: default_rho(),
            rho2: default_rho2(),
            alpha_grid: default_grid(),
            beta_grid: default_grid(),
            v0: default_v0(),
            w0: default_v0(),
            delta: default_delta(),
            fixed: None,
            strict_feasibility: false,
            replicates: default_replicates(),
            output_dir: default_out(),
            queries: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.v0, "v0"),
            (self.w0, "w0"),
            (self.rho, "rho"),
            (self.rho2, "rho2"),
            (self.delta, "delta"),
            (self.curve_cap, "curve_cap"),
        ];
        for (value, name) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(PdmpError::Config {
                    context: format!("{name} = {value} must be positive"),
                });
            }
        }
        if self.curve_step < 0.0 || !self.curve_step.is_finite() {
            return Err(PdmpError::Config {
                context: format!("curve_step = {} must be zero or positive", self.curve_step),
            });
        }
        if self.alpha_grid.is_empty() || self.beta_grid.is_empty() {
            return Err(PdmpError::Config { context: "exponent grids must be nonempty".into() });
        }
        if self.replicates == 0 {
            return Err(PdmpError::Config { context: "replicates must be at least 1".into() });
        }
        if let ModelConfig::Crack { count, targets, m_grid_step, params, histories } = &self.model
        {
            if histories.is_none() && *count == 0 {
                return Err(PdmpError::Config {
                    context: "crack generation needs count >= 1".into(),
                });
            }
            if targets.is_empty() {
                return Err(PdmpError::Config { context: "crack targets are empty".into() });
            }
            if !(m_grid_step.is_finite() && *m_grid_step > 0.0) {
                return Err(PdmpError::Config {
                    context: format!("m_grid_step = {m_grid_step} must be positive"),
                });
            }
            if params.m_band.0 >= params.m_band.1 {
                return Err(PdmpError::Config {
                    context: format!("degenerate material band {:?}", params.m_band),
                });
            }
        } else {
            // Simulatable models: the builder vets the parameters.
            self.model.build()?;
        }
        Ok(())
    }

    /// The chain start, validated against the model dimension.
    pub fn start_state(&self, model: &dyn PdmpModel) -> Result<Vec<f64>> {
        let x0 = self.x0.clone().unwrap_or_else(|| self.model.default_x0());
        if x0.len() != model.dim() {
            return Err(PdmpError::DimensionMismatch { expected: model.dim(), got: x0.len() });
        }
        Ok(x0)
    }

    /// The estimation target, validated against the model dimension.
    pub fn target(&self, model: &dyn PdmpModel) -> Result<Vec<f64>> {
        let target = if self.target_x.is_empty() {
            self.model.default_target()
        } else {
            self.target_x.clone()
        };
        if target.len() != model.dim() {
            return Err(PdmpError::DimensionMismatch { expected: model.dim(), got: target.len() });
        }
        Ok(target)
    }

    pub fn pipeline_settings(&self) -> PipelineSettings {
        PipelineSettings {
            v0: self.v0,
            w0: self.w0,
            curve_step: self.curve_step,
            min_curve_nodes: self.min_curve_nodes,
            curve_cap: self.curve_cap,
            rho: self.rho,
            rho2: self.rho2,
            alpha_grid: self.alpha_grid.clone(),
            beta_grid: self.beta_grid.clone(),
            fixed: self.fixed.map(|f| pdmp::FixedBandwidths {
                alpha_g: f.alpha_g,
                alpha_f: f.alpha_f,
                beta_f: f.beta_f,
            }),
            strict_feasibility: self.strict_feasibility,
            ..PipelineSettings::default()
        }
    }

    /// Exponents for the commands that never cross-validate.
    pub fn fixed_or_default(&self) -> pdmp::FixedBandwidths {
        match self.fixed {
            Some(f) => pdmp::FixedBandwidths {
                alpha_g: f.alpha_g,
                alpha_f: f.alpha_f,
                beta_f: f.beta_f,
            },
            None => pdmp::FixedBandwidths { alpha_g: 0.3, alpha_f: 0.3, beta_f: 0.45 },
        }
    }
}

/// Loads and validates a config file, folding in command-line overrides.
pub fn load_config(
    path: &std::path::Path,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| PdmpError::Config {
        context: format!("cannot read config {}: {e}", path.display()),
    })?;
    let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| PdmpError::Parse {
        line: e.line(),
        context: format!("config {}: {e}", path.display()),
    })?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    if let Some(out) = out_override {
        config.output_dir = out;
    }
    config.validate()?;
    Ok(config)
}
