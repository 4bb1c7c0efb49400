//! Experiment configuration: a versioned TOML document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{preset, LawSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Hard caps on budgets, to keep a run within desk scale.
pub const MAX_PATHS: u64 = 10_000_000;
pub const MAX_STEPS: u64 = 1_000_000;
pub const MAX_GRID: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ergodic,
    Banach,
    Spectral,
    Conditioned,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ergodic => "ergodic",
            Stage::Banach => "banach",
            Stage::Spectral => "spectral",
            Stage::Conditioned => "conditioned",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Preset name; mutually exclusive with `law`.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub law: Option<LawSpec>,
    /// Overrides the law's declared moment exponent.
    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: String,
    /// Stages to run after law validation and recentering.
    #[serde(default)]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub recenter: RecenterConfig,
    #[serde(default)]
    pub ergodic: ErgodicConfig,
    #[serde(default)]
    pub banach: BanachConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub conditioned: ConditionedConfig,
}

fn default_output() -> String {
    "out".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecenterConfig {
    pub enabled: bool,
    pub burn_in: u64,
    pub n_steps: u64,
    pub n_paths: u64,
}

impl Default for RecenterConfig {
    fn default() -> Self {
        RecenterConfig { enabled: true, burn_in: 200, n_steps: 50_000, n_paths: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErgodicConfig {
    /// Unset: `max(10³, 10 × e-folding time of the projective contraction)`.
    pub burn_in: Option<u64>,
    pub n_samples: u64,
    pub n_replicas: u64,
    pub growth_grid: Vec<u64>,
    pub growth_paths: u64,
    pub cov_path_len: usize,
    pub cov_max_lag: usize,
    pub cov_paths: u64,
    pub contraction_n_max: u64,
    pub contraction_samples: u64,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        ErgodicConfig {
            burn_in: None,
            n_samples: 16384,
            n_replicas: 256,
            growth_grid: vec![50, 100, 200, 400],
            growth_paths: 4000,
            cov_path_len: 400,
            cov_max_lag: 40,
            cov_paths: 400,
            contraction_n_max: 24,
            contraction_samples: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanachConfig {
    pub log_n_max: f64,
    pub n_points: usize,
    pub n_pairs: usize,
    pub t_grid: Vec<f64>,
    pub truncation_levels: Vec<u32>,
    /// Largest accepted log-log slope of the truncated-weight expectations.
    pub decay_slope_max: f64,
    pub power_grid: Vec<u64>,
    pub power_points: usize,
    pub power_paths: u64,
}

impl Default for BanachConfig {
    fn default() -> Self {
        BanachConfig {
            log_n_max: 3.0,
            n_points: 1000,
            n_pairs: 1000,
            t_grid: vec![0.1, 0.5, 1.0],
            truncation_levels: vec![2, 4, 8, 16],
            decay_slope_max: -1.3,
            power_grid: vec![1, 2, 4, 8],
            power_points: 16,
            power_paths: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub m: usize,
    pub t_grid: Vec<f64>,
    pub power_n_max: usize,
    /// Stationary samples compared with the grid's stationary vector.
    pub tv_samples: u64,
    pub tv_replicas: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { m: 128, t_grid: vec![0.1, 0.3], power_n_max: 32, tv_samples: 262_144, tv_replicas: 512 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionedConfig {
    pub y_grid: Vec<f64>,
    pub n_max: u64,
    pub n_paths: u64,
    /// Offset for the asymptotic ratio and the endpoint law, in units of `σ̂`.
    pub asymptotic_y: f64,
    pub asymptotic_paths: u64,
    pub gamma_grid: Vec<f64>,
    pub probe_budget: u64,
    pub probe_paths: u64,
}

impl Default for ConditionedConfig {
    fn default() -> Self {
        ConditionedConfig {
            y_grid: vec![-2.0, 0.0, 1.0, 5.0],
            n_max: 1024,
            n_paths: 20_000,
            asymptotic_y: 2.0,
            asymptotic_paths: 200_000,
            gamma_grid: vec![0.5, 1.0, 2.0],
            probe_budget: 64,
            probe_paths: 2000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The law spec, from `preset` or `law`, with `delta0` applied.
    pub fn law_spec(&self) -> Result<LawSpec> {
        let mut spec = match (&self.preset, &self.law) {
            (Some(p), None) => preset(p).ok_or_else(|| Error::InvalidParameter(format!("unknown preset {p:?}")))?,
            (None, Some(l)) => l.clone(),
            _ => return Err(Error::InvalidParameter("exactly one of `preset` and `law` must be given".into())),
        };
        if let Some(d) = self.delta0 {
            spec.set_delta0(d);
        }
        Ok(spec)
    }

    /// Label used in records.
    pub fn label(&self) -> String {
        self.preset.clone().unwrap_or_else(|| "custom".into())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.law_spec()?;
        let bad = |what: &str| Err(Error::InvalidParameter(format!("budget out of range: {what}")));
        let paths = [
            ("recenter.n_paths", self.recenter.n_paths),
            ("ergodic.n_replicas", self.ergodic.n_replicas),
            ("ergodic.growth_paths", self.ergodic.growth_paths),
            ("ergodic.cov_paths", self.ergodic.cov_paths),
            ("ergodic.contraction_samples", self.ergodic.contraction_samples),
            ("banach.power_paths", self.banach.power_paths),
            ("spectral.tv_samples", self.spectral.tv_samples),
            ("spectral.tv_replicas", self.spectral.tv_replicas),
            ("conditioned.n_paths", self.conditioned.n_paths),
            ("conditioned.asymptotic_paths", self.conditioned.asymptotic_paths),
            ("conditioned.probe_paths", self.conditioned.probe_paths),
        ];
        for (k, v) in paths {
            if v == 0 || v > MAX_PATHS {
                return bad(k);
            }
        }
        let steps = [
            ("recenter.n_steps", self.recenter.n_steps),
            ("ergodic.burn_in", self.ergodic.burn_in.unwrap_or(0)),
            ("ergodic.n_samples", self.ergodic.n_samples),
            ("conditioned.n_max", self.conditioned.n_max),
            ("conditioned.probe_budget", self.conditioned.probe_budget),
            ("ergodic.contraction_n_max", self.ergodic.contraction_n_max),
        ];
        for (k, v) in steps {
            if v > MAX_STEPS {
                return bad(k);
            }
        }
        if self.spectral.m < 2 || self.spectral.m > MAX_GRID {
            return bad("spectral.m");
        }
        if self.banach.n_points == 0 || self.banach.n_points > MAX_PATHS as usize {
            return bad("banach.n_points");
        }
        if self.conditioned.n_max < 2 {
            return bad("conditioned.n_max");
        }
        Ok(())
    }
}

/// Annotated example configuration.
pub const SCHEMA_EXAMPLE: &str = r#"# cocycle-lab experiment configuration
schema_version = 1          # required; must equal 1
preset = "FIN2"             # SRW1 | LOGN1 | DIAGROT2 | FIN2; or give a [law] table instead
# delta0 = 2.0              # optional override of the declared moment exponent
master_seed = 42            # 64-bit master seed (overridden by --seed)
output_dir = "out"          # overridden by --out
stages = ["ergodic", "banach", "spectral", "conditioned"]   # any subset; [] runs law checks only

# [law]                     # alternative to `preset`
# kind = "finite-support"   # finite-support | rotation-diagonal | gl1-scalar
# dimension = 2
# delta0 = 2.0
# atoms = [ { matrix = [[1.5, 0.0], [0.0, 0.6666666666666666]], prob = 0.5 },
#           { matrix = [[0.5403023058681398, -0.8414709848078965], [0.8414709848078965, 0.5403023058681398]], prob = 0.5 } ]
#
# kind = "rotation-diagonal": dimension, delta0, angle = { dist = ... },
#   log_singular_values = [ { dist = "fixed", value = 0.5 }, ... ]
# kind = "gl1-scalar": delta0, log_abs = { dist = "discrete", values = [1.0, -1.0], probs = [0.5, 0.5] }
# scalar laws: { dist = "fixed", value }, { dist = "discrete", values, probs },
#              { dist = "normal", mean, sd }, { dist = "uniform", lo, hi }

[recenter]                  # skipped when the exponent is known in closed form
enabled = true
burn_in = 200
n_steps = 50000
n_paths = 256

[ergodic]
# burn_in = 1000            # default: max(1000, 10 x contraction e-folding time)
n_samples = 16384
n_replicas = 256
growth_grid = [50, 100, 200, 400]
growth_paths = 4000
cov_path_len = 400
cov_max_lag = 40
cov_paths = 400
contraction_n_max = 24
contraction_samples = 400

[banach]
log_n_max = 3.0
n_points = 1000
n_pairs = 1000
t_grid = [0.1, 0.5, 1.0]
truncation_levels = [2, 4, 8, 16]
decay_slope_max = -1.3
power_grid = [1, 2, 4, 8]
power_points = 16
power_paths = 200

[spectral]
m = 128
t_grid = [0.1, 0.3]
power_n_max = 32
tv_samples = 262144
tv_replicas = 512

[conditioned]
y_grid = [-2.0, 0.0, 1.0, 5.0]
n_max = 1024
n_paths = 20000
asymptotic_y = 2.0          # in units of the estimated sigma
asymptotic_paths = 200000
gamma_grid = [0.5, 1.0, 2.0]
probe_budget = 64
probe_paths = 2000
"#;
