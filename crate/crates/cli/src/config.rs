//! Experiment configuration files.
//!
//! Configs are TOML. Each experiment reads only the sections it needs; a
//! section it needs but cannot find is a validation error. Documented
//! defaults: `params.c1 = sqrt(1 - c2^2)`, the default frequencies and
//! displacement, integrator defaults, escape margin 0.15 and horizon 1e3.

use std::fmt;
use std::path::PathBuf;

use bohm_core::chaos::{EscapeConfig, LcnConfig};
use bohm_core::integrate::IntegratorConfig;
use bohm_core::params::{default_omega_y, DEFAULT_A0, DEFAULT_OMEGA_X, MAX_ENTANGLED_C2};
use bohm_core::pattern::Normalization;
use bohm_core::render::RenderOptions;
use bohm_core::sampler::{CustomCenter, EnsembleKind, EnsembleSpec};
use bohm_core::WaveParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BornEvolution,
    BornSelfDistance,
    CrossC2Finalpattern,
    SingleChaoticErgodicity,
    BCurve,
    ProportionLaw,
    NonbornMixture,
    CollisionSnapshots,
    NodeGeometry,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::BornEvolution,
        ExperimentKind::BornSelfDistance,
        ExperimentKind::CrossC2Finalpattern,
        ExperimentKind::SingleChaoticErgodicity,
        ExperimentKind::BCurve,
        ExperimentKind::ProportionLaw,
        ExperimentKind::NonbornMixture,
        ExperimentKind::CollisionSnapshots,
        ExperimentKind::NodeGeometry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BornEvolution => "born_evolution",
            ExperimentKind::BornSelfDistance => "born_self_distance",
            ExperimentKind::CrossC2Finalpattern => "cross_c2_finalpattern",
            ExperimentKind::SingleChaoticErgodicity => "single_chaotic_ergodicity",
            ExperimentKind::BCurve => "b_curve",
            ExperimentKind::ProportionLaw => "proportion_law",
            ExperimentKind::NonbornMixture => "nonborn_mixture",
            ExperimentKind::CollisionSnapshots => "collision_snapshots",
            ExperimentKind::NodeGeometry => "node_geometry",
        }
    }

    /// One-line description written into artifact headers.
    pub fn describe(self) -> &'static str {
        match self {
            ExperimentKind::BornEvolution => "Born-distributed ensemble evolved with snapshots and cumulative patterns",
            ExperimentKind::BornSelfDistance => "successive Frobenius distances of cumulative Born-ensemble patterns",
            ExperimentKind::CrossC2Finalpattern => "final Born patterns across c2 compared with a reference c2",
            ExperimentKind::SingleChaoticErgodicity => "pattern distance between long single chaotic trajectories",
            ExperimentKind::BCurve => "chaotic fraction b of the main blob versus c2",
            ExperimentKind::ProportionLaw => "ordered/chaotic labels and the chaotic-to-ordered ratio",
            ExperimentKind::NonbornMixture => "non-Born initial ensembles compared with the Born pattern",
            ExperimentKind::CollisionSnapshots => "blob collisions: epochs, snapshots and particle exchange",
            ExperimentKind::NodeGeometry => "nodal lattice geometry over time",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Wave parameters; `c2` is required, everything else has documented defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub c2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
}

impl ParamsConfig {
    pub fn with_c2(c2: f64) -> Self {
        Self {
            c2,
            c1: None,
            omega_x: None,
            omega_y: None,
            a0: None,
        }
    }

    pub fn resolve(&self) -> WaveParams {
        WaveParams {
            c1: self.c1.unwrap_or_else(|| (1.0 - self.c2 * self.c2).max(0.0).sqrt()),
            c2: self.c2,
            omega_x: self.omega_x.unwrap_or(DEFAULT_OMEGA_X),
            omega_y: self.omega_y.unwrap_or_else(default_omega_y),
            a0: self.a0.unwrap_or(DEFAULT_A0),
        }
    }

    /// Same overrides with a different `c2` (and `c1` re-derived).
    pub fn at_c2(&self, c2: f64) -> WaveParams {
        ParamsConfig {
            c2,
            c1: None,
            ..*self
        }
        .resolve()
    }
}

/// The `[ensemble]` section. The seed lives at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kind: EnsembleKind,
    pub n_particles: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub centers: Vec<CustomCenter>,
}

impl EnsembleConfig {
    pub fn spec(&self, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            kind: self.kind,
            n_particles: self.n_particles,
            p1: self.p1,
            p2: self.p2,
            centers: self.centers.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c2_values: Vec<f64>,
    /// `[p1, p2]` pairs for two-blob mixtures.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixtures: Vec<[f64; 2]>,
}

/// Comparison target for experiments that measure a distance to a Born pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// `c2` of the reference Born ensemble (cross-c2 comparisons only).
    #[serde(default = "default_reference_c2")]
    pub c2: f64,
    /// Offset added to the top-level seed for the reference ensemble.
    #[serde(default = "default_seed_offset")]
    pub seed_offset: u64,
}

fn default_reference_c2() -> f64 {
    MAX_ENTANGLED_C2
}

fn default_seed_offset() -> u64 {
    1_000_003
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            c2: default_reference_c2(),
            seed_offset: default_seed_offset(),
        }
    }
}

/// Lyapunov cross-check of escape labels on the first `sample` particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcnCheckConfig {
    pub sample: usize,
    #[serde(default)]
    pub settings: LcnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSweepConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Times at which the node list and X-points are written.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub node_times: Vec<f64>,
    #[serde(default = "default_collision_threshold")]
    pub collision_threshold: f64,
}

fn default_collision_threshold() -> f64 {
    bohm_core::nodes::DEFAULT_COLLISION_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    /// Start points `[x, y]` of single trajectories.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub starts: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape: Option<EscapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lcn: Option<LcnCheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<NodeSweepConfig>,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderOptions>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid TOML config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parse a TOML config, or the `config` field of a JSON run manifest.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            let v: serde_json::Value =
                serde_json::from_str(text).map_err(|e| ConfigError::Manifest(e.to_string()))?;
            let cfg = v
                .get("config")
                .ok_or_else(|| ConfigError::Manifest("no config field".into()))?;
            serde_json::from_value(cfg.clone()).map_err(|e| ConfigError::Manifest(e.to_string()))
        } else {
            Self::from_toml(text)
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn integrator_or_default(&self) -> IntegratorConfig {
        self.integrator.unwrap_or_default()
    }

    pub fn escape_or_default(&self) -> EscapeConfig {
        self.escape.unwrap_or_default()
    }

    pub fn reference_or_default(&self) -> ReferenceConfig {
        self.reference.unwrap_or_default()
    }

    pub fn c2_values(&self) -> &[f64] {
        self.sweep.as_ref().map_or(&[], |s| s.c2_values.as_slice())
    }
}
