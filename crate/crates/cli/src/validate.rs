//! Schema and physics checks on experiment configs.

use std::fmt;

use bohm_core::sampler::{EnsembleKind, Selection, SAMPLE_WINDOW};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub level: Level,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.level {
            Level::Error => "error",
            Level::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.level == Level::Error)
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn error(&mut self, m: impl Into<String>) {
        self.0.push(Diagnostic {
            level: Level::Error,
            message: m.into(),
        });
    }

    fn warn(&mut self, m: impl Into<String>) {
        self.0.push(Diagnostic {
            level: Level::Warning,
            message: m.into(),
        });
    }
}

/// Is `t` an integer multiple of `dt` (to rounding)?
fn divides(t: f64, dt: f64) -> bool {
    let n = (t / dt).round();
    (t - n * dt).abs() <= 1e-9 * t.abs().max(dt)
}

fn suggest(t: f64, dt: f64) -> f64 {
    (t / dt).round() * dt
}

/// Sections each experiment cannot run without.
fn required(kind: ExperimentKind) -> &'static [&'static str] {
    use ExperimentKind::*;
    match kind {
        BornEvolution => &["params", "ensemble", "integrator"],
        BornSelfDistance => &["ensemble", "integrator", "checkpoints"],
        CrossC2Finalpattern => &["ensemble", "integrator", "sweep.c2_values"],
        SingleChaoticErgodicity => &["params", "integrator", "starts", "checkpoints"],
        BCurve => &["ensemble", "sweep.c2_values"],
        ProportionLaw => &["params", "ensemble"],
        NonbornMixture => &["params", "ensemble", "integrator"],
        CollisionSnapshots => &["params", "ensemble", "snapshots"],
        NodeGeometry => &["params", "nodes"],
    }
}

fn present(cfg: &ExperimentConfig, section: &str) -> bool {
    match section {
        "params" => cfg.params.is_some(),
        "ensemble" => cfg.ensemble.is_some(),
        "integrator" => cfg.integrator.is_some(),
        "checkpoints" => !cfg.checkpoints.is_empty(),
        "snapshots" => !cfg.snapshots.is_empty(),
        "starts" => !cfg.starts.is_empty(),
        "sweep.c2_values" => !cfg.c2_values().is_empty(),
        "nodes" => cfg.nodes.is_some(),
        _ => false,
    }
}

pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut d = Collector(Vec::new());
    let kind = cfg.experiment;
    for s in required(kind) {
        if !present(cfg, s) {
            d.error(format!("{kind} needs `{s}`"));
        }
    }
    if kind == ExperimentKind::BornSelfDistance && cfg.params.is_none() && cfg.c2_values().is_empty() {
        d.error("born_self_distance needs `params` or `sweep.c2_values`");
    }

    if let Some(p) = &cfg.params {
        if let Err(e) = p.resolve().validate() {
            d.error(format!("params: {e}"));
        }
    }
    for &c2 in cfg.c2_values() {
        if !(0.0..=1.0).contains(&c2) {
            d.error(format!("sweep.c2_values: {c2} outside [0, 1]"));
        }
    }
    if let Some(s) = &cfg.sweep {
        for m in &s.mixtures {
            if m.iter().any(|p| !(0.0..=1.0).contains(p)) || (m[0] + m[1] - 1.0).abs() > 1e-9 {
                d.error(format!("sweep.mixtures: {m:?} must be fractions summing to 1"));
            }
        }
    }

    if let Some(e) = &cfg.ensemble {
        let mut spec = e.spec(cfg.seed);
        let mixtures = cfg.sweep.as_ref().map_or(&[][..], |s| s.mixtures.as_slice());
        if let (EnsembleKind::TwoBlobMixture, Some(m)) = (e.kind, mixtures.first()) {
            spec.p1 = Some(m[0]);
            spec.p2 = Some(m[1]);
        }
        if let Err(err) = spec.validate() {
            d.error(format!("ensemble: {err}"));
        }
        if e.kind == EnsembleKind::CustomBlob {
            for (i, c) in e.centers.iter().enumerate() {
                if c.x.abs() >= SAMPLE_WINDOW || c.y.abs() >= SAMPLE_WINDOW {
                    d.error(format!("ensemble.centers[{i}] lies outside the [-9, 9] window"));
                }
            }
            if e.centers.iter().any(|c| c.select != Selection::Any) {
                d.warn("filtered custom centers are labelled with the escape-box test while sampling");
            }
        }
        if kind == ExperimentKind::BCurve && e.kind != EnsembleKind::Born {
            d.error("b_curve samples Born ensembles; set ensemble.kind = \"born\"");
        }
    }

    let icfg = cfg.integrator_or_default();
    if cfg.integrator.is_some() {
        if let Err(e) = icfg.validate() {
            d.error(format!("integrator: {e}"));
        }
        if icfg.t_final <= 0.0 {
            d.error("integrator.t_final must be positive");
        }
        if !divides(icfg.t_final, icfg.sample_dt) {
            d.warn(format!(
                "t_final {} is not a multiple of sample_dt {}; use {}",
                icfg.t_final,
                icfg.sample_dt,
                suggest(icfg.t_final, icfg.sample_dt)
            ));
        }
    }
    let dt = icfg.sample_dt;
    let mut last = f64::NEG_INFINITY;
    for &t in &cfg.checkpoints {
        if t <= last {
            d.error("checkpoints must be strictly ascending");
        }
        last = t;
        if t < 0.0 || (cfg.integrator.is_some() && t > icfg.t_final) {
            d.error(format!("checkpoint {t} outside [0, t_final]"));
        }
        if dt > 0.0 && !divides(t, dt) {
            d.warn(format!(
                "checkpoint {t} is not a multiple of sample_dt {dt}; use {}",
                suggest(t, dt)
            ));
        }
    }
    for &t in &cfg.snapshots {
        if t < 0.0 || (cfg.integrator.is_some() && t > icfg.t_final) {
            d.error(format!("snapshot {t} outside [0, t_final]"));
        }
        if dt > 0.0 && !divides(t, dt) {
            d.warn(format!(
                "snapshot {t} is not a multiple of sample_dt {dt}; use {}",
                suggest(t, dt)
            ));
        }
    }
    for s in &cfg.starts {
        if s.iter().any(|v| !v.is_finite() || v.abs() >= SAMPLE_WINDOW) {
            d.error(format!("start {s:?} lies outside the [-9, 9] window"));
        }
    }
    if kind == ExperimentKind::SingleChaoticErgodicity && cfg.starts.len() < 2 {
        d.error("single_chaotic_ergodicity needs at least two starts");
    }

    let esc = cfg.escape_or_default();
    if !(esc.margin >= 0.0 && esc.margin.is_finite()) {
        d.error("escape.margin must be non-negative");
    }
    if esc.horizon < esc.min_horizon {
        d.error(format!(
            "escape.horizon {} is below escape.min_horizon {}",
            esc.horizon, esc.min_horizon
        ));
    }
    if let Some(l) = &cfg.lcn {
        if l.settings.horizon < l.settings.min_horizon {
            d.error(format!(
                "lcn horizon {} is below its minimum {}",
                l.settings.horizon, l.settings.min_horizon
            ));
        }
        if l.sample == 0 {
            d.error("lcn.sample must be positive");
        }
    }
    if let Some(n) = &cfg.nodes {
        if !(n.dt > 0.0 && n.t_end > n.t_start) {
            d.error("nodes: need dt > 0 and t_end > t_start");
        }
    }
    if cfg.workers == Some(0) {
        d.error("workers must be positive when given");
    }
    d.0
}
