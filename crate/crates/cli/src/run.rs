//! Experiment execution and the run manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bohm_core::chaos::{
    classify_lcn, escape_label, escape_labels, proportion_report, ChaosLabel, Label,
};
use bohm_core::ensemble::{run_ensemble, trajectory_patterns, EnsembleOptions, EnsembleResult};
use bohm_core::integrate::IntegratorConfig;
use bohm_core::nodes::{
    collision_epochs, find_x_point, lattice_frame, min_origin_distance, nodes_at,
    spacing_local_minima, DEFAULT_K_RANGE,
};
use bohm_core::pattern::{
    distance_curve, frobenius_distance, successive_distances, write_dump, GridGeometry,
    Normalization, PatternGrid,
};
use bohm_core::render::render;
use bohm_core::sampler::{
    sample_born, sample_custom_filtered, BlobTag, EnsembleKind, EnsembleSpec, ParticleSet,
    Selection,
};
use bohm_core::wave::{blob_centers, PhasePoint};
use bohm_core::WaveParams;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, ParamsConfig};
use crate::validate::{has_errors, validate, Diagnostic};

pub const MANIFEST_NAME: &str = "manifest.json";
/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "BOHM_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config")]
    Invalid(Vec<Diagnostic>),
    #[error("{0}")]
    Runtime(String),
}

fn rt<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Runtime(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub kind: String,
    pub description: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub description: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub aborted_trajectories: usize,
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

/// Collects artifacts while an experiment runs.
struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    seeds: Vec<u64>,
    aborted: usize,
    summary: serde_json::Map<String, Value>,
}

fn fmt_t(t: f64) -> String {
    let s = format!("{t}");
    s.replace('.', "p").replace('-', "m")
}

impl Ctx<'_> {
    fn header(&self, extra: &[String]) -> String {
        let kind = self.cfg.experiment;
        let mut s = format!(
            "# experiment: {} ({})\n# bohm-cli {}\n# seed: {}\n",
            kind.name(),
            kind.describe(),
            env!("CARGO_PKG_VERSION"),
            self.cfg.seed
        );
        for line in extra {
            s.push_str(&format!("# {line}\n"));
        }
        s
    }

    fn record(&mut self, path: &str, kind: &str, description: impl Into<String>) {
        self.artifacts.push(Artifact {
            path: path.to_string(),
            kind: kind.to_string(),
            description: description.into(),
        });
    }

    fn csv(
        &mut self,
        name: &str,
        description: &str,
        notes: &[String],
        columns: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), RunError> {
        let mut out = BufWriter::new(fs::File::create(self.dir.join(name)).map_err(rt)?);
        let mut notes = notes.to_vec();
        notes.insert(0, description.to_string());
        out.write_all(self.header(&notes).as_bytes()).map_err(rt)?;
        writeln!(out, "{}", columns.join(",")).map_err(rt)?;
        for r in rows {
            writeln!(out, "{}", r.join(",")).map_err(rt)?;
        }
        out.flush().map_err(rt)?;
        self.record(name, "csv", description);
        Ok(())
    }

    fn pattern(&mut self, name: &str, grid: &PatternGrid, description: &str) -> Result<(), RunError> {
        let note = format!("{}: {}", self.cfg.experiment.name(), description);
        let mut out = BufWriter::new(fs::File::create(self.dir.join(name)).map_err(rt)?);
        write_dump(grid, Some(&note), &mut out).map_err(rt)?;
        out.flush().map_err(rt)?;
        self.record(name, "pattern", description);
        Ok(())
    }

    fn image(&mut self, name: &str, grid: &PatternGrid, description: &str) -> Result<(), RunError> {
        let opts = self.cfg.render.unwrap_or_default();
        let note = format!("{}: {}", self.cfg.experiment.name(), description);
        render(grid, &self.dir.join(name), &opts, Some(&note)).map_err(rt)?;
        self.record(name, "png", description);
        self.record(&format!("{name}.txt"), "text", format!("axes for {name}"));
        Ok(())
    }

    fn note(&mut self, key: &str, v: impl Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(v).expect("summary value"));
    }

    fn params(&self) -> WaveParams {
        self.cfg.params.expect("validated").resolve()
    }

    fn params_cfg(&self) -> ParamsConfig {
        self.cfg
            .params
            .unwrap_or_else(|| ParamsConfig::with_c2(bohm_core::params::MAX_ENTANGLED_C2))
    }

    fn ensemble_options(&self) -> EnsembleOptions {
        let mut o = EnsembleOptions::new(self.cfg.integrator_or_default());
        o.checkpoints = self.cfg.checkpoints.clone();
        o
    }

    fn evolve(
        &mut self,
        params: &WaveParams,
        set: &ParticleSet,
        opts: &EnsembleOptions,
    ) -> Result<EnsembleResult, RunError> {
        let res = run_ensemble(params, &set.points, opts).map_err(rt)?;
        self.aborted += res.aborted.len();
        Ok(res)
    }

    /// Sample an ensemble; filtered custom centers use escape labels.
    fn sample(&mut self, params: &WaveParams, spec: &EnsembleSpec) -> Result<ParticleSet, RunError> {
        self.seeds.push(spec.seed);
        if spec.kind == EnsembleKind::Born {
            return Ok(sample_born(params, spec.n_particles, spec.seed));
        }
        let icfg = self.cfg.integrator_or_default();
        let esc = self.cfg.escape_or_default();
        let keep = |sel: Selection, p: &PhasePoint| {
            let want = match sel {
                Selection::Any => return true,
                Selection::Ordered => Label::Ordered,
                Selection::Chaotic => Label::Chaotic,
            };
            escape_label(params, *p, &icfg, &esc).is_ok_and(|l| l.label == want)
        };
        sample_custom_filtered(params, spec, keep, 1000).map_err(rt)
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

fn label_name(l: Label) -> &'static str {
    match l {
        Label::Ordered => "ordered",
        Label::Chaotic => "chaotic",
        Label::Undetermined => "undetermined",
    }
}

fn born_evolution(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.params();
    let spec = ctx.cfg.ensemble.as_ref().expect("validated").spec(ctx.cfg.seed);
    let set = ctx.sample(&params, &spec)?;
    let mut opts = ctx.ensemble_options();
    opts.snapshots = ctx.cfg.snapshots.clone();
    let res = ctx.evolve(&params, &set, &opts)?;
    for (t, pts) in &res.snapshots {
        let rows = pts.iter().enumerate().filter_map(|(i, p)| {
            p.map(|p| vec![i.to_string(), f(p.x), f(p.y), set.tags[i].to_string()])
        });
        ctx.csv(
            &format!("snapshot_t{}.csv", fmt_t(*t)),
            &format!("particle positions at t = {t}"),
            &[],
            &["index", "x", "y", "initial_blob"],
            rows.collect::<Vec<_>>(),
        )?;
    }
    for (t, g) in &res.checkpoints {
        ctx.pattern(&format!("pattern_t{}.bin", fmt_t(*t)), g, &format!("cumulative pattern up to t = {t}"))?;
    }
    ctx.image("pattern_final.png", res.final_pattern(), "final cumulative pattern")?;
    ctx.note("n_particles", set.len());
    ctx.note("n_completed", res.n_completed);
    ctx.note("initial_blob_fractions", set.blob_fractions());
    Ok(())
}

fn sweep_or_params(ctx: &Ctx) -> Vec<f64> {
    let v = ctx.cfg.c2_values();
    if v.is_empty() {
        vec![ctx.params_cfg().c2]
    } else {
        v.to_vec()
    }
}

fn born_self_distance(ctx: &mut Ctx) -> Result<(), RunError> {
    let ens = ctx.cfg.ensemble.clone().expect("validated");
    let norm = ctx.cfg.normalization;
    let mut table = Vec::new();
    for (k, c2) in sweep_or_params(ctx).into_iter().enumerate() {
        let params = ctx.params_cfg().at_c2(c2);
        let seed = ctx.cfg.seed + k as u64;
        let set = ctx.sample(&params, &EnsembleSpec { kind: EnsembleKind::Born, ..ens.spec(seed) })?;
        let opts = ctx.ensemble_options();
        let res = ctx.evolve(&params, &set, &opts)?;
        let succ = successive_distances(&res.checkpoints, norm).map_err(rt)?;
        let pair = match ctx.cfg.reference {
            Some(r) => {
                let other = ctx.sample(&params, &EnsembleSpec { seed: seed + r.seed_offset, ..set_spec(&ens, seed) })?;
                let res2 = ctx.evolve(&params, &other, &opts)?;
                Some(distance_curve(&res.checkpoints, &res2.checkpoints, norm).map_err(rt)?)
            }
            None => None,
        };
        let rows: Vec<Vec<String>> = succ
            .iter()
            .map(|(t, d)| {
                let p = pair
                    .as_ref()
                    .and_then(|c| c.iter().find(|(s, _)| s == t))
                    .map(|x| f(x.1))
                    .unwrap_or_default();
                vec![f(*t), f(*d), p]
            })
            .collect();
        ctx.csv(
            &format!("self_distance_c2_{}.csv", fmt_t(c2)),
            &format!("distance between the cumulative pattern at t and at the previous checkpoint, c2 = {c2}"),
            &[format!("normalization: {norm:?}")],
            &["t", "D_successive", "D_independent_pair"],
            rows,
        )?;
        ctx.pattern(&format!("pattern_c2_{}.bin", fmt_t(c2)), res.final_pattern(), &format!("final Born pattern, c2 = {c2}"))?;
        table.push(json!({ "c2": c2, "successive": succ, "pair": pair }));
    }
    ctx.note("curves", table);
    Ok(())
}

fn set_spec(ens: &crate::config::EnsembleConfig, seed: u64) -> EnsembleSpec {
    EnsembleSpec {
        kind: EnsembleKind::Born,
        ..ens.spec(seed)
    }
}

fn cross_c2(ctx: &mut Ctx) -> Result<(), RunError> {
    let ens = ctx.cfg.ensemble.clone().expect("validated");
    let reference = ctx.cfg.reference_or_default();
    let opts = ctx.ensemble_options();
    let mut values = ctx.cfg.c2_values().to_vec();
    if !values.iter().any(|&c| c == reference.c2) {
        values.push(reference.c2);
    }
    let mut results = Vec::new();
    for (k, &c2) in values.iter().enumerate() {
        let params = ctx.params_cfg().at_c2(c2);
        let set = ctx.sample(&params, &set_spec(&ens, ctx.cfg.seed + k as u64))?;
        let res = ctx.evolve(&params, &set, &opts)?;
        ctx.pattern(&format!("pattern_c2_{}.bin", fmt_t(c2)), res.final_pattern(), &format!("final Born pattern, c2 = {c2}"))?;
        ctx.image(&format!("pattern_c2_{}.png", fmt_t(c2)), res.final_pattern(), &format!("final Born pattern, c2 = {c2}"))?;
        results.push((c2, res));
    }
    let ref_res = &results.iter().find(|(c, _)| *c == reference.c2).expect("reference present").1;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for (c2, res) in &results {
        let d_f = frobenius_distance(res.final_pattern(), ref_res.final_pattern(), Normalization::UnitFrobenius).map_err(rt)?.value;
        let d_m = frobenius_distance(res.final_pattern(), ref_res.final_pattern(), Normalization::UnitMass).map_err(rt)?.value;
        rows.push(vec![f(*c2), f(d_f), f(d_m)]);
        table.push(json!({ "c2": c2, "D_F_unit_frobenius": d_f, "D_F_unit_mass": d_m }));
    }
    ctx.csv(
        "final_distances.csv",
        &format!("final distance of each Born pattern to the c2 = {} Born pattern", reference.c2),
        &[],
        &["c2", "D_F_unit_frobenius", "D_F_unit_mass"],
        rows,
    )?;
    ctx.note("final_distances", table);
    Ok(())
}

fn ergodicity(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.params();
    let icfg = ctx.cfg.integrator_or_default();
    let norm = ctx.cfg.normalization;
    let mut series = Vec::new();
    for (k, s) in ctx.cfg.starts.iter().enumerate() {
        let start = PhasePoint::new(s[0], s[1], 0.0);
        let (cps, abort) = trajectory_patterns(&params, start, &icfg, &ctx.cfg.checkpoints, GridGeometry::default()).map_err(rt)?;
        if abort.is_some() {
            ctx.aborted += 1;
        }
        let last = &cps.last().expect("t_final checkpoint").1;
        ctx.pattern(&format!("trajectory_{k}.bin"), last, &format!("pattern of the trajectory from ({}, {})", s[0], s[1]))?;
        ctx.image(&format!("trajectory_{k}.png"), last, &format!("pattern of the trajectory from ({}, {})", s[0], s[1]))?;
        series.push(cps);
    }
    let mut curves = Vec::new();
    for k in 1..series.len() {
        let curve = distance_curve(&series[0], &series[k], norm).map_err(rt)?;
        ctx.csv(
            &format!("mutual_distance_0_{k}.csv"),
            &format!("distance between the patterns of trajectories 0 and {k}"),
            &[format!("normalization: {norm:?}")],
            &["t", "D"],
            curve.iter().map(|(t, d)| vec![f(*t), f(*d)]).collect::<Vec<_>>(),
        )?;
        curves.push(curve);
    }
    ctx.note("mutual_distances", curves);
    Ok(())
}

fn b_curve(ctx: &mut Ctx) -> Result<(), RunError> {
    let ens = ctx.cfg.ensemble.clone().expect("validated");
    let icfg = ctx.cfg.integrator_or_default();
    let esc = ctx.cfg.escape_or_default();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (k, &c2) in ctx.cfg.c2_values().to_vec().iter().enumerate() {
        let params = ctx.params_cfg().at_c2(c2);
        let seed = ctx.cfg.seed + k as u64;
        let set = ctx.sample(&params, &set_spec(&ens, seed))?;
        let main: Vec<PhasePoint> = set
            .points
            .iter()
            .zip(&set.tags)
            .filter(|(_, t)| **t == BlobTag::Main)
            .map(|(p, _)| *p)
            .collect();
        let labels = escape_labels(&params, &main, &icfg, &esc).map_err(rt)?;
        let r = proportion_report(&labels.iter().map(|l| (BlobTag::Main, l.label)).collect::<Vec<_>>());
        rows.push(vec![f(c2), f(r.b), r.n_main.to_string(), r.n_undetermined.to_string()]);
        points.push(json!({ "c2": c2, "b": r.b, "n_main": r.n_main, "n_undetermined": r.n_undetermined }));
    }
    ctx.csv(
        "b_curve.csv",
        "chaotic fraction of main-blob particles (escape-box labels)",
        &[format!("escape margin: {}, horizon: {}", esc.margin, esc.horizon)],
        &["c2", "b", "n_main", "n_undetermined"],
        rows,
    )?;
    ctx.note("b_curve", points);
    Ok(())
}

fn proportion_law(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.params();
    let spec = ctx.cfg.ensemble.as_ref().expect("validated").spec(ctx.cfg.seed);
    let set = ctx.sample(&params, &spec)?;
    let icfg = ctx.cfg.integrator_or_default();
    let esc = ctx.cfg.escape_or_default();
    let labels = escape_labels(&params, &set.points, &icfg, &esc).map_err(rt)?;
    let report = proportion_report(&set.tags.iter().copied().zip(labels.iter().map(|l| l.label)).collect::<Vec<_>>());
    let lcn: Option<Vec<ChaosLabel>> = match ctx.cfg.lcn {
        Some(check) => {
            let n = check.sample.min(set.len());
            let l: Result<Vec<_>, _> = {
                use rayon::prelude::*;
                set.points[..n]
                    .par_iter()
                    .map(|p| classify_lcn(&params, *p, &icfg, &check.settings))
                    .collect()
            };
            Some(l.map_err(rt)?)
        }
        None => None,
    };
    let mut rows = Vec::new();
    let row = |i: usize, l: &ChaosLabel, method: &str| {
        let p = set.points[i];
        vec![
            i.to_string(),
            f(p.x),
            f(p.y),
            set.tags[i].to_string(),
            label_name(l.label).to_string(),
            method.to_string(),
            opt(l.chi_final),
            opt(l.escape_time),
        ]
    };
    for (i, l) in labels.iter().enumerate() {
        rows.push(row(i, l, "escape_box"));
    }
    let mut agreement = None;
    if let Some(lcn) = &lcn {
        for (i, l) in lcn.iter().enumerate() {
            rows.push(row(i, l, "lcn"));
        }
        let agree = lcn.iter().zip(&labels).filter(|(a, b)| a.label == b.label).count();
        agreement = Some(agree as f64 / lcn.len().max(1) as f64);
    }
    ctx.csv(
        "labels.csv",
        "per-particle ordered/chaotic labels",
        &[format!("escape margin: {}, horizon: {}", esc.margin, esc.horizon)],
        &["index", "x0", "y0", "blob", "label", "method", "chi_final", "escape_time"],
        rows,
    )?;
    let summary = json!({
        "b": report.b, "p1": report.p1, "p2": report.p2,
        "P_ch": report.p_ch, "P_or": report.p_or, "ratio": report.ratio,
        "n_main": report.n_main, "n_secondary": report.n_secondary,
        "n_undetermined": report.n_undetermined, "lcn_agreement": agreement,
    });
    let text = serde_json::to_string_pretty(&summary).expect("json");
    fs::write(ctx.dir.join("report.json"), text + "\n").map_err(rt)?;
    ctx.record("report.json", "json", "proportion report");
    ctx.note("report", summary);
    Ok(())
}

fn nonborn_mixture(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.params();
    let ens = ctx.cfg.ensemble.clone().expect("validated");
    let reference = ctx.cfg.reference_or_default();
    let norm = ctx.cfg.normalization;
    let opts = ctx.ensemble_options();
    let mut variants: Vec<(String, EnsembleSpec)> = Vec::new();
    let mixtures = ctx.cfg.sweep.as_ref().map(|s| s.mixtures.clone()).unwrap_or_default();
    if ens.kind == EnsembleKind::TwoBlobMixture && !mixtures.is_empty() {
        for (k, m) in mixtures.iter().enumerate() {
            let spec = EnsembleSpec { p1: Some(m[0]), p2: Some(m[1]), ..ens.spec(ctx.cfg.seed + k as u64) };
            variants.push((format!("p1_{}", fmt_t(m[0])), spec));
        }
    } else {
        variants.push(("initial".to_string(), ens.spec(ctx.cfg.seed)));
    }
    let n = ens.n_particles;
    let born = ctx.sample(&params, &EnsembleSpec::born(n, ctx.cfg.seed + reference.seed_offset))?;
    let born_res = ctx.evolve(&params, &born, &opts)?;
    ctx.pattern("pattern_born.bin", born_res.final_pattern(), "final pattern of the Born reference ensemble")?;
    ctx.image("pattern_born.png", born_res.final_pattern(), "final pattern of the Born reference ensemble")?;
    let mut table = Vec::new();
    let mut rows = Vec::new();
    for (name, spec) in variants {
        let set = ctx.sample(&params, &spec)?;
        let res = ctx.evolve(&params, &set, &opts)?;
        let curve = distance_curve(&res.checkpoints, &born_res.checkpoints, norm).map_err(rt)?;
        ctx.csv(
            &format!("distance_{name}.csv"),
            &format!("distance to the Born pattern over time, variant {name}"),
            &[format!("normalization: {norm:?}")],
            &["t", "D"],
            curve.iter().map(|(t, d)| vec![f(*t), f(*d)]).collect::<Vec<_>>(),
        )?;
        ctx.pattern(&format!("pattern_{name}.bin"), res.final_pattern(), &format!("final pattern, variant {name}"))?;
        ctx.image(&format!("pattern_{name}.png"), res.final_pattern(), &format!("final pattern, variant {name}"))?;
        let d_f = curve.last().map(|x| x.1).unwrap_or(f64::NAN);
        let (p1, p2) = set.blob_fractions();
        rows.push(vec![name.clone(), f(p1), f(p2), set.len().to_string(), f(d_f)]);
        table.push(json!({ "variant": name, "p1": p1, "p2": p2, "D_F": d_f }));
    }
    ctx.csv(
        "final_distances.csv",
        "final distance of each initial ensemble to the Born pattern",
        &[format!("normalization: {norm:?}")],
        &["variant", "p1", "p2", "n", "D_F"],
        rows,
    )?;
    ctx.note("final_distances", table);
    Ok(())
}

fn collision_snapshots(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.params();
    let spec = ctx.cfg.ensemble.as_ref().expect("validated").spec(ctx.cfg.seed);
    let set = ctx.sample(&params, &spec)?;
    let t_max = ctx.cfg.snapshots.iter().copied().fold(0.0, f64::max);
    let threshold = ctx.cfg.nodes.as_ref().map_or(bohm_core::nodes::DEFAULT_COLLISION_THRESHOLD, |n| n.collision_threshold);
    let horizon = ctx.cfg.integrator.map_or(t_max, |i| i.t_final.max(t_max));
    let epochs = collision_epochs(&params, horizon, threshold);
    ctx.csv(
        "collision_epochs.csv",
        "intervals where the blob overlap envelope exceeds the threshold",
        &[format!("threshold: {threshold}")],
        &["start", "end", "peak_time", "peak_envelope"],
        epochs.iter().map(|e| vec![f(e.start), f(e.end), f(e.peak_time), f(e.peak_envelope)]).collect::<Vec<_>>(),
    )?;
    let mut opts = EnsembleOptions::new(IntegratorConfig {
        t_final: t_max,
        ..ctx.cfg.integrator_or_default()
    });
    opts.snapshots = ctx.cfg.snapshots.clone();
    let res = ctx.evolve(&params, &set, &opts)?;
    let mut exchange = Vec::new();
    for (t, pts) in &res.snapshots {
        let (main, sec) = blob_centers(&params, *t);
        let mut near_main = 0;
        let mut near_sec = 0;
        let mut switched = 0;
        let mut rows = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            let Some(p) = p else { continue };
            let is_main = (p.x - main.x).hypot(p.y - main.y) <= (p.x - sec.x).hypot(p.y - sec.y);
            let side = if is_main { BlobTag::Main } else { BlobTag::Secondary };
            if is_main { near_main += 1 } else { near_sec += 1 }
            if matches!(set.tags[i], BlobTag::Main | BlobTag::Secondary) && side != set.tags[i] {
                switched += 1;
            }
            rows.push(vec![i.to_string(), f(p.x), f(p.y), set.tags[i].to_string(), side.to_string()]);
        }
        ctx.csv(
            &format!("snapshot_t{}.csv", fmt_t(*t)),
            &format!("particle positions at t = {t}"),
            &[],
            &["index", "x", "y", "initial_blob", "nearest_blob"],
            rows,
        )?;
        exchange.push(vec![f(*t), near_main.to_string(), near_sec.to_string(), switched.to_string()]);
    }
    ctx.csv(
        "exchange.csv",
        "particles nearest to each blob center and particles that changed blob",
        &[],
        &["t", "near_main", "near_secondary", "switched"],
        exchange,
    )?;
    ctx.note("collision_epochs", epochs.iter().map(|e| json!({"peak_time": e.peak_time, "peak_envelope": e.peak_envelope})).collect::<Vec<_>>());
    Ok(())
}

fn node_geometry(ctx: &mut Ctx) -> Result<(), RunError> {
    let params = ctx.params();
    let n = ctx.cfg.nodes.clone().expect("validated");
    let steps = ((n.t_end - n.t_start) / n.dt).round() as usize;
    let d_min = min_origin_distance(&params).map_err(rt)?;
    let mut rows = Vec::new();
    for i in 0..=steps {
        let t = n.t_start + i as f64 * n.dt;
        let fr = lattice_frame(&params, t).map_err(rt)?;
        rows.push(vec![
            f(t),
            if fr.valid { f(fr.spacing) } else { "inf".into() },
            f(fr.origin_distance),
            f(fr.inclination),
            f(bohm_core::nodes::collision_envelope(&params, t)),
            f(bohm_core::wave::origin_distance(&params, t)),
        ]);
    }
    ctx.csv(
        "lattice.csv",
        "node spacing, distance of the line of nodes from the origin, its slope, the collision envelope and the blob-top distance",
        &[format!("lower bound of the line distance: {d_min}")],
        &["t", "spacing", "d_no", "inclination", "collision_envelope", "blob_top_distance"],
        rows,
    )?;
    let mut node_rows = Vec::new();
    for &t in &n.node_times {
        let Ok(nodes) = nodes_at(&params, t, DEFAULT_K_RANGE) else { continue };
        for node in nodes.iter().filter(|x| x.in_window) {
            let xp = find_x_point(&params, node).ok();
            node_rows.push(vec![
                f(t),
                node.k.to_string(),
                f(node.position.x),
                f(node.position.y),
                opt(xp.map(|x| x.position.x)),
                opt(xp.map(|x| x.position.y)),
                opt(xp.map(|x| x.eigenvalues[0])),
                opt(xp.map(|x| x.eigenvalues[1])),
            ]);
        }
    }
    if !n.node_times.is_empty() {
        ctx.csv(
            "nodes.csv",
            "nodal points inside the window with their X-points",
            &[],
            &["t", "k", "x", "y", "xpoint_x", "xpoint_y", "eig_min", "eig_max"],
            node_rows,
        )?;
    }
    let minima = spacing_local_minima(&params, n.t_start, n.t_end);
    let epochs = collision_epochs(&params, n.t_end, n.collision_threshold);
    ctx.note("d_min", d_min);
    ctx.note("spacing_minima", minima);
    ctx.note("collision_peaks", epochs.iter().map(|e| json!({"t": e.peak_time, "envelope": e.peak_envelope})).collect::<Vec<_>>());
    Ok(())
}

/// Worker count: `BOHM_WORKERS`, then the config, then available parallelism.
pub fn worker_count(cfg: &ExperimentConfig) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Validate, execute and write the manifest. On a runtime failure the
/// manifest is still written, flagged partial, and the error returned.
pub fn run(cfg: &ExperimentConfig) -> Result<Manifest, RunError> {
    let diags = validate(cfg);
    if has_errors(&diags) {
        return Err(RunError::Invalid(diags));
    }
    fs::create_dir_all(&cfg.output_dir).map_err(rt)?;
    let workers = worker_count(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(rt)?;
    let started = Instant::now();
    let mut ctx = Ctx {
        cfg,
        dir: cfg.output_dir.clone(),
        artifacts: Vec::new(),
        seeds: Vec::new(),
        aborted: 0,
        summary: serde_json::Map::new(),
    };
    let result = pool.install(|| match cfg.experiment {
        ExperimentKind::BornEvolution => born_evolution(&mut ctx),
        ExperimentKind::BornSelfDistance => born_self_distance(&mut ctx),
        ExperimentKind::CrossC2Finalpattern => cross_c2(&mut ctx),
        ExperimentKind::SingleChaoticErgodicity => ergodicity(&mut ctx),
        ExperimentKind::BCurve => b_curve(&mut ctx),
        ExperimentKind::ProportionLaw => proportion_law(&mut ctx),
        ExperimentKind::NonbornMixture => nonborn_mixture(&mut ctx),
        ExperimentKind::CollisionSnapshots => collision_snapshots(&mut ctx),
        ExperimentKind::NodeGeometry => node_geometry(&mut ctx),
    });
    let manifest = Manifest {
        tool: "bohm-cli".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment,
        description: cfg.experiment.describe().into(),
        config: cfg.clone(),
        seeds: ctx.seeds.clone(),
        workers,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        aborted_trajectories: ctx.aborted,
        partial: result.is_err(),
        error: result.as_ref().err().map(|e| e.to_string()),
        warnings: diags.iter().map(|d| d.to_string()).collect(),
        artifacts: ctx.artifacts.clone(),
        summary: Value::Object(ctx.summary.clone()),
    };
    write_manifest(&cfg.output_dir, &manifest)?;
    result.map(|_| manifest)
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(m).map_err(rt)?;
    fs::write(dir.join(MANIFEST_NAME), text + "\n").map_err(rt)
}
