//! Parallel evolution of particle ensembles into checkpointed patterns.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{ChaosLabel, EscapeConfig, EscapeTracker, Label, Method};
use crate::error::{IntegrateError, PatternError};
use crate::integrate::{integrate_until, IntegratorConfig};
use crate::params::WaveParams;
use crate::pattern::{GridGeometry, PatternGrid};
use crate::wave::PhasePoint;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    pub integrator: IntegratorConfig,
    /// Ascending times at which cumulative patterns are reported. The final
    /// time `integrator.t_final` is always included.
    pub checkpoints: Vec<f64>,
    /// Times at which particle positions are recorded.
    pub snapshots: Vec<f64>,
    /// Also label every trajectory with the escape-box test (without stopping early).
    pub escape: Option<EscapeConfig>,
    pub geometry: GridGeometry,
}

impl EnsembleOptions {
    pub fn new(integrator: IntegratorConfig) -> Self {
        Self {
            integrator,
            checkpoints: Vec::new(),
            snapshots: Vec::new(),
            escape: None,
            geometry: GridGeometry::default(),
        }
    }

    /// Checkpoint times including `t_final`, sorted and deduplicated.
    pub fn checkpoint_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .checkpoints
            .iter()
            .copied()
            .filter(|&c| c < self.integrator.t_final)
            .collect();
        t.push(self.integrator.t_final);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub singular_stages: u64,
    pub guarded_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Cumulative pattern of completed trajectories from the start up to each checkpoint.
    pub checkpoints: Vec<(f64, PatternGrid)>,
    /// Positions at each snapshot time, one entry per particle (`None` if aborted before it).
    pub snapshots: Vec<(f64, Vec<Option<PhasePoint>>)>,
    pub escape_labels: Option<Vec<ChaosLabel>>,
    pub n_completed: usize,
    /// Particles whose integration aborted; they are left out of every pattern.
    pub aborted: Vec<(usize, IntegrateError)>,
    pub stats: EnsembleStats,
}

impl EnsembleResult {
    pub fn final_pattern(&self) -> &PatternGrid {
        &self.checkpoints.last().expect("at least one checkpoint").1
    }

    pub fn snapshot(&self, t: f64) -> Option<&[Option<PhasePoint>]> {
        self.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() < 1e-9)
            .map(|(_, v)| v.as_slice())
    }
}

struct Partial {
    /// Counts per checkpoint interval; summed into cumulative patterns at the end.
    intervals: Vec<PatternGrid>,
    stats: EnsembleStats,
}

struct Single {
    index: usize,
    snapshots: Vec<Option<PhasePoint>>,
    label: Option<ChaosLabel>,
    abort: Option<IntegrateError>,
}

fn sample_index(t: f64, t0: f64, dt: f64) -> u64 {
    ((t - t0) / dt).round().max(0.0) as u64
}

/// Evolve every start point and accumulate patterns.
///
/// Counts are integers, so the result does not depend on how the work is
/// split across threads.
pub fn run_ensemble(
    params: &WaveParams,
    starts: &[PhasePoint],
    opts: &EnsembleOptions,
) -> Result<EnsembleResult, IntegrateError> {
    opts.integrator.validate()?;
    let cps = opts.checkpoint_times();
    let dt = opts.integrator.sample_dt;
    let t0 = starts.first().map_or(0.0, |p| p.t);
    if starts.iter().any(|p| p.t != t0) {
        return Err(IntegrateError::Config("all start points must share one time".into()));
    }
    let cp_index: Vec<u64> = cps.iter().map(|&t| sample_index(t, t0, dt)).collect();
    let snap_index: Vec<u64> = opts.snapshots.iter().map(|&t| sample_index(t, t0, dt)).collect();
    let blank = || Partial {
        intervals: vec![PatternGrid::with_geometry(opts.geometry, dt); cps.len()],
        stats: EnsembleStats::default(),
    };

    let (partial, singles) = starts
        .par_iter()
        .enumerate()
        .map(|(index, start)| -> Result<_, IntegrateError> {
            let mut cells: Vec<u32> = Vec::new();
            let mut interval_end: Vec<usize> = Vec::with_capacity(cps.len());
            let mut overflow = vec![0u64; cps.len()];
            let mut snapshots = vec![None; snap_index.len()];
            let mut tracker = opts.escape.map(|e| EscapeTracker::new(params, start, e.margin));
            let mut n = 0u64;
            let summary = integrate_until(params, *start, &opts.integrator, |p| {
                while interval_end.len() < cps.len() && n > cp_index[interval_end.len()] {
                    interval_end.push(cells.len());
                }
                match opts.geometry.cell_index(p.x, p.y) {
                    Some(c) => cells.push(c as u32),
                    None => {
                        if interval_end.len() < cps.len() {
                            overflow[interval_end.len()] += 1;
                        }
                    }
                }
                for (slot, &k) in snapshots.iter_mut().zip(&snap_index) {
                    if k == n {
                        *slot = Some(p);
                    }
                }
                if let Some(tr) = tracker.as_mut() {
                    let _ = tr.observe(&p);
                }
                n += 1;
                ControlFlow::Continue(())
            })?;
            while interval_end.len() < cps.len() {
                interval_end.push(cells.len());
            }
            let label = tracker.map(|tr| ChaosLabel {
                label: if tr.escape_time.is_some() {
                    Label::Chaotic
                } else if summary.abort.is_some() {
                    Label::Undetermined
                } else {
                    Label::Ordered
                },
                method: Method::EscapeBox,
                chi_final: None,
                escape_time: tr.escape_time,
            });
            let stats = EnsembleStats {
                accepted_steps: summary.stats.accepted_steps,
                rejected_steps: summary.stats.rejected_steps,
                singular_stages: summary.stats.singular_stages,
                guarded_steps: summary.stats.guarded_steps,
            };
            let committed = summary.abort.is_none().then_some((cells, interval_end, overflow));
            Ok((
                committed,
                stats,
                Single {
                    index,
                    snapshots,
                    label,
                    abort: summary.abort,
                },
            ))
        })
        .try_fold(
            || (blank(), Vec::new()),
            |(mut acc, mut singles), item| {
                let (committed, stats, single) = item?;
                acc.stats.accepted_steps += stats.accepted_steps;
                acc.stats.rejected_steps += stats.rejected_steps;
                acc.stats.singular_stages += stats.singular_stages;
                acc.stats.guarded_steps += stats.guarded_steps;
                if let Some((cells, ends, overflow)) = committed {
                    let mut from = 0;
                    for (k, &to) in ends.iter().enumerate() {
                        let g = &mut acc.intervals[k];
                        for &c in &cells[from..to] {
                            g.counts[c as usize] += 1;
                        }
                        g.overflow += overflow[k];
                        from = to;
                    }
                    // The trajectory counts towards every cumulative pattern.
                    acc.intervals[0].n_trajectories += 1;
                }
                singles.push(single);
                Ok((acc, singles))
            },
        )
        .try_reduce(
            || (blank(), Vec::new()),
            |(mut a, mut sa), (b, sb)| {
                for (x, y) in a.intervals.iter_mut().zip(&b.intervals) {
                    merge_counts(x, y);
                }
                a.stats.accepted_steps += b.stats.accepted_steps;
                a.stats.rejected_steps += b.stats.rejected_steps;
                a.stats.singular_stages += b.stats.singular_stages;
                a.stats.guarded_steps += b.stats.guarded_steps;
                sa.extend(sb);
                Ok((a, sa))
            },
        )?;

    let mut singles = singles;
    singles.sort_by_key(|s| s.index);
    let n_trajectories = partial.intervals[0].n_trajectories;
    let mut checkpoints = Vec::with_capacity(cps.len());
    let mut running = PatternGrid::with_geometry(opts.geometry, dt);
    for (k, interval) in partial.intervals.iter().enumerate() {
        merge_counts(&mut running, interval);
        let mut g = running.clone();
        g.n_trajectories = n_trajectories;
        g.t_range = (t0, cps[k]);
        checkpoints.push((cps[k], g));
    }
    let snapshots = opts
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, singles.iter().map(|s| s.snapshots[k]).collect()))
        .collect();
    let escape_labels = opts
        .escape
        .map(|_| singles.iter().map(|s| s.label.expect("tracker present")).collect());
    let aborted: Vec<(usize, IntegrateError)> = singles
        .iter()
        .filter_map(|s| s.abort.clone().map(|e| (s.index, e)))
        .collect();
    Ok(EnsembleResult {
        checkpoints,
        snapshots,
        escape_labels,
        n_completed: starts.len() - aborted.len(),
        aborted,
        stats: partial.stats,
    })
}

fn merge_counts(into: &mut PatternGrid, from: &PatternGrid) {
    for (a, b) in into.counts.iter_mut().zip(&from.counts) {
        *a += b;
    }
    into.overflow += from.overflow;
    into.n_trajectories += from.n_trajectories;
}

/// Cumulative patterns of one long trajectory at the given checkpoints,
/// streamed without storing samples.
pub fn trajectory_patterns(
    params: &WaveParams,
    start: PhasePoint,
    integrator: &IntegratorConfig,
    checkpoints: &[f64],
    geometry: GridGeometry,
) -> Result<(Vec<(f64, PatternGrid)>, Option<IntegrateError>), PatternError> {
    let mut opts = EnsembleOptions::new(*integrator);
    opts.checkpoints = checkpoints.to_vec();
    let cps = opts.checkpoint_times();
    let cp_index: Vec<u64> = cps
        .iter()
        .map(|&t| sample_index(t, start.t, integrator.sample_dt))
        .collect();
    let mut grid = PatternGrid::with_geometry(geometry, integrator.sample_dt);
    grid.n_trajectories = 1;
    grid.t_range = (start.t, start.t);
    let mut out = Vec::with_capacity(cps.len());
    let mut n = 0u64;
    let summary = integrate_until(params, start, integrator, |p| {
        while out.len() < cps.len() && n > cp_index[out.len()] {
            let mut g = grid.clone();
            g.t_range.1 = cps[out.len()];
            out.push((cps[out.len()], g));
        }
        grid.add_point(p.x, p.y);
        n += 1;
        ControlFlow::Continue(())
    })
    .map_err(|e| PatternError::Decode(e.to_string()))?;
    while out.len() < cps.len() {
        let mut g = grid.clone();
        g.t_range.1 = cps[out.len()];
        out.push((cps[out.len()], g));
    }
    Ok((out, summary.abort))
}
