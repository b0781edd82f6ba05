//! Adaptive integration of Bohmian trajectories.
//!
//! Dormand-Prince 5(4) with the standard continuous extension for dense
//! output. Samples are emitted at exact multiples of `sample_dt` from the
//! start time. Stages that land on a near-node singularity reject the step
//! and shrink it; a step that would move a particle further than a quarter of
//! the node spacing while it is within one spacing of the line of nodes is
//! capped beforehand.

use std::io::{Read, Write};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{IntegrateError, NearNodeSingularity, PatternError};
use crate::nodes::NodeLine;
use crate::params::WaveParams;
use crate::wave::{FieldFrame, PhasePoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub sample_dt: f64,
    pub t_final: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 0.05,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            sample_dt: 0.05,
            t_final: 100.0,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_final(t_final: f64) -> Self {
        Self {
            t_final,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |m: &str| Err(IntegrateError::Config(m.to_string()));
        let all = [
            self.dt_init,
            self.dt_min,
            self.dt_max,
            self.rel_tol,
            self.abs_tol,
            self.sample_dt,
            self.t_final,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all fields must be finite");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("need 0 < dt_min <= dt_init <= dt_max");
        }
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return bad("tolerances must be positive");
        }
        if self.sample_dt <= 0.0 {
            return bad("sample_dt must be positive");
        }
        Ok(())
    }

    /// Number of sample intervals between `t0` and `t_final`.
    pub fn sample_count(&self, t0: f64) -> u64 {
        ((self.t_final - t0).abs() / self.sample_dt + 1e-9).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFlags {
    pub completed: bool,
    pub aborted_near_node: bool,
    pub left_window: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    /// Rejections caused by a stage hitting the singularity floor.
    pub singular_stages: u64,
    /// Steps shortened by the near-node displacement cap.
    pub guarded_steps: u64,
    /// Smallest `|Psi|^2` seen at accepted step endpoints.
    pub min_density: f64,
}

impl Default for IntegrationStats {
    fn default() -> Self {
        Self {
            accepted_steps: 0,
            rejected_steps: 0,
            singular_stages: 0,
            guarded_steps: 0,
            min_density: f64::INFINITY,
        }
    }
}

/// Half-width of the window used to flag trajectories that wander off.
pub const WINDOW_HALF_WIDTH: f64 = 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub initial: PhasePoint,
    pub sample_dt: f64,
    pub samples: Vec<PhasePoint>,
    pub flags: TrajectoryFlags,
    pub stats: IntegrationStats,
    /// Set when the trajectory was aborted.
    pub abort: Option<IntegrateError>,
}

/// Outcome of a streaming integration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub stats: IntegrationStats,
    pub samples_emitted: u64,
    pub final_point: PhasePoint,
    pub abort: Option<IntegrateError>,
    pub stopped: bool,
}

impl RunSummary {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

/// A right-hand side the stepper can drive.
pub trait Flow<const N: usize> {
    /// Number of leading components entering the error norm.
    const ERROR_DIMS: usize = N;

    fn rhs(&self, t: f64, y: &[f64; N]) -> Result<[f64; N], NearNodeSingularity>;

    /// Largest admissible step from `(t, y)` given the slope `dy`.
    fn step_cap(&self, _t: f64, _y: &[f64; N], _dy: &[f64; N]) -> f64 {
        f64::INFINITY
    }

    /// Called after each accepted step, once samples inside it have been
    /// emitted. May rescale linear components of the state and slope.
    fn accepted(&mut self, _t: f64, _y: &mut [f64; N], _dy: &mut [f64; N]) {}
}

mod tableau {
    pub const C2: f64 = 1.0 / 5.0;
    pub const C3: f64 = 3.0 / 10.0;
    pub const C4: f64 = 4.0 / 5.0;
    pub const C5: f64 = 8.0 / 9.0;
    pub const A21: f64 = 1.0 / 5.0;
    pub const A31: f64 = 3.0 / 40.0;
    pub const A32: f64 = 9.0 / 40.0;
    pub const A41: f64 = 44.0 / 45.0;
    pub const A42: f64 = -56.0 / 15.0;
    pub const A43: f64 = 32.0 / 9.0;
    pub const A51: f64 = 19372.0 / 6561.0;
    pub const A52: f64 = -25360.0 / 2187.0;
    pub const A53: f64 = 64448.0 / 6561.0;
    pub const A54: f64 = -212.0 / 729.0;
    pub const A61: f64 = 9017.0 / 3168.0;
    pub const A62: f64 = -355.0 / 33.0;
    pub const A63: f64 = 46732.0 / 5247.0;
    pub const A64: f64 = 49.0 / 176.0;
    pub const A65: f64 = -5103.0 / 18656.0;
    pub const A71: f64 = 35.0 / 384.0;
    pub const A73: f64 = 500.0 / 1113.0;
    pub const A74: f64 = 125.0 / 192.0;
    pub const A75: f64 = -2187.0 / 6784.0;
    pub const A76: f64 = 11.0 / 84.0;
    pub const E1: f64 = 71.0 / 57600.0;
    pub const E3: f64 = -71.0 / 16695.0;
    pub const E4: f64 = 71.0 / 1920.0;
    pub const E5: f64 = -17253.0 / 339200.0;
    pub const E6: f64 = 22.0 / 525.0;
    pub const E7: f64 = -1.0 / 40.0;
    pub const D1: f64 = -12715105075.0 / 11282082432.0;
    pub const D3: f64 = 87487479700.0 / 32700410799.0;
    pub const D4: f64 = -10690763975.0 / 1880347072.0;
    pub const D5: f64 = 701980252875.0 / 199316789632.0;
    pub const D6: f64 = -1453857185.0 / 822651844.0;
    pub const D7: f64 = 69997945.0 / 29380423.0;
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const SINGULAR_SHRINK: f64 = 0.25;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Continuous extension of one accepted step.
struct Dense<const N: usize> {
    t_old: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Dense<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t_old) / self.h;
        let s1 = 1.0 - s;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.r[0][i]
                + s * (self.r[1][i] + s1 * (self.r[2][i] + s * (self.r[3][i] + s1 * self.r[4][i])));
        }
        out
    }
}

/// Result of [`drive`].
#[derive(Debug, Clone, PartialEq)]
pub struct DriveOutcome<const N: usize> {
    pub stats: IntegrationStats,
    pub samples_emitted: u64,
    pub t: f64,
    pub y: [f64; N],
    pub abort: Option<IntegrateError>,
    /// The sample callback asked to stop before `t_end`.
    pub stopped: bool,
}

/// Integrate `flow` from `(t0, y0)` to `t_end`, calling `on_sample` at
/// `t0 + n * sample_dt` (towards `t_end`) including `t0` itself. Returning
/// `Break` from the callback ends the run after the current sample.
pub fn drive<const N: usize, F: Flow<N>>(
    flow: &mut F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut on_sample: impl FnMut(&F, f64, &[f64; N]) -> ControlFlow<()>,
) -> Result<DriveOutcome<N>, IntegrateError> {
    use tableau::*;
    cfg.validate()?;
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let n_samples = ((span / cfg.sample_dt) + 1e-9).floor() as u64;
    let sample_time = |n: u64| t0 + dir * (n as f64) * cfg.sample_dt;

    let mut stats = IntegrationStats::default();
    let mut k1 = flow.rhs(t0, &y0).map_err(IntegrateError::SingularStart)?;
    let mut t = t0;
    let mut y = y0;
    let outcome = |stats, emitted, t, y, abort, stopped| {
        Ok(DriveOutcome {
            stats,
            samples_emitted: emitted,
            t,
            y,
            abort,
            stopped,
        })
    };
    if on_sample(flow, t0, &y0).is_break() {
        return outcome(stats, 1, t0, y0, None, true);
    }
    let mut next_sample = 1u64;
    let mut h = cfg.dt_init.min(cfg.dt_max) * dir;
    let mut last_rejected = false;

    let norm_dims = F::ERROR_DIMS.min(N);
    while (t_end - t) * dir > 0.0 {
        let cap = flow.step_cap(t, &y, &k1);
        let mut habs = h.abs().min(cfg.dt_max);
        if cap < habs {
            habs = cap.max(cfg.dt_min);
            stats.guarded_steps += 1;
        }
        let remaining = (t_end - t).abs();
        let last = habs >= remaining;
        if last {
            habs = remaining;
        }
        h = habs * dir;

        let stages = (|| {
            let k2 = flow.rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = flow.rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = flow.rhs(
                t + C4 * h,
                &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let k5 = flow.rhs(
                t + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = flow.rhs(
                t + h,
                &axpy(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            )?;
            let y_new = axpy(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let t_new = if last { t_end } else { t + h };
            let k7 = flow.rhs(t_new, &y_new)?;
            Ok::<_, NearNodeSingularity>((k2, k3, k4, k5, k6, k7, y_new, t_new))
        })();

        let (_k2, k3, k4, k5, k6, k7, y_new, t_new) = match stages {
            Ok(s) => s,
            Err(_) => {
                stats.singular_stages += 1;
                stats.rejected_steps += 1;
                let shrunk = habs * SINGULAR_SHRINK;
                if shrunk < cfg.dt_min {
                    let abort = IntegrateError::StepUnderflow { t, h: shrunk };
                    return outcome(stats, next_sample, t, y, Some(abort), false);
                }
                h = shrunk * dir;
                last_rejected = true;
                continue;
            }
        };

        let mut err = 0.0;
        for i in 0..norm_dims {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sk) * (e / sk);
        }
        let err = (err / norm_dims as f64).sqrt();

        if !(err <= 1.0) {
            stats.rejected_steps += 1;
            if habs <= cfg.dt_min {
                let abort = IntegrateError::StepUnderflow { t, h: habs };
                return outcome(stats, next_sample, t, y, Some(abort), false);
            }
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).max(FAC_MIN)
            } else {
                FAC_MIN
            };
            h = (habs * fac).max(cfg.dt_min) * dir;
            last_rejected = true;
            continue;
        }

        stats.accepted_steps += 1;
        let mut dense = Dense {
            t_old: t,
            h: t_new - t,
            r: [[0.0; N]; 5],
        };
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = dense.h * k1[i] - ydiff;
            dense.r[0][i] = y[i];
            dense.r[1][i] = ydiff;
            dense.r[2][i] = bspl;
            dense.r[3][i] = ydiff - dense.h * k7[i] - bspl;
            dense.r[4][i] = dense.h
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        while next_sample <= n_samples {
            let ts = sample_time(next_sample);
            if (ts - t_new) * dir > 0.0 {
                break;
            }
            let ys = if ts == t_new { y_new } else { dense.eval(ts) };
            next_sample += 1;
            if on_sample(flow, ts, &ys).is_break() {
                return outcome(stats, next_sample, ts, ys, None, true);
            }
        }

        t = t_new;
        y = y_new;
        k1 = k7;
        flow.accepted(t, &mut y, &mut k1);

        let fac = if err == 0.0 {
            FAC_MAX
        } else {
            (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
        };
        let fac = if last_rejected { fac.min(1.0) } else { fac };
        last_rejected = false;
        h = (habs * fac).clamp(cfg.dt_min, cfg.dt_max) * dir;
    }
    outcome(stats, next_sample, t, y, None, false)
}

/// The Bohmian flow `dr/dt = v(r, t)`.
pub struct BohmFlow<'a> {
    params: &'a WaveParams,
    pub min_density: f64,
}

impl<'a> BohmFlow<'a> {
    pub fn new(params: &'a WaveParams) -> Self {
        Self {
            params,
            min_density: f64::INFINITY,
        }
    }
}

fn near_node_cap(params: &WaveParams, t: f64, x: f64, y: f64, speed: f64) -> f64 {
    match NodeLine::at(params, t) {
        Some(line) if line.distance(x, y) < line.spacing && speed > 0.0 => {
            0.25 * line.spacing / speed
        }
        _ => f64::INFINITY,
    }
}

impl Flow<2> for BohmFlow<'_> {
    fn rhs(&self, t: f64, y: &[f64; 2]) -> Result<[f64; 2], NearNodeSingularity> {
        let v = FieldFrame::new(self.params, t).velocity(y[0], y[1])?;
        Ok([v.vx, v.vy])
    }

    fn step_cap(&self, t: f64, y: &[f64; 2], dy: &[f64; 2]) -> f64 {
        near_node_cap(self.params, t, y[0], y[1], dy[0].hypot(dy[1]))
    }

    fn accepted(&mut self, t: f64, y: &mut [f64; 2], _dy: &mut [f64; 2]) {
        let d = FieldFrame::new(self.params, t).density(y[0], y[1]);
        self.min_density = self.min_density.min(d);
    }
}

/// Renormalization bounds for the tangent vector.
pub const DEVIATION_MAX: f64 = 1e8;
pub const DEVIATION_MIN: f64 = 1e-8;

/// The flow together with its variational equation `dxi/dt = J xi`.
pub struct TangentFlow<'a> {
    params: &'a WaveParams,
    /// Accumulated `ln` of all renormalization factors.
    pub log_stretch: f64,
    pub initial_norm: f64,
    pub min_density: f64,
}

impl<'a> TangentFlow<'a> {
    pub fn new(params: &'a WaveParams, initial_norm: f64) -> Self {
        Self {
            params,
            log_stretch: 0.0,
            initial_norm,
            min_density: f64::INFINITY,
        }
    }

    /// `ln(|xi| / |xi0|)` including past renormalizations.
    pub fn total_log_stretch(&self, y: &[f64; 4]) -> f64 {
        self.log_stretch + (y[2].hypot(y[3]) / self.initial_norm).ln()
    }
}

impl Flow<4> for TangentFlow<'_> {
    const ERROR_DIMS: usize = 2;

    fn rhs(&self, t: f64, y: &[f64; 4]) -> Result<[f64; 4], NearNodeSingularity> {
        let (v, j) = FieldFrame::new(self.params, t).velocity_and_jacobian(y[0], y[1])?;
        Ok([
            v.vx,
            v.vy,
            j[0][0] * y[2] + j[0][1] * y[3],
            j[1][0] * y[2] + j[1][1] * y[3],
        ])
    }

    fn step_cap(&self, t: f64, y: &[f64; 4], dy: &[f64; 4]) -> f64 {
        near_node_cap(self.params, t, y[0], y[1], dy[0].hypot(dy[1]))
    }

    fn accepted(&mut self, t: f64, y: &mut [f64; 4], dy: &mut [f64; 4]) {
        let d = FieldFrame::new(self.params, t).density(y[0], y[1]);
        self.min_density = self.min_density.min(d);
        let n = y[2].hypot(y[3]);
        if n > DEVIATION_MAX || (n < DEVIATION_MIN && n > 0.0) {
            self.log_stretch += n.ln();
            for i in 2..4 {
                y[i] /= n;
                dy[i] /= n;
            }
        }
    }
}

fn outside_window(p: &PhasePoint) -> bool {
    p.x.abs() >= WINDOW_HALF_WIDTH || p.y.abs() >= WINDOW_HALF_WIDTH
}

/// Integrate and stream samples to `sink` until it breaks or `t_final` is reached.
pub fn integrate_until(
    params: &WaveParams,
    start: PhasePoint,
    cfg: &IntegratorConfig,
    mut sink: impl FnMut(PhasePoint) -> ControlFlow<()>,
) -> Result<RunSummary, IntegrateError> {
    let mut flow = BohmFlow::new(params);
    let out = drive(&mut flow, start.t, [start.x, start.y], cfg.t_final, cfg, |_, t, y| {
        sink(PhasePoint::new(y[0], y[1], t))
    })?;
    Ok(RunSummary {
        stats: IntegrationStats {
            min_density: flow.min_density,
            ..out.stats
        },
        samples_emitted: out.samples_emitted,
        final_point: PhasePoint::new(out.y[0], out.y[1], out.t),
        abort: out.abort,
        stopped: out.stopped,
    })
}

/// Integrate and stream every sample to `sink`.
pub fn integrate_with(
    params: &WaveParams,
    start: PhasePoint,
    cfg: &IntegratorConfig,
    mut sink: impl FnMut(PhasePoint),
) -> Result<RunSummary, IntegrateError> {
    integrate_until(params, start, cfg, |p| {
        sink(p);
        ControlFlow::Continue(())
    })
}

/// Integrate one trajectory from `start` to `cfg.t_final`.
///
/// Configuration errors and singular starts are errors; a step-size underflow
/// yields a partial record flagged `aborted_near_node`.
pub fn integrate(
    params: &WaveParams,
    start: PhasePoint,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord, IntegrateError> {
    let mut samples = Vec::with_capacity(cfg.sample_count(start.t) as usize + 1);
    let summary = integrate_with(params, start, cfg, |p| samples.push(p))?;
    Ok(finish_record(start, cfg, samples, summary))
}

fn finish_record(
    start: PhasePoint,
    cfg: &IntegratorConfig,
    samples: Vec<PhasePoint>,
    summary: RunSummary,
) -> TrajectoryRecord {
    let left_window = samples.iter().any(outside_window);
    TrajectoryRecord {
        initial: start,
        sample_dt: cfg.sample_dt,
        flags: TrajectoryFlags {
            completed: summary.abort.is_none(),
            aborted_near_node: summary.abort.is_some(),
            left_window,
        },
        stats: summary.stats,
        abort: summary.abort,
        samples,
    }
}

/// Finite-time Lyapunov indicator `chi(t) = ln(xi/xi0) / t` at sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationHistory {
    pub times: Vec<f64>,
    pub chi: Vec<f64>,
    /// `ln(xi/xi0)` at each time (`chi * t`).
    pub log_stretch: Vec<f64>,
}

impl DeviationHistory {
    pub fn final_chi(&self) -> Option<f64> {
        self.chi.last().copied()
    }

    /// `ln(xi/xi0)` at the last sample not later than `t`.
    pub fn log_stretch_at(&self, t: f64) -> Option<f64> {
        let idx = self.times.partition_point(|&s| s <= t);
        idx.checked_sub(1).map(|i| self.log_stretch[i])
    }
}

pub const DEFAULT_XI0: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

/// Integrate the trajectory with its tangent vector, streaming each sample
/// together with `ln(|xi| / |xi0|)` to `sink`.
pub fn deviation_until(
    params: &WaveParams,
    start: PhasePoint,
    cfg: &IntegratorConfig,
    xi0: [f64; 2],
    mut sink: impl FnMut(PhasePoint, f64) -> ControlFlow<()>,
) -> Result<RunSummary, IntegrateError> {
    let norm0 = xi0[0].hypot(xi0[1]);
    if !(norm0 > 0.0 && norm0.is_finite()) {
        return Err(IntegrateError::Config("xi0 must be a finite non-zero vector".into()));
    }
    let mut flow = TangentFlow::new(params, norm0);
    // Samples inside a step are emitted before its renormalization, so the
    // accumulator read here matches the sampled tangent vector.
    let out = drive(
        &mut flow,
        start.t,
        [start.x, start.y, xi0[0], xi0[1]],
        cfg.t_final,
        cfg,
        |f, t, y| sink(PhasePoint::new(y[0], y[1], t), f.total_log_stretch(y)),
    )?;
    Ok(RunSummary {
        stats: IntegrationStats {
            min_density: flow.min_density,
            ..out.stats
        },
        samples_emitted: out.samples_emitted,
        final_point: PhasePoint::new(out.y[0], out.y[1], out.t),
        abort: out.abort,
        stopped: out.stopped,
    })
}

/// Integrate the trajectory together with a tangent vector started at `xi0`.
pub fn integrate_with_deviation(
    params: &WaveParams,
    start: PhasePoint,
    cfg: &IntegratorConfig,
    xi0: [f64; 2],
) -> Result<(TrajectoryRecord, DeviationHistory), IntegrateError> {
    let mut samples = Vec::with_capacity(cfg.sample_count(start.t) as usize + 1);
    let mut hist = DeviationHistory {
        times: Vec::new(),
        chi: Vec::new(),
        log_stretch: Vec::new(),
    };
    let summary = deviation_until(params, start, cfg, xi0, |p, stretch| {
        samples.push(p);
        let elapsed = p.t - start.t;
        hist.times.push(p.t);
        hist.log_stretch.push(stretch);
        hist.chi.push(if elapsed != 0.0 { stretch / elapsed } else { 0.0 });
        ControlFlow::Continue(())
    })?;
    Ok((finish_record(start, cfg, samples, summary), hist))
}

const TRAJ_MAGIC: &[u8; 8] = b"BOHMTRJ1";

/// Little-endian binary dump: the 8-byte magic `BOHMTRJ1`, a `u64` sample
/// count, then `(t, x, y)` as three `f64` per sample.
pub fn write_trajectory_binary<W: Write>(samples: &[PhasePoint], mut out: W) -> std::io::Result<()> {
    out.write_all(TRAJ_MAGIC)?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for p in samples {
        for v in [p.t, p.x, p.y] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_trajectory_binary<R: Read>(mut input: R) -> Result<Vec<PhasePoint>, PatternError> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| PatternError::Decode("truncated header".into()))?;
    if &magic != TRAJ_MAGIC {
        return Err(PatternError::Decode("bad magic".into()));
    }
    let mut word = [0u8; 8];
    input
        .read_exact(&mut word)
        .map_err(|_| PatternError::Decode("truncated header".into()))?;
    let n = u64::from_le_bytes(word);
    let mut out = Vec::new();
    for _ in 0..n {
        let mut v = [0.0; 3];
        for slot in &mut v {
            input
                .read_exact(&mut word)
                .map_err(|_| PatternError::Decode("truncated body".into()))?;
            *slot = f64::from_le_bytes(word);
        }
        out.push(PhasePoint::new(v[1], v[2], v[0]));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(PatternError::Decode("trailing bytes".into()));
    }
    Ok(out)
}

pub fn write_trajectory_csv<W: Write>(samples: &[PhasePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,x,y")?;
    for p in samples {
        writeln!(out, "{},{},{}", p.t, p.x, p.y)?;
    }
    Ok(())
}
