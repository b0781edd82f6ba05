//! The moving lattice of nodal points and its X-points.
//!
//! `Psi = 0` requires `T2/T1 = -1`. Since `ln(T2/T1)` is linear in position,
//! the zeros form an infinite, evenly spaced row on the straight line
//! `Re ln(T2/T1) = 0`, one node for each `Im ln(T2/T1) = k pi` with the parity
//! of `k` fixed by the sign of `c1 c2`.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::RangeInclusive;

use crate::error::NodeError;
use crate::params::{Parity, WaveParams};
use crate::wave::{FieldFrame, PhasePoint};

/// `|sin(omega_xy t)|` below which the lattice has escaped to infinity.
pub const INFINITY_WINDOW: f64 = 1e-9;
/// Nodes farther out than this are reported but flagged out of window.
pub const NODE_WINDOW: f64 = 12.0;
pub const DEFAULT_K_RANGE: RangeInclusive<i64> = -15..=15;

const XPOINT_MAX_ITER: usize = 100;
const XPOINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalPoint {
    pub k: i64,
    pub position: PhasePoint,
    pub parity: Parity,
    pub in_window: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeLatticeFrame {
    pub t: f64,
    /// Slope `dy/dx` of the line of nodes.
    pub inclination: f64,
    /// Distance between nodes `k` and `k + 2`.
    pub spacing: f64,
    /// Distance of the line of nodes from the origin.
    pub origin_distance: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XPoint {
    pub position: PhasePoint,
    pub paired_node: i64,
    /// Eigenvalues of the velocity Jacobian, ascending.
    pub eigenvalues: [f64; 2],
}

/// Collision window of the two blobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEpoch {
    pub start: f64,
    pub end: f64,
    pub peak_time: f64,
    pub peak_envelope: f64,
}

fn log_ratio_modulus(params: &WaveParams) -> Result<f64, NodeError> {
    if params.parity() == Parity::Degenerate {
        return Err(NodeError::NoNodes);
    }
    Ok((params.c1 / params.c2).abs().ln())
}

fn alphas(params: &WaveParams) -> (f64, f64) {
    (
        2.0 * (2.0 * params.omega_x).sqrt() * params.a0,
        2.0 * (2.0 * params.omega_y).sqrt() * params.a0,
    )
}

fn check_finite_lattice(params: &WaveParams, t: f64) -> Result<f64, NodeError> {
    let s = (params.omega_xy() * t).sin();
    if s.abs() < INFINITY_WINDOW {
        return Err(NodeError::NodesAtInfinity { t });
    }
    Ok(s)
}

/// Whether `k` carries a node for this parity.
pub fn admissible_index(parity: Parity, k: i64) -> bool {
    match parity {
        Parity::Odd => k.rem_euclid(2) == 1,
        Parity::Even => k.rem_euclid(2) == 0,
        Parity::Degenerate => false,
    }
}

/// Position of node `k` at time `t`. `k` is not checked for parity.
pub fn node_position(params: &WaveParams, t: f64, k: i64) -> Result<(f64, f64), NodeError> {
    let l = log_ratio_modulus(params)?;
    let s = check_finite_lattice(params, t)?;
    let (ax, ay) = alphas(params);
    let (sx, cx) = (params.omega_x * t).sin_cos();
    let (sy, cy) = (params.omega_y * t).sin_cos();
    let kpi = k as f64 * PI;
    Ok(((kpi * cy + l * sy) / (ax * s), (kpi * cx + l * sx) / (ay * s)))
}

/// Time derivative of [`node_position`].
pub fn node_velocity(params: &WaveParams, t: f64, k: i64) -> Result<(f64, f64), NodeError> {
    let l = log_ratio_modulus(params)?;
    let s = check_finite_lattice(params, t)?;
    let (ax, ay) = alphas(params);
    let (wx, wy, wxy) = (params.omega_x, params.omega_y, params.omega_xy());
    let (sx, cx) = (wx * t).sin_cos();
    let (sy, cy) = (wy * t).sin_cos();
    let ds = wxy * (wxy * t).cos();
    let kpi = k as f64 * PI;
    let nx = kpi * cy + l * sy;
    let ny = kpi * cx + l * sx;
    let dnx = wy * (-kpi * sy + l * cy);
    let dny = wx * (-kpi * sx + l * cx);
    Ok((
        (dnx * s - nx * ds) / (ax * s * s),
        (dny * s - ny * ds) / (ay * s * s),
    ))
}

pub fn nodes_at(
    params: &WaveParams,
    t: f64,
    k_range: RangeInclusive<i64>,
) -> Result<Vec<NodalPoint>, NodeError> {
    log_ratio_modulus(params)?;
    check_finite_lattice(params, t)?;
    let parity = params.parity();
    k_range
        .filter(|&k| admissible_index(parity, k))
        .map(|k| {
            let (x, y) = node_position(params, t, k)?;
            Ok(NodalPoint {
                k,
                position: PhasePoint::new(x, y, t),
                parity,
                in_window: x.abs() <= NODE_WINDOW && y.abs() <= NODE_WINDOW,
            })
        })
        .collect()
}

/// Node spacing `pi / (a0 |sin w_xy t|) sqrt((w_x cos^2 w_x t + w_y cos^2 w_y t) / (2 w_x w_y))`.
/// Independent of the coefficients.
pub fn node_spacing(params: &WaveParams, t: f64) -> f64 {
    let (wx, wy) = (params.omega_x, params.omega_y);
    let cx = (wx * t).cos();
    let cy = (wy * t).cos();
    PI / (params.a0 * (params.omega_xy() * t).sin().abs())
        * ((wx * cx * cx + wy * cy * cy) / (2.0 * wx * wy)).sqrt()
}

/// Lower bound of the line-of-nodes distance from the origin over all times.
pub fn min_origin_distance(params: &WaveParams) -> Result<f64, NodeError> {
    let l = log_ratio_modulus(params)?;
    Ok(2f64.sqrt() * l / (4.0 * params.a0 * (params.omega_x + params.omega_y).sqrt()))
}

pub fn lattice_frame(params: &WaveParams, t: f64) -> Result<NodeLatticeFrame, NodeError> {
    let l = log_ratio_modulus(params)?;
    let (wx, wy) = (params.omega_x, params.omega_y);
    let cx = (wx * t).cos();
    let cy = (wy * t).cos();
    let valid = (params.omega_xy() * t).sin().abs() >= INFINITY_WINDOW;
    let origin_distance =
        2f64.sqrt() * l / (4.0 * params.a0 * (wx * cx * cx + wy * cy * cy).sqrt());
    Ok(NodeLatticeFrame {
        t,
        inclination: (wx / wy).sqrt() * cx / cy,
        spacing: if valid {
            node_spacing(params, t)
        } else {
            f64::INFINITY
        },
        origin_distance,
        valid,
    })
}

/// The line of nodes in implicit form, for proximity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeLine {
    normal: [f64; 2],
    offset: f64,
    pub spacing: f64,
}

impl NodeLine {
    /// `None` for product states or when the lattice is at infinity.
    pub fn at(params: &WaveParams, t: f64) -> Option<Self> {
        let l = log_ratio_modulus(params).ok()?;
        check_finite_lattice(params, t).ok()?;
        let (ax, ay) = alphas(params);
        let n = [-ax * (params.omega_x * t).cos(), ay * (params.omega_y * t).cos()];
        let len = n[0].hypot(n[1]);
        Some(Self {
            normal: [n[0] / len, n[1] / len],
            offset: l / len,
            spacing: node_spacing(params, t),
        })
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        (self.normal[0] * x + self.normal[1] * y - self.offset).abs()
    }
}

fn sym_eigenvalues(j: &[[f64; 2]; 2]) -> [f64; 2] {
    let half_tr = 0.5 * (j[0][0] + j[1][1]);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = (half_tr * half_tr - det).max(0.0).sqrt();
    [half_tr - disc, half_tr + disc]
}

/// Locate the X-point paired with `node`: the stagnation point of the flow
/// seen from the moving node, between `node` and its neighbour `k + 2`.
///
/// Damped Newton on `u = v - dn/dt`, confined to the node-centred square whose
/// side equals the node spacing.
pub fn find_x_point(params: &WaveParams, node: &NodalPoint) -> Result<XPoint, NodeError> {
    let t = node.position.t;
    let frame = lattice_frame(params, t)?;
    if !frame.valid {
        return Err(NodeError::NodesAtInfinity { t });
    }
    let (nvx, nvy) = node_velocity(params, t, node.k)?;
    let (next_x, next_y) = node_position(params, t, node.k + 2)?;
    let (x0, y0) = (node.position.x, node.position.y);
    let half_box = 0.5 * frame.spacing;
    let field = FieldFrame::new(params, t);
    let residual = |x: f64, y: f64| {
        field
            .velocity_and_jacobian(x, y)
            .ok()
            .map(|(v, j)| ([v.vx - nvx, v.vy - nvy], j))
    };
    let inside = |x: f64, y: f64| (x - x0).abs() <= half_box && (y - y0).abs() <= half_box;

    let (mut x, mut y) = (0.5 * (x0 + next_x), 0.5 * (y0 + next_y));
    let (mut u, mut jac) = residual(x, y).ok_or_else(|| NodeError::NotFound {
        reason: "seed is singular".into(),
    })?;
    for _ in 0..XPOINT_MAX_ITER {
        let norm = u[0].hypot(u[1]);
        if norm < XPOINT_TOL {
            let eigenvalues = sym_eigenvalues(&jac);
            if eigenvalues[0] * eigenvalues[1] >= 0.0 {
                return Err(NodeError::NotHyperbolic { x, y, eigenvalues });
            }
            return Ok(XPoint {
                position: PhasePoint::new(x, y, t),
                paired_node: node.k,
                eigenvalues,
            });
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(NodeError::NotFound {
                reason: "singular Jacobian".into(),
            });
        }
        let dx = -(jac[1][1] * u[0] - jac[0][1] * u[1]) / det;
        let dy = -(-jac[1][0] * u[0] + jac[0][0] * u[1]) / det;
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-6 {
            let (nx, ny) = (x + lambda * dx, y + lambda * dy);
            if inside(nx, ny) {
                if let Some((nu, nj)) = residual(nx, ny) {
                    if nu[0].hypot(nu[1]) < norm {
                        accepted = Some((nx, ny, nu, nj));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        let Some((nx, ny, nu, nj)) = accepted else {
            return Err(NodeError::NotFound {
                reason: format!("line search stalled at ({x}, {y}), |u| = {norm:e}"),
            });
        };
        (x, y, u, jac) = (nx, ny, nu, nj);
    }
    Err(NodeError::NotFound {
        reason: "iteration limit".into(),
    })
}

/// Overlap envelope `exp[-4 a0^2 (cos^2 w_x t + cos^2 w_y t)]` of the
/// secondary term at the main-blob center, on the amplitude scale.
pub fn amplitude_envelope(params: &WaveParams, t: f64) -> f64 {
    let cx = (params.omega_x * t).cos();
    let cy = (params.omega_y * t).cos();
    (-4.0 * params.a0 * params.a0 * (cx * cx + cy * cy)).exp()
}

/// The same envelope on the density scale (its square). This is the quantity
/// whose maxima reach 0.31 and 0.03 at the first two collisions.
pub fn collision_envelope(params: &WaveParams, t: f64) -> f64 {
    amplitude_envelope(params, t).powi(2)
}

pub const DEFAULT_COLLISION_THRESHOLD: f64 = 0.01;
const SCAN_STEP: f64 = 1e-3;

fn refine_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    0.5 * (lo + hi)
}

/// Intervals in `[0, t_max]` where [`collision_envelope`] exceeds `threshold`.
pub fn collision_epochs(params: &WaveParams, t_max: f64, threshold: f64) -> Vec<CollisionEpoch> {
    let env = |t: f64| collision_envelope(params, t);
    let n = (t_max / SCAN_STEP).ceil().max(0.0) as usize;
    let mut epochs = Vec::new();
    let mut open: Option<f64> = None;
    for i in 0..=n {
        let t = (i as f64 * SCAN_STEP).min(t_max);
        let above = env(t) > threshold;
        match (above, open) {
            (true, None) => open = Some(t),
            (false, Some(start)) => {
                epochs.push(finish_epoch(&env, start, t));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        epochs.push(finish_epoch(&env, start, t_max));
    }
    epochs
}

fn finish_epoch(env: &impl Fn(f64) -> f64, start: f64, end: f64) -> CollisionEpoch {
    // Envelope is unimodal inside a window narrower than the shorter half-period.
    let peak_time = refine_max(env, start, end);
    CollisionEpoch {
        start,
        end,
        peak_time,
        peak_envelope: env(peak_time),
    }
}

/// Local minima of the node spacing in `[t0, t1]`, refined to ~1e-9.
pub fn spacing_local_minima(params: &WaveParams, t0: f64, t1: f64) -> Vec<f64> {
    let f = |t: f64| -node_spacing(params, t);
    let n = ((t1 - t0) / SCAN_STEP).ceil() as usize;
    let ts: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * SCAN_STEP).collect();
    let mut out = Vec::new();
    for w in ts.windows(3) {
        let (a, b, c) = (f(w[0]), f(w[1]), f(w[2]));
        if b > a && b >= c && b.is_finite() {
            out.push(refine_max(f, w[0], w[2]));
        }
    }
    out
}

/// CSV rows `t,k,x_nod,y_nod,spacing,inclination,d_no` over a time grid.
/// Times at which the lattice is at infinity are skipped.
pub fn write_lattice_csv<W: Write>(
    params: &WaveParams,
    times: &[f64],
    k_range: RangeInclusive<i64>,
    mut out: W,
) -> Result<(), Box<dyn std::error::Error>> {
    writeln!(out, "t,k,x_nod,y_nod,spacing,inclination,d_no")?;
    for &t in times {
        let frame = lattice_frame(params, t)?;
        if !frame.valid {
            continue;
        }
        for n in nodes_at(params, t, k_range.clone())? {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                t,
                n.k,
                n.position.x,
                n.position.y,
                frame.spacing,
                frame.inclination,
                frame.origin_distance
            )?;
        }
    }
    Ok(())
}
