//! Closed-form evaluation of the wavefunction, its derivatives and the
//! Bohmian velocity field.
//!
//! Each factor is a displaced coherent state of a harmonic oscillator,
//!
//! ```text
//! Y_s(x,t) = (w/pi)^(1/4) exp[-w/2 (x - s A cos wt)^2 + i(-s sqrt(2w) a0 sin(wt) x + (a0^2 sin 2wt - wt)/2)]
//! ```
//!
//! with `s = +1` for the right state and `s = -1` for the left one, and
//! `A = sqrt(2/w) a0`. Because the two product terms differ only by an
//! exponent that is linear in `x` and `y`, the velocity field only needs the
//! ratio `r = T2/T1`, which keeps evaluation cheap and immune to underflow of
//! the individual Gaussians.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::NearNodeSingularity;
use crate::params::{WaveParams, MASS_X, MASS_Y};

pub type ComplexAmplitude = Complex64;

/// `|Psi|^2 / max(|T1|, |T2|)^2` below which the velocity is undefined.
pub const SINGULARITY_FLOOR: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityVector {
    pub vx: f64,
    pub vy: f64,
}

impl VelocityVector {
    pub fn norm(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Right (`sigma = 0`) or left (`sigma = pi`) coherent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    R,
    L,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::R => 1.0,
            Branch::L => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlobKind {
    /// Lower-right blob carried by `c1 Y_R(x) Y_L(y)`.
    Main,
    /// Upper-left blob carried by `c2 Y_L(x) Y_R(y)`.
    Secondary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobCenter {
    pub x: f64,
    pub y: f64,
    pub which: BlobKind,
}

/// Time-dependent data of one coherent-state factor.
#[derive(Debug, Clone, Copy)]
struct Factor {
    omega: f64,
    center: f64,
    momentum: f64,
    phase: f64,
    center_dot: f64,
    momentum_dot: f64,
    phase_dot: f64,
    log_norm: f64,
}

impl Factor {
    fn new(omega: f64, a0: f64, branch: Branch, t: f64) -> Self {
        let s = branch.sign();
        let amp = (2.0 / omega).sqrt() * a0;
        let k = (2.0 * omega).sqrt() * a0;
        let (sn, cs) = (omega * t).sin_cos();
        Self {
            omega,
            center: s * amp * cs,
            momentum: -s * k * sn,
            phase: 0.5 * (a0 * a0 * (2.0 * omega * t).sin() - omega * t),
            center_dot: -s * amp * omega * sn,
            momentum_dot: -s * k * omega * cs,
            phase_dot: a0 * a0 * omega * (2.0 * omega * t).cos() - 0.5 * omega,
            log_norm: 0.25 * (omega / std::f64::consts::PI).ln(),
        }
    }

    fn of(params: &WaveParams, axis: Axis, branch: Branch, t: f64) -> Self {
        let omega = match axis {
            Axis::X => params.omega_x,
            Axis::Y => params.omega_y,
        };
        Self::new(omega, params.a0, branch, t)
    }

    /// Logarithm of the factor at `coord`.
    fn log_value(&self, coord: f64) -> Complex64 {
        let d = coord - self.center;
        Complex64::new(
            self.log_norm - 0.5 * self.omega * d * d,
            self.momentum * coord + self.phase,
        )
    }

    fn jet(&self, coord: f64) -> Jet1 {
        let value = self.log_value(coord).exp();
        let d = coord - self.center;
        let g = Complex64::new(-self.omega * d, self.momentum);
        let dt = Complex64::new(
            self.omega * d * self.center_dot,
            self.momentum_dot * coord + self.phase_dot,
        );
        Jet1 {
            value,
            d1: value * g,
            d2: value * (g * g - self.omega),
            dt: value * dt,
        }
    }
}

/// A factor and its first, second and time derivatives.
#[derive(Debug, Clone, Copy)]
struct Jet1 {
    value: Complex64,
    d1: Complex64,
    d2: Complex64,
    dt: Complex64,
}

/// `Psi` with its spatial derivatives up to second order and its time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiJet {
    pub psi: Complex64,
    pub dx: Complex64,
    pub dy: Complex64,
    pub dxx: Complex64,
    pub dyy: Complex64,
    pub dt: Complex64,
}

/// Evaluate a single factor `Y_R` or `Y_L` along one axis.
pub fn eval_component(
    params: &WaveParams,
    branch: Branch,
    axis: Axis,
    coord: f64,
    t: f64,
) -> ComplexAmplitude {
    Factor::of(params, axis, branch, t).log_value(coord).exp()
}

struct TermJets {
    first: [Jet1; 2],
    second: [Jet1; 2],
}

fn term_jets(params: &WaveParams, p: &PhasePoint) -> TermJets {
    TermJets {
        first: [
            Factor::of(params, Axis::X, Branch::R, p.t).jet(p.x),
            Factor::of(params, Axis::Y, Branch::L, p.t).jet(p.y),
        ],
        second: [
            Factor::of(params, Axis::X, Branch::L, p.t).jet(p.x),
            Factor::of(params, Axis::Y, Branch::R, p.t).jet(p.y),
        ],
    }
}

fn product_jet(c: f64, [fx, fy]: [Jet1; 2]) -> PsiJet {
    PsiJet {
        psi: c * fx.value * fy.value,
        dx: c * fx.d1 * fy.value,
        dy: c * fx.value * fy.d1,
        dxx: c * fx.d2 * fy.value,
        dyy: c * fx.value * fy.d2,
        dt: c * (fx.dt * fy.value + fx.value * fy.dt),
    }
}

impl std::ops::Add for PsiJet {
    type Output = PsiJet;
    fn add(self, o: PsiJet) -> PsiJet {
        PsiJet {
            psi: self.psi + o.psi,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dyy: self.dyy + o.dyy,
            dt: self.dt + o.dt,
        }
    }
}

/// The two product terms `c1 Y_R Y_L` and `c2 Y_L Y_R` with their derivatives.
pub fn term_derivatives(params: &WaveParams, p: &PhasePoint) -> [PsiJet; 2] {
    let jets = term_jets(params, p);
    [
        product_jet(params.c1, jets.first),
        product_jet(params.c2, jets.second),
    ]
}

pub fn psi_derivatives(params: &WaveParams, p: &PhasePoint) -> PsiJet {
    let [a, b] = term_derivatives(params, p);
    a + b
}

pub fn eval_psi(params: &WaveParams, p: &PhasePoint) -> ComplexAmplitude {
    let t1 = Factor::of(params, Axis::X, Branch::R, p.t).log_value(p.x)
        + Factor::of(params, Axis::Y, Branch::L, p.t).log_value(p.y);
    let t2 = Factor::of(params, Axis::X, Branch::L, p.t).log_value(p.x)
        + Factor::of(params, Axis::Y, Branch::R, p.t).log_value(p.y);
    params.c1 * t1.exp() + params.c2 * t2.exp()
}

/// Blob whose product term dominates `Psi` at `p`.
pub fn dominant_blob(params: &WaveParams, p: &PhasePoint) -> BlobKind {
    let l1 = Factor::of(params, Axis::X, Branch::R, p.t).log_value(p.x).re
        + Factor::of(params, Axis::Y, Branch::L, p.t).log_value(p.y).re
        + params.c1.abs().ln();
    let l2 = Factor::of(params, Axis::X, Branch::L, p.t).log_value(p.x).re
        + Factor::of(params, Axis::Y, Branch::R, p.t).log_value(p.y).re
        + params.c2.abs().ln();
    if l1 >= l2 {
        BlobKind::Main
    } else {
        BlobKind::Secondary
    }
}

pub fn density(params: &WaveParams, p: &PhasePoint) -> f64 {
    eval_psi(params, p).norm_sqr()
}

/// `(dPsi/dx, dPsi/dy)` in closed form.
pub fn eval_psi_gradient(
    params: &WaveParams,
    p: &PhasePoint,
) -> (ComplexAmplitude, ComplexAmplitude) {
    let j = psi_derivatives(params, p);
    (j.dx, j.dy)
}

/// Bohmian velocity `(hbar/m) Im(grad Psi / Psi)`.
pub fn velocity(params: &WaveParams, p: &PhasePoint) -> Result<VelocityVector, NearNodeSingularity> {
    FieldFrame::new(params, p.t).velocity(p.x, p.y)
}

/// Spatial Jacobian of the velocity field, `J[i][j] = d v_i / d x_j`.
pub fn velocity_jacobian(
    params: &WaveParams,
    p: &PhasePoint,
) -> Result<[[f64; 2]; 2], NearNodeSingularity> {
    FieldFrame::new(params, p.t)
        .velocity_and_jacobian(p.x, p.y)
        .map(|(_, j)| j)
}

#[derive(Debug, Clone, Copy)]
enum Terms {
    Both { log_coeff_ratio: Complex64 },
    FirstOnly,
    SecondOnly,
}

/// Ratio `T2/T1` reduced to the quantities the flow needs.
#[derive(Debug, Clone, Copy)]
struct RatioState {
    /// `r / (1 + r)`.
    sigma: Complex64,
    /// `r / (1 + r)^2`.
    weight: Complex64,
    /// `|1 + r|^2 / max(1, |r|)^2`.
    relative_density: f64,
    /// Whether the first term dominates.
    first_dominant: bool,
}

/// Everything about the field at a fixed time that does not depend on position.
///
/// Building a frame costs a handful of trig calls; evaluating the velocity at
/// a point afterwards costs one complex exponential.
#[derive(Debug, Clone, Copy)]
pub struct FieldFrame {
    pub t: f64,
    terms: Terms,
    /// Gradient of `ln(T2/T1)`; the exponent is linear so this is constant in space.
    grad_delta: [Complex64; 2],
    /// `Im` of the first term's logarithmic gradient, i.e. its momentum.
    base_momentum: [f64; 2],
    // Real parts of the log-moduli, for absolute densities.
    first_factors: [Factor; 2],
    second_factors: [Factor; 2],
    c1: f64,
    c2: f64,
}

impl FieldFrame {
    pub fn new(params: &WaveParams, t: f64) -> Self {
        let rx = Factor::of(params, Axis::X, Branch::R, t);
        let ly = Factor::of(params, Axis::Y, Branch::L, t);
        let lx = Factor::of(params, Axis::X, Branch::L, t);
        let ry = Factor::of(params, Axis::Y, Branch::R, t);
        let kx = (2.0 * params.omega_x).sqrt() * params.a0;
        let ky = (2.0 * params.omega_y).sqrt() * params.a0;
        let ex = Complex64::from_polar(1.0, -params.omega_x * t);
        let ey = Complex64::from_polar(1.0, -params.omega_y * t);
        let terms = if params.c1 == 0.0 {
            Terms::SecondOnly
        } else if params.c2 == 0.0 {
            Terms::FirstOnly
        } else {
            Terms::Both {
                log_coeff_ratio: Complex64::new(params.c2 / params.c1, 0.0).ln(),
            }
        };
        Self {
            t,
            terms,
            grad_delta: [-2.0 * kx * ex, 2.0 * ky * ey],
            base_momentum: [rx.momentum / MASS_X, ly.momentum / MASS_Y],
            first_factors: [rx, ly],
            second_factors: [lx, ry],
            c1: params.c1,
            c2: params.c2,
        }
    }

    /// `ln(T2/T1)` at `(x, y)`, including the coefficient ratio.
    pub fn log_ratio(&self, x: f64, y: f64) -> Option<Complex64> {
        match self.terms {
            Terms::Both { log_coeff_ratio } => {
                Some(log_coeff_ratio + self.grad_delta[0] * x + self.grad_delta[1] * y)
            }
            _ => None,
        }
    }

    pub fn grad_log_ratio(&self) -> [Complex64; 2] {
        self.grad_delta
    }

    fn ratio(&self, x: f64, y: f64) -> RatioState {
        match self.terms {
            Terms::FirstOnly => RatioState {
                sigma: Complex64::new(0.0, 0.0),
                weight: Complex64::new(0.0, 0.0),
                relative_density: 1.0,
                first_dominant: true,
            },
            Terms::SecondOnly => RatioState {
                sigma: Complex64::new(1.0, 0.0),
                weight: Complex64::new(0.0, 0.0),
                relative_density: 1.0,
                first_dominant: false,
            },
            Terms::Both { log_coeff_ratio } => {
                let rho = log_coeff_ratio + self.grad_delta[0] * x + self.grad_delta[1] * y;
                if rho.re <= 0.0 {
                    let r = rho.exp();
                    let one_plus = 1.0 + r;
                    let sigma = r / one_plus;
                    RatioState {
                        sigma,
                        weight: sigma / one_plus,
                        relative_density: one_plus.norm_sqr(),
                        first_dominant: true,
                    }
                } else {
                    let s = (-rho).exp();
                    let one_plus = 1.0 + s;
                    RatioState {
                        sigma: 1.0 / one_plus,
                        weight: s / (one_plus * one_plus),
                        relative_density: one_plus.norm_sqr(),
                        first_dominant: false,
                    }
                }
            }
        }
    }

    /// `|Psi|^2` relative to the dominant product term.
    pub fn relative_density(&self, x: f64, y: f64) -> f64 {
        self.ratio(x, y).relative_density
    }

    /// Absolute `|Psi|^2`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        let st = self.ratio(x, y);
        let (c, [fx, fy]) = if st.first_dominant {
            (self.c1, self.first_factors)
        } else {
            (self.c2, self.second_factors)
        };
        let log_mod = fx.log_value(x).re + fy.log_value(y).re;
        c * c * (2.0 * log_mod).exp() * st.relative_density
    }

    fn checked(&self, x: f64, y: f64) -> Result<RatioState, NearNodeSingularity> {
        let st = self.ratio(x, y);
        if !(st.relative_density >= SINGULARITY_FLOOR) {
            return Err(NearNodeSingularity {
                x,
                y,
                t: self.t,
                relative_density: st.relative_density,
            });
        }
        Ok(st)
    }

    fn velocity_from(&self, st: &RatioState) -> VelocityVector {
        let g = self.grad_delta;
        VelocityVector {
            vx: (self.base_momentum[0] + (st.sigma * g[0]).im) / MASS_X,
            vy: (self.base_momentum[1] + (st.sigma * g[1]).im) / MASS_Y,
        }
    }

    pub fn velocity(&self, x: f64, y: f64) -> Result<VelocityVector, NearNodeSingularity> {
        let st = self.checked(x, y)?;
        Ok(self.velocity_from(&st))
    }

    /// Velocity and its spatial Jacobian. The field is a gradient, so the
    /// Jacobian is symmetric.
    pub fn velocity_and_jacobian(
        &self,
        x: f64,
        y: f64,
    ) -> Result<(VelocityVector, [[f64; 2]; 2]), NearNodeSingularity> {
        let st = self.checked(x, y)?;
        let g = self.grad_delta;
        let jxx = (st.weight * g[0] * g[0]).im / MASS_X;
        let jxy = (st.weight * g[0] * g[1]).im / MASS_X;
        let jyy = (st.weight * g[1] * g[1]).im / MASS_Y;
        Ok((self.velocity_from(&st), [[jxx, jxy], [jxy, jyy]]))
    }
}

/// Analytic centers of both blobs. The main one moves on the product-state
/// Lissajous curve, the secondary one on its point reflection.
pub fn blob_centers(params: &WaveParams, t: f64) -> (BlobCenter, BlobCenter) {
    let x = params.amplitude_x() * (params.omega_x * t).cos();
    let y = -params.amplitude_y() * (params.omega_y * t).cos();
    (
        BlobCenter {
            x,
            y,
            which: BlobKind::Main,
        },
        BlobCenter {
            x: -x,
            y: -y,
            which: BlobKind::Secondary,
        },
    )
}

/// Distance of the top of a blob from the origin.
pub fn origin_distance(params: &WaveParams, t: f64) -> f64 {
    let (main, _) = blob_centers(params, t);
    main.x.hypot(main.y)
}

/// Gradient of `|Psi|^2` at the analytic main-blob center. It vanishes up to
/// the size of the cross terms, so it is large only while the blobs collide.
pub fn blob_top_residual(params: &WaveParams, t: f64) -> (f64, f64) {
    let (c, _) = blob_centers(params, t);
    let j = psi_derivatives(params, &PhasePoint::new(c.x, c.y, t));
    (
        2.0 * (j.psi.conj() * j.dx).re,
        2.0 * (j.psi.conj() * j.dy).re,
    )
}

/// Harmonic Hamiltonian `H = (p_x^2/m_x + p_y^2/m_y + m_x w_x^2 x^2 + m_y w_y^2 y^2)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hamiltonian {
    pub omega_x: f64,
    pub omega_y: f64,
}

impl From<&WaveParams> for Hamiltonian {
    fn from(p: &WaveParams) -> Self {
        Self {
            omega_x: p.omega_x,
            omega_y: p.omega_y,
        }
    }
}

impl Hamiltonian {
    fn apply(&self, j: &PsiJet, x: f64, y: f64) -> Complex64 {
        let kinetic = -0.5 * (j.dxx / MASS_X + j.dyy / MASS_Y);
        let potential = 0.5
            * (MASS_X * self.omega_x * self.omega_x * x * x
                + MASS_Y * self.omega_y * self.omega_y * y * y);
        kinetic + potential * j.psi
    }
}

/// `|i dPsi/dt - H Psi|` relative to the summed magnitudes of both sides,
/// term by term, so it stays meaningful where `Psi` itself is tiny.
pub fn schrodinger_residual(params: &WaveParams, p: &PhasePoint) -> f64 {
    schrodinger_residual_against(params, &Hamiltonian::from(params), p)
}

/// As [`schrodinger_residual`] but against an arbitrary oscillator Hamiltonian.
pub fn schrodinger_residual_against(params: &WaveParams, ham: &Hamiltonian, p: &PhasePoint) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let terms = term_derivatives(params, p);
    let mut residual = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for j in &terms {
        let lhs = i * j.dt;
        let rhs = ham.apply(j, p.x, p.y);
        residual += lhs - rhs;
        scale += lhs.norm() + rhs.norm();
    }
    if scale == 0.0 {
        0.0
    } else {
        residual.norm() / scale
    }
}

/// `d|Psi|^2/dt + div(|Psi|^2 v)` from the closed-form derivatives.
pub fn continuity_residual(params: &WaveParams, p: &PhasePoint) -> f64 {
    let j = psi_derivatives(params, p);
    let drho_dt = 2.0 * (j.psi.conj() * j.dt).re;
    let div_current = (j.psi.conj() * j.dxx).im / MASS_X + (j.psi.conj() * j.dyy).im / MASS_Y;
    drho_dt + div_current
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MAX_ENTANGLED_C2;
    use approx::assert_relative_eq;

    fn defaults(c2: f64) -> WaveParams {
        WaveParams::with_c2(c2)
    }

    #[test]
    fn component_peak_modulus() {
        let p = defaults(0.5);
        let peak = (1.0 / std::f64::consts::PI).powf(0.25);
        let at = 2f64.sqrt() * 2.5;
        let r = eval_component(&p, Branch::R, Axis::X, at, 0.0);
        let l = eval_component(&p, Branch::L, Axis::X, -at, 0.0);
        assert_relative_eq!(r.norm(), peak, max_relative = 1e-14);
        assert_relative_eq!(l.norm(), peak, max_relative = 1e-14);
        assert!((peak - 0.7511).abs() < 1e-4);
        let origin = eval_component(&p, Branch::R, Axis::X, 0.0, 0.0);
        assert_relative_eq!(origin.norm(), peak * (-6.25f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn product_state_peak_density() {
        let p = defaults(0.0);
        for t in [0.0, 0.7, 3.3, 9.1] {
            let (c, _) = blob_centers(&p, t);
            let d = density(&p, &PhasePoint::new(c.x, c.y, t));
            assert_relative_eq!(d, p.product_peak_density(), max_relative = 1e-13);
        }
        assert!((p.product_peak_density() - 0.418919).abs() < 1e-6);
    }

    #[test]
    fn main_center_at_start() {
        let (main, sec) = blob_centers(&defaults(0.2), 0.0);
        assert!((main.x - 3.5355).abs() < 1e-4 && (main.y + 2.6864).abs() < 1e-4);
        assert_eq!((sec.x, sec.y), (-main.x, -main.y));
        let (m, _) = blob_centers(&defaults(0.2), std::f64::consts::PI);
        assert_relative_eq!(m.x, -3.5355339, max_relative = 1e-6);
    }

    #[test]
    fn origin_distance_at_start() {
        let p = defaults(0.5);
        let expected = p.a0 * (2.0 * (p.omega_x + p.omega_y) / (p.omega_x * p.omega_y)).sqrt();
        assert_relative_eq!(origin_distance(&p, 0.0), expected, max_relative = 1e-14);
        assert!((expected - 4.4404).abs() < 1e-4);
    }

    #[test]
    fn velocity_vanishes_at_t0() {
        for c2 in [0.0, 0.2, 0.5, MAX_ENTANGLED_C2] {
            let p = defaults(c2);
            for &(x, y) in &[(3.0, -2.0), (-3.1, 2.4), (0.4, 0.3), (1.0, 5.0)] {
                let v = velocity(&p, &PhasePoint::new(x, y, 0.0)).unwrap();
                assert!(v.vx.abs() < 1e-12 && v.vy.abs() < 1e-12, "{c2} {x} {y}: {v:?}");
            }
        }
    }

    #[test]
    fn velocity_matches_gradient_ratio() {
        let p = defaults(0.5);
        for &(x, y, t) in &[(1.0, -0.5, 0.7), (-2.0, 1.5, 3.2), (0.3, 0.1, 4.58)] {
            let pt = PhasePoint::new(x, y, t);
            let psi = eval_psi(&p, &pt);
            let (gx, gy) = eval_psi_gradient(&p, &pt);
            let v = velocity(&p, &pt).unwrap();
            assert_relative_eq!(v.vx, (gx / psi).im, max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(v.vy, (gy / psi).im, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn frame_density_matches_direct() {
        let p = defaults(0.2);
        let f = FieldFrame::new(&p, 2.3);
        for &(x, y) in &[(2.0, -1.0), (-3.0, 2.0), (8.0, 8.0), (0.0, 0.0)] {
            let d = density(&p, &PhasePoint::new(x, y, 2.3));
            assert_relative_eq!(f.density(x, y), d, max_relative = 1e-10);
        }
    }

    #[test]
    fn jacobian_is_symmetric_and_matches_differences() {
        let p = defaults(0.5);
        let t = 2.1;
        let f = FieldFrame::new(&p, t);
        let (x, y) = (0.8, -0.4);
        let (_, j) = f.velocity_and_jacobian(x, y).unwrap();
        let h = 1e-6;
        let vxp = f.velocity(x + h, y).unwrap();
        let vxm = f.velocity(x - h, y).unwrap();
        let vyp = f.velocity(x, y + h).unwrap();
        let vym = f.velocity(x, y - h).unwrap();
        assert_relative_eq!(j[0][0], (vxp.vx - vxm.vx) / (2.0 * h), max_relative = 1e-6, epsilon = 1e-8);
        assert_relative_eq!(j[1][0], (vxp.vy - vxm.vy) / (2.0 * h), max_relative = 1e-6, epsilon = 1e-8);
        assert_relative_eq!(j[0][1], (vyp.vx - vym.vx) / (2.0 * h), max_relative = 1e-6, epsilon = 1e-8);
        assert_relative_eq!(j[1][1], (vyp.vy - vym.vy) / (2.0 * h), max_relative = 1e-6, epsilon = 1e-8);
    }

    #[test]
    fn product_state_velocity_is_uniform() {
        let p = defaults(0.0);
        let f = FieldFrame::new(&p, 1.7);
        let a = f.velocity(3.0, -2.0).unwrap();
        let b = f.velocity(-5.0, 4.0).unwrap();
        assert_eq!(a, b);
        let (_, j) = f.velocity_and_jacobian(0.0, 0.0).unwrap();
        assert_eq!(j, [[0.0; 2]; 2]);
    }

    #[test]
    fn blob_top_residual_product_state_is_zero() {
        let p = defaults(0.0);
        for t in [0.0, 1.3, 4.58, 8.1] {
            let (gx, gy) = blob_top_residual(&p, t);
            assert!(gx.abs() < 1e-14 && gy.abs() < 1e-14);
        }
    }

    #[test]
    fn blob_top_residual_flags_collisions() {
        let p = defaults(0.5);
        let (gx, gy) = blob_top_residual(&p, 2.0);
        assert!(gx.hypot(gy) < 1e-4);
        let (gx, gy) = blob_top_residual(&p, 4.58);
        assert!(gx.hypot(gy) > 1e-4);
    }

    #[test]
    fn schrodinger_negative_control() {
        let p = defaults(0.5);
        let pt = PhasePoint::new(1.0, -1.0, 2.0);
        assert!(schrodinger_residual(&p, &pt) < 1e-12);
        let wrong = Hamiltonian {
            omega_x: p.omega_x,
            omega_y: p.omega_y * 1.01,
        };
        assert!(schrodinger_residual_against(&p, &wrong, &pt) > 1e-4);
    }
}
