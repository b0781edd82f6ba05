//! Physical constants and entanglement coefficients of the two-qubit state.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Reduced Planck constant. The model is written in units where it is 1.
pub const HBAR: f64 = 1.0;
/// Mass along x.
pub const MASS_X: f64 = 1.0;
/// Mass along y.
pub const MASS_Y: f64 = 1.0;

pub const DEFAULT_OMEGA_X: f64 = 1.0;
pub const DEFAULT_A0: f64 = 2.5;

/// `sqrt(3)`, the default y frequency.
pub fn default_omega_y() -> f64 {
    3f64.sqrt()
}

/// The maximally entangled coefficient `sqrt(2)/2`.
pub const MAX_ENTANGLED_C2: f64 = std::f64::consts::FRAC_1_SQRT_2;

const NORM_TOLERANCE: f64 = 1e-12;

/// Sign of `c1 * c2`; selects the parity of the node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// `c1 * c2 > 0`: nodes carry odd `k`.
    Odd,
    /// `c1 * c2 < 0`: nodes carry even `k`.
    Even,
    /// One coefficient vanishes; there are no nodes.
    Degenerate,
}

/// Parameters defining `Psi = c1 Y_R(x) Y_L(y) + c2 Y_L(x) Y_R(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveParams {
    pub c1: f64,
    pub c2: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub a0: f64,
}

impl Default for WaveParams {
    fn default() -> Self {
        Self::with_c2(MAX_ENTANGLED_C2)
    }
}

impl WaveParams {
    /// Default frequencies and displacement, `c1 = sqrt(1 - c2^2)`.
    pub fn with_c2(c2: f64) -> Self {
        Self {
            c1: (1.0 - c2 * c2).max(0.0).sqrt(),
            c2,
            omega_x: DEFAULT_OMEGA_X,
            omega_y: default_omega_y(),
            a0: DEFAULT_A0,
        }
    }

    pub fn with_coefficients(c1: f64, c2: f64) -> Result<Self, ParamError> {
        let p = Self {
            c1,
            c2,
            ..Self::with_c2(0.0)
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let fields = [self.c1, self.c2, self.omega_x, self.omega_y, self.a0];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(ParamError::NonFinite);
        }
        let norm = self.c1 * self.c1 + self.c2 * self.c2;
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(ParamError::Normalization { norm });
        }
        if self.omega_x <= 0.0 || self.omega_y <= 0.0 {
            return Err(ParamError::Frequency);
        }
        if (self.omega_x - self.omega_y).abs() < 1e-12 {
            return Err(ParamError::DegenerateFrequencies);
        }
        if self.a0 <= 0.0 {
            return Err(ParamError::Displacement { a0: self.a0 });
        }
        Ok(())
    }

    pub fn parity(&self) -> Parity {
        let s = self.c1 * self.c2;
        if s > 0.0 {
            Parity::Odd
        } else if s < 0.0 {
            Parity::Even
        } else {
            Parity::Degenerate
        }
    }

    /// `omega_x - omega_y`.
    pub fn omega_xy(&self) -> f64 {
        self.omega_x - self.omega_y
    }

    /// Coherent-state amplitude `sqrt(2/omega) a0` along x.
    pub fn amplitude_x(&self) -> f64 {
        (2.0 / self.omega_x).sqrt() * self.a0
    }

    pub fn amplitude_y(&self) -> f64 {
        (2.0 / self.omega_y).sqrt() * self.a0
    }

    /// Peak of a single product-term density, `sqrt(omega_x omega_y)/pi`.
    pub fn product_peak_density(&self) -> f64 {
        (self.omega_x * self.omega_y).sqrt() / std::f64::consts::PI
    }

    /// Modulus scale of a single product term, `(omega_x omega_y)^(1/4)/sqrt(pi)`.
    pub fn amplitude_scale(&self) -> f64 {
        self.product_peak_density().sqrt()
    }

    /// Lissajous extents of a product-state trajectory: `2 a0 sqrt(2)/sqrt(omega)` per axis.
    pub fn lissajous_extent(&self) -> (f64, f64) {
        (2.0 * self.amplitude_x(), 2.0 * self.amplitude_y())
    }
}
