//! Ordered/chaotic labels and the chaotic-to-ordered proportion algebra.
//!
//! Two classifiers are provided. The escape box is cheap: an ordered
//! trajectory traces a Lissajous figure whose extent is fixed by the
//! oscillator amplitudes, so leaving a slightly inflated copy of that box
//! marks it as chaotic. The Lyapunov classifier integrates the tangent
//! system and looks at the finite-time indicator `chi(t)`.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ChaosError;
use crate::integrate::{
    deviation_until, integrate_until, IntegratorConfig, RunSummary, TrajectoryRecord, DEFAULT_XI0,
};
use crate::params::WaveParams;
use crate::sampler::{sample_born, BlobTag};
use crate::wave::{dominant_blob, BlobKind, PhasePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Ordered,
    Chaotic,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lcn,
    EscapeBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosLabel {
    pub label: Label,
    pub method: Method,
    pub chi_final: Option<f64>,
    pub escape_time: Option<f64>,
}

pub const DEFAULT_MARGIN: f64 = 0.175;
pub const DEFAULT_ESCAPE_HORIZON: f64 = 1e3;
pub const DEFAULT_LCN_HORIZON: f64 = 1e4;
pub const DEFAULT_CHI_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscapeConfig {
    /// Fractional inflation of the Lissajous extent on every side.
    pub margin: f64,
    pub horizon: f64,
    /// Shortest horizon accepted by [`classify_escape`].
    pub min_horizon: f64,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            horizon: DEFAULT_ESCAPE_HORIZON,
            min_horizon: DEFAULT_ESCAPE_HORIZON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcnConfig {
    pub horizon: f64,
    pub min_horizon: f64,
    pub chi_threshold: f64,
    /// `L(H) / max(L(H/10), 1)` above which the log-stretch counts as growing linearly.
    pub chaotic_growth: f64,
    /// Growth ratio below which it counts as sub-linear.
    pub ordered_growth: f64,
}

impl Default for LcnConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_LCN_HORIZON,
            min_horizon: DEFAULT_LCN_HORIZON,
            chi_threshold: DEFAULT_CHI_THRESHOLD,
            chaotic_growth: 3.0,
            ordered_growth: 2.0,
        }
    }
}

/// Axis-aligned box an ordered trajectory may not leave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl EscapeBox {
    /// Ordered motion in the main blob starts at the lower-right corner of
    /// its Lissajous rectangle; in the secondary blob at the upper-left one.
    pub fn around(params: &WaveParams, start: &PhasePoint, corner: BlobKind, margin: f64) -> Self {
        let (dx, dy) = params.lissajous_extent();
        let (mx, my) = (margin * dx, margin * dy);
        match corner {
            BlobKind::Main => Self {
                x_min: start.x - dx - mx,
                x_max: start.x + mx,
                y_min: start.y - my,
                y_max: start.y + dy + my,
            },
            BlobKind::Secondary => Self {
                x_min: start.x - mx,
                x_max: start.x + dx + mx,
                y_min: start.y - dy - my,
                y_max: start.y + my,
            },
        }
    }

    pub fn contains(&self, p: &PhasePoint) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }
}

/// Streaming escape detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeTracker {
    pub bounds: EscapeBox,
    pub escape_time: Option<f64>,
    pub last_time: f64,
}

impl EscapeTracker {
    pub fn new(params: &WaveParams, start: &PhasePoint, margin: f64) -> Self {
        let corner = dominant_blob(params, start);
        Self {
            bounds: EscapeBox::around(params, start, corner, margin),
            escape_time: None,
            last_time: start.t,
        }
    }

    pub fn observe(&mut self, p: &PhasePoint) -> ControlFlow<()> {
        self.last_time = p.t;
        if self.escape_time.is_none() && !self.bounds.contains(p) {
            self.escape_time = Some(p.t);
        }
        if self.escape_time.is_some() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }

    fn label(&self, start: f64, aborted: bool, min_horizon: f64) -> Result<ChaosLabel, ChaosError> {
        let label = if self.escape_time.is_some() {
            Label::Chaotic
        } else if aborted {
            Label::Undetermined
        } else if self.last_time - start < min_horizon {
            return Err(ChaosError::HorizonTooShort {
                horizon: self.last_time - start,
                required: min_horizon,
            });
        } else {
            Label::Ordered
        };
        Ok(ChaosLabel {
            label,
            method: Method::EscapeBox,
            chi_final: None,
            escape_time: self.escape_time,
        })
    }
}

/// Label an already integrated trajectory by the escape-box test.
pub fn classify_escape(
    params: &WaveParams,
    record: &TrajectoryRecord,
    margin: f64,
    min_horizon: f64,
) -> Result<ChaosLabel, ChaosError> {
    let mut tracker = EscapeTracker::new(params, &record.initial, margin);
    for p in &record.samples {
        if tracker.observe(p).is_break() {
            break;
        }
    }
    tracker.label(record.initial.t, record.flags.aborted_near_node, min_horizon)
}

/// Integrate from `start` only as long as needed to decide the escape label.
pub fn escape_label(
    params: &WaveParams,
    start: PhasePoint,
    integrator: &IntegratorConfig,
    cfg: &EscapeConfig,
) -> Result<ChaosLabel, ChaosError> {
    let mut tracker = EscapeTracker::new(params, &start, cfg.margin);
    let icfg = IntegratorConfig {
        t_final: start.t + cfg.horizon,
        ..*integrator
    };
    let summary = integrate_until(params, start, &icfg, |p| tracker.observe(&p))?;
    tracker.label(start.t, summary.abort.is_some(), cfg.min_horizon)
}

/// Decision rule on the accumulated log-stretch `L` at the horizon `H` and at `H/10`.
pub fn lcn_decision(cfg: &LcnConfig, horizon: f64, stretch_h: f64, stretch_tenth: f64) -> Label {
    let chi = stretch_h / horizon;
    let growth = stretch_h / stretch_tenth.max(1.0);
    if chi > cfg.chi_threshold && growth > cfg.chaotic_growth {
        Label::Chaotic
    } else if growth < cfg.ordered_growth || (chi <= cfg.chi_threshold && growth < cfg.chaotic_growth) {
        Label::Ordered
    } else {
        Label::Undetermined
    }
}

/// Lyapunov-number label. `chi_final` is `ln(xi/xi0)/t` at the horizon.
pub fn classify_lcn(
    params: &WaveParams,
    start: PhasePoint,
    integrator: &IntegratorConfig,
    cfg: &LcnConfig,
) -> Result<ChaosLabel, ChaosError> {
    if cfg.horizon < cfg.min_horizon {
        return Err(ChaosError::HorizonTooShort {
            horizon: cfg.horizon,
            required: cfg.min_horizon,
        });
    }
    let icfg = IntegratorConfig {
        t_final: start.t + cfg.horizon,
        ..*integrator
    };
    let tenth = start.t + 0.1 * cfg.horizon;
    let mut stretch_tenth = 0.0;
    let mut last = (start.t, 0.0);
    let summary: RunSummary = deviation_until(params, start, &icfg, DEFAULT_XI0, |p, l| {
        if p.t <= tenth {
            stretch_tenth = l;
        }
        last = (p.t, l);
        ControlFlow::Continue(())
    })?;
    let elapsed = last.0 - start.t;
    let chi = if elapsed > 0.0 { last.1 / elapsed } else { 0.0 };
    let label = if summary.abort.is_some() {
        Label::Undetermined
    } else {
        lcn_decision(cfg, elapsed, last.1, stretch_tenth)
    };
    Ok(ChaosLabel {
        label,
        method: Method::Lcn,
        chi_final: Some(chi),
        escape_time: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionReport {
    /// Chaotic fraction among main-blob particles.
    pub b: f64,
    pub p1: f64,
    pub p2: f64,
    pub p_ch: f64,
    pub p_or: f64,
    pub ratio: f64,
    pub n_main: usize,
    pub n_main_chaotic: usize,
    pub n_secondary: usize,
    pub n_undetermined: usize,
}

impl ProportionReport {
    /// `P_ch = p1 + b p2`, `P_or = (1 - b) p2`, ratio `(p1/p2 + b)/(1 - b)`.
    pub fn from_fractions(p1: f64, p2: f64, b: f64) -> Self {
        let p_ch = p1 + b * p2;
        let p_or = (1.0 - b) * p2;
        Self {
            b,
            p1,
            p2,
            p_ch,
            p_or,
            ratio: (p1 / p2 + b) / (1.0 - b),
            n_main: 0,
            n_main_chaotic: 0,
            n_secondary: 0,
            n_undetermined: 0,
        }
    }
}

/// Assemble the report from blob tags and labels. Undetermined main-blob
/// labels are left out of `b` and counted separately.
pub fn proportion_report(items: &[(BlobTag, Label)]) -> ProportionReport {
    let mut n_main = 0;
    let mut n_main_chaotic = 0;
    let mut n_secondary = 0;
    let mut n_undetermined = 0;
    for (tag, label) in items {
        match (tag, label) {
            (BlobTag::Main, Label::Undetermined) => n_undetermined += 1,
            (BlobTag::Main, l) => {
                n_main += 1;
                if *l == Label::Chaotic {
                    n_main_chaotic += 1;
                }
            }
            (BlobTag::Secondary, _) => n_secondary += 1,
            (BlobTag::Custom(_), _) => {}
        }
    }
    let total = (n_main + n_undetermined + n_secondary).max(1) as f64;
    let b = if n_main > 0 {
        n_main_chaotic as f64 / n_main as f64
    } else {
        0.0
    };
    ProportionReport {
        n_main,
        n_main_chaotic,
        n_secondary,
        n_undetermined,
        ..ProportionReport::from_fractions(
            n_secondary as f64 / total,
            (n_main + n_undetermined) as f64 / total,
            b,
        )
    }
}

/// Escape labels for a whole particle list, computed in parallel.
pub fn escape_labels(
    params: &WaveParams,
    starts: &[PhasePoint],
    integrator: &IntegratorConfig,
    cfg: &EscapeConfig,
) -> Result<Vec<ChaosLabel>, ChaosError> {
    starts
        .par_iter()
        .map(|s| escape_label(params, *s, integrator, cfg))
        .collect()
}

pub fn lcn_labels(
    params: &WaveParams,
    starts: &[PhasePoint],
    integrator: &IntegratorConfig,
    cfg: &LcnConfig,
) -> Result<Vec<ChaosLabel>, ChaosError> {
    starts
        .par_iter()
        .map(|s| classify_lcn(params, *s, integrator, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BPoint {
    pub c2: f64,
    pub b: f64,
    pub n_main: usize,
    pub n_undetermined: usize,
}

/// Chaotic fraction of the main blob of a Born ensemble for each `c2`.
pub fn b_curve(
    c2_values: &[f64],
    n: usize,
    seed: u64,
    integrator: &IntegratorConfig,
    cfg: &EscapeConfig,
) -> Result<Vec<BPoint>, ChaosError> {
    c2_values
        .iter()
        .map(|&c2| {
            let params = WaveParams::with_c2(c2);
            let set = sample_born(&params, n, seed);
            let main: Vec<PhasePoint> = set
                .points
                .iter()
                .zip(&set.tags)
                .filter(|(_, t)| **t == BlobTag::Main)
                .map(|(p, _)| *p)
                .collect();
            let labels = escape_labels(&params, &main, integrator, cfg)?;
            let items: Vec<_> = labels.iter().map(|l| (BlobTag::Main, l.label)).collect();
            let r = proportion_report(&items);
            Ok(BPoint {
                c2,
                b: r.b,
                n_main: r.n_main,
                n_undetermined: r.n_undetermined,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate;
    use crate::wave::blob_centers;

    #[test]
    fn proportion_identity() {
        let r = ProportionReport::from_fractions(0.04 / 1.04, 1.0 / 1.04, 0.14);
        assert!((r.p_ch + r.p_or - 1.0).abs() < 1e-15);
        assert!((r.ratio * (1.0 - r.b) - r.p1 / r.p2 - r.b).abs() < 1e-15);
        assert!((r.ratio - 0.2093).abs() < 1e-3);
    }

    #[test]
    fn product_state_proportions() {
        let items = vec![(BlobTag::Main, Label::Ordered); 10];
        let r = proportion_report(&items);
        assert_eq!((r.b, r.p1, r.p2, r.p_ch, r.p_or), (0.0, 0.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn report_counts_undetermined_apart() {
        let items = [
            (BlobTag::Main, Label::Chaotic),
            (BlobTag::Main, Label::Ordered),
            (BlobTag::Main, Label::Undetermined),
            (BlobTag::Secondary, Label::Chaotic),
        ];
        let r = proportion_report(&items);
        assert_eq!((r.n_main, r.n_undetermined, r.n_secondary), (2, 1, 1));
        assert_eq!(r.b, 0.5);
        assert_eq!((r.p1, r.p2), (0.25, 0.75));
    }

    #[test]
    fn box_corners() {
        let p = WaveParams::default();
        let s = PhasePoint::new(1.0, 2.0, 0.0);
        let m = EscapeBox::around(&p, &s, BlobKind::Main, 0.0);
        assert_eq!((m.x_max, m.y_min), (1.0, 2.0));
        let q = EscapeBox::around(&p, &s, BlobKind::Secondary, 0.0);
        assert_eq!((q.x_min, q.y_max), (1.0, 2.0));
    }

    #[test]
    fn product_state_is_ordered_by_both_methods() {
        let p = WaveParams::with_c2(0.0);
        let (c, _) = blob_centers(&p, 0.0);
        let start = PhasePoint::new(c.x - 0.3, c.y + 0.2, 0.0);
        let icfg = IntegratorConfig::default();
        let e = escape_label(&p, start, &icfg, &EscapeConfig::default()).unwrap();
        assert_eq!(e.label, Label::Ordered);
        let l = classify_lcn(&p, start, &icfg, &LcnConfig::default()).unwrap();
        assert_eq!(l.label, Label::Ordered);
        assert!(l.chi_final.unwrap().abs() < 1e-6);
    }

    #[test]
    fn short_horizon_is_rejected() {
        let p = WaveParams::with_c2(0.0);
        let rec = integrate(&p, PhasePoint::new(3.0, -2.0, 0.0), &IntegratorConfig::with_t_final(10.0)).unwrap();
        assert!(matches!(
            classify_escape(&p, &rec, DEFAULT_MARGIN, DEFAULT_ESCAPE_HORIZON),
            Err(ChaosError::HorizonTooShort { .. })
        ));
        assert_eq!(classify_escape(&p, &rec, DEFAULT_MARGIN, 5.0).unwrap().label, Label::Ordered);
    }

    #[test]
    fn lcn_rule() {
        let cfg = LcnConfig::default();
        assert_eq!(lcn_decision(&cfg, 1e4, 100.0, 10.0), Label::Chaotic);
        assert_eq!(lcn_decision(&cfg, 1e4, 9.2, 6.9), Label::Ordered);
        assert_eq!(lcn_decision(&cfg, 1e4, 25.0, 10.0), Label::Undetermined);
    }
}
