//! Initial particle distributions.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::SampleError;
use crate::params::WaveParams;
use crate::wave::{dominant_blob, BlobKind, FieldFrame, PhasePoint};

/// Half-width of the square sampling window.
pub const SAMPLE_WINDOW: f64 = 9.0;
/// Points per axis of the grid used to bound `|Psi_0|^2`.
pub const ENVELOPE_GRID: usize = 721;
const ENVELOPE_SAFETY: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlobTag {
    Main,
    Secondary,
    /// Index into the custom center list.
    Custom(u32),
}

impl From<BlobKind> for BlobTag {
    fn from(k: BlobKind) -> Self {
        match k {
            BlobKind::Main => BlobTag::Main,
            BlobKind::Secondary => BlobTag::Secondary,
        }
    }
}

impl fmt::Display for BlobTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlobTag::Main => f.write_str("main"),
            BlobTag::Secondary => f.write_str("secondary"),
            BlobTag::Custom(i) => write!(f, "custom{i}"),
        }
    }
}

impl FromStr for BlobTag {
    type Err = SampleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main" => Ok(BlobTag::Main),
            "secondary" => Ok(BlobTag::Secondary),
            _ => s
                .strip_prefix("custom")
                .and_then(|n| n.parse().ok())
                .map(BlobTag::Custom)
                .ok_or_else(|| SampleError::Decode(format!("unknown blob tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Born,
    TwoBlobMixture,
    CustomBlob,
}

/// Which trajectories a custom blob keeps. Anything other than `Any` needs a
/// classifier, see [`sample_custom_filtered`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Any,
    Ordered,
    Chaotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomCenter {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    #[serde(default)]
    pub select: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n_particles: usize,
    /// Fraction on the upper-left blob.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    /// Fraction on the lower-right blob.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub centers: Vec<CustomCenter>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn born(n_particles: usize, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::Born,
            n_particles,
            p1: None,
            p2: None,
            centers: Vec::new(),
            seed,
        }
    }

    pub fn mixture(n_particles: usize, p1: f64, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::TwoBlobMixture,
            n_particles,
            p1: Some(p1),
            p2: Some(1.0 - p1),
            centers: Vec::new(),
            seed,
        }
    }

    pub fn custom(centers: Vec<CustomCenter>, seed: u64) -> Self {
        let n = centers.iter().map(|c| c.weight).sum::<f64>().round() as usize;
        Self {
            kind: EnsembleKind::CustomBlob,
            n_particles: n,
            p1: None,
            p2: None,
            centers,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        let bad = |m: String| Err(SampleError::Spec(m));
        if self.n_particles == 0 {
            return bad("n_particles must be positive".into());
        }
        match self.kind {
            EnsembleKind::Born => {}
            EnsembleKind::TwoBlobMixture => {
                let (Some(p1), Some(p2)) = (self.p1, self.p2) else {
                    return bad("two_blob_mixture needs p1 and p2".into());
                };
                if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
                    return bad(format!("fractions must lie in [0,1] (p1={p1}, p2={p2})"));
                }
                if (p1 + p2 - 1.0).abs() > 1e-9 {
                    return bad(format!("p1 + p2 must be 1 (got {})", p1 + p2));
                }
            }
            EnsembleKind::CustomBlob => {
                if self.centers.is_empty() {
                    return bad("custom_blob needs at least one center".into());
                }
                for c in &self.centers {
                    if !(c.x.is_finite() && c.y.is_finite() && c.weight.is_finite() && c.weight >= 0.0) {
                        return bad("custom centers need finite coordinates and non-negative weights".into());
                    }
                }
                if self.centers.iter().all(|c| c.weight == 0.0) {
                    return bad("custom weights must not all vanish".into());
                }
            }
        }
        Ok(())
    }

    /// Particles per custom center, by largest remainder so they sum to `n_particles`.
    pub fn center_counts(&self) -> Vec<usize> {
        let total: f64 = self.centers.iter().map(|c| c.weight).sum();
        let n = self.n_particles;
        let quotas: Vec<f64> = self
            .centers
            .iter()
            .map(|c| n as f64 * c.weight / total)
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut left = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for i in order {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    pub points: Vec<PhasePoint>,
    pub tags: Vec<BlobTag>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, tag: BlobTag) -> usize {
        self.tags.iter().filter(|&&t| t == tag).count()
    }

    /// `(p1, p2)`: fractions tagged secondary (upper left) and main.
    pub fn blob_fractions(&self) -> (f64, f64) {
        let n = self.len().max(1) as f64;
        (
            self.count(BlobTag::Secondary) as f64 / n,
            self.count(BlobTag::Main) as f64 / n,
        )
    }

    fn push(&mut self, p: PhasePoint, tag: BlobTag) {
        self.points.push(p);
        self.tags.push(tag);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SampleError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "x0", "y0", "blob_tag"])
            .map_err(csv_err)?;
        for (i, (p, tag)) in self.points.iter().zip(&self.tags).enumerate() {
            w.write_record([
                i.to_string(),
                format!("{:?}", p.x),
                format!("{:?}", p.y),
                tag.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a particle file. Indices must run 0, 1, 2, ... in order.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, SampleError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = r.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["index", "x0", "y0", "blob_tag"] {
            return Err(SampleError::Decode(format!("unexpected header {headers:?}")));
        }
        let mut set = ParticleSet::default();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 4 {
                return Err(SampleError::Decode(format!("row {row}: expected 4 fields")));
            }
            let num = |i: usize| -> Result<f64, SampleError> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| SampleError::Decode(format!("row {row}: bad number {:?}", &rec[i])))
            };
            let idx: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| SampleError::Decode(format!("row {row}: bad index")))?;
            if idx != row {
                return Err(SampleError::Decode(format!("row {row}: index {idx} out of order")));
            }
            set.push(PhasePoint::new(num(1)?, num(2)?, 0.0), rec[3].trim().parse()?);
        }
        Ok(set)
    }
}

fn csv_err(e: csv::Error) -> SampleError {
    SampleError::Decode(e.to_string())
}

/// Bookkeeping of a rejection-sampling run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionStats {
    pub envelope: f64,
    pub attempts: u64,
    pub accepted: u64,
}

impl RejectionStats {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.attempts.max(1) as f64
    }
}

/// Maximum of `|Psi(t)|^2` over a regular grid on the sampling window.
pub fn grid_max_density(params: &WaveParams, t: f64, points: usize) -> f64 {
    let frame = FieldFrame::new(params, t);
    let step = 2.0 * SAMPLE_WINDOW / (points - 1) as f64;
    let mut best: f64 = 0.0;
    for j in 0..points {
        let y = -SAMPLE_WINDOW + j as f64 * step;
        for i in 0..points {
            let x = -SAMPLE_WINDOW + i as f64 * step;
            best = best.max(frame.density(x, y));
        }
    }
    best
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rejection samples of `|Psi_0|^2` on `[-9, 9]^2`, tagged by dominant term.
pub fn sample_born(params: &WaveParams, n: usize, seed: u64) -> ParticleSet {
    sample_born_with_stats(params, n, seed).0
}

pub fn sample_born_with_stats(params: &WaveParams, n: usize, seed: u64) -> (ParticleSet, RejectionStats) {
    let frame = FieldFrame::new(params, 0.0);
    let envelope = ENVELOPE_SAFETY * grid_max_density(params, 0.0, ENVELOPE_GRID);
    let mut rng = rng_for(seed);
    let mut set = ParticleSet::default();
    let mut attempts = 0u64;
    while set.len() < n {
        attempts += 1;
        let x = rng.random_range(-SAMPLE_WINDOW..SAMPLE_WINDOW);
        let y = rng.random_range(-SAMPLE_WINDOW..SAMPLE_WINDOW);
        let u: f64 = rng.random();
        if u * envelope < frame.density(x, y) && frame.velocity(x, y).is_ok() {
            let p = PhasePoint::new(x, y, 0.0);
            set.push(p, dominant_blob(params, &p).into());
        }
    }
    let stats = RejectionStats {
        envelope,
        attempts,
        accepted: n as u64,
    };
    (set, stats)
}

/// Standard deviations of a single product-term blob.
pub fn blob_sigma(params: &WaveParams) -> (f64, f64) {
    ((0.5 / params.omega_x).sqrt(), (0.5 / params.omega_y).sqrt())
}

struct GaussianBlob {
    nx: Normal<f64>,
    ny: Normal<f64>,
}

impl GaussianBlob {
    fn new(params: &WaveParams, x: f64, y: f64) -> Self {
        let (sx, sy) = blob_sigma(params);
        Self {
            nx: Normal::new(x, sx).expect("positive sigma"),
            ny: Normal::new(y, sy).expect("positive sigma"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, frame: &FieldFrame) -> PhasePoint {
        loop {
            let x = self.nx.sample(rng);
            let y = self.ny.sample(rng);
            if frame.velocity(x, y).is_ok() {
                return PhasePoint::new(x, y, 0.0);
            }
        }
    }
}

/// Two-blob mixtures and custom blobs without selection filters.
pub fn sample_mixture(params: &WaveParams, spec: &EnsembleSpec) -> Result<ParticleSet, SampleError> {
    if spec.centers.iter().any(|c| c.select != Selection::Any) {
        return Err(SampleError::Spec(
            "filtered custom blobs need a classifier; use sample_custom_filtered".into(),
        ));
    }
    sample_custom_filtered(params, spec, |_, _| true, 1)
}

/// Sample any ensemble kind. Points drawn for a custom center whose
/// `select` is not `Any` are kept only if `keep(select, point)` holds;
/// at most `max_draws` candidates per requested particle are tried.
pub fn sample_custom_filtered(
    params: &WaveParams,
    spec: &EnsembleSpec,
    mut keep: impl FnMut(Selection, &PhasePoint) -> bool,
    max_draws: usize,
) -> Result<ParticleSet, SampleError> {
    spec.validate()?;
    let frame = FieldFrame::new(params, 0.0);
    let mut rng = rng_for(spec.seed);
    let mut set = ParticleSet::default();
    match spec.kind {
        EnsembleKind::Born => return Ok(sample_born(params, spec.n_particles, spec.seed)),
        EnsembleKind::TwoBlobMixture => {
            let p1 = spec.p1.unwrap_or(0.0);
            let n1 = (spec.n_particles as f64 * p1).round() as usize;
            let n2 = spec.n_particles - n1;
            let (ax, ay) = (params.amplitude_x(), params.amplitude_y());
            let main = GaussianBlob::new(params, ax, -ay);
            let secondary = GaussianBlob::new(params, -ax, ay);
            for _ in 0..n1 {
                set.push(secondary.draw(&mut rng, &frame), BlobTag::Secondary);
            }
            for _ in 0..n2 {
                set.push(main.draw(&mut rng, &frame), BlobTag::Main);
            }
        }
        EnsembleKind::CustomBlob => {
            for (i, (c, count)) in spec.centers.iter().zip(spec.center_counts()).enumerate() {
                let blob = GaussianBlob::new(params, c.x, c.y);
                let mut kept = 0;
                let mut draws = 0;
                while kept < count {
                    if draws >= max_draws.max(1) * count {
                        return Err(SampleError::Spec(format!(
                            "custom center {i}: only {kept} of {count} candidates passed the {:?} filter",
                            c.select
                        )));
                    }
                    draws += 1;
                    let p = blob.draw(&mut rng, &frame);
                    if c.select == Selection::Any || keep(c.select, &p) {
                        set.push(p, BlobTag::Custom(i as u32));
                        kept += 1;
                    }
                }
            }
        }
    }
    Ok(set)
}
