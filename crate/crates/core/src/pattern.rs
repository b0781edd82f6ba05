//! Point-count patterns of trajectory ensembles and Frobenius distances.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::PatternError;
use crate::integrate::TrajectoryRecord;
use crate::wave::PhasePoint;

pub const GRID_CELLS: usize = 360;
pub const GRID_HALF_WIDTH: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for GridGeometry {
    fn default() -> Self {
        Self::square(GRID_CELLS, GRID_HALF_WIDTH)
    }
}

impl GridGeometry {
    pub fn square(cells: usize, half_width: f64) -> Self {
        Self {
            nx: cells,
            ny: cells,
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    pub fn cell_width(&self) -> (f64, f64) {
        (
            (self.x_max - self.x_min) / self.nx as f64,
            (self.y_max - self.y_min) / self.ny as f64,
        )
    }

    /// Row-major index `j * nx + i` of the half-open cell holding `(x, y)`.
    pub fn cell_index(&self, x: f64, y: f64) -> Option<usize> {
        let (wx, wy) = self.cell_width();
        let fi = ((x - self.x_min) / wx).floor();
        let fj = ((y - self.y_min) / wy).floor();
        if fi >= 0.0 && fj >= 0.0 && fi < self.nx as f64 && fj < self.ny as f64 {
            Some(fj as usize * self.nx + fi as usize)
        } else {
            None
        }
    }

    /// Center of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let (wx, wy) = self.cell_width();
        (
            self.x_min + (i as f64 + 0.5) * wx,
            self.y_min + (j as f64 + 0.5) * wy,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn is_sane(&self) -> bool {
        self.nx > 0
            && self.ny > 0
            && self.nx.checked_mul(self.ny).is_some_and(|n| n <= 1 << 26)
            && [self.x_min, self.x_max, self.y_min, self.y_max]
                .iter()
                .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }
}

/// Counts of sampled trajectory points per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternGrid {
    pub geometry: GridGeometry,
    pub sample_dt: f64,
    pub t_range: (f64, f64),
    pub n_trajectories: u64,
    /// Samples that fell outside the grid.
    pub overflow: u64,
    pub counts: Vec<u64>,
}

fn same_dt(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl PatternGrid {
    pub fn new(sample_dt: f64) -> Self {
        Self::with_geometry(GridGeometry::default(), sample_dt)
    }

    pub fn with_geometry(geometry: GridGeometry, sample_dt: f64) -> Self {
        Self {
            geometry,
            sample_dt,
            t_range: (0.0, 0.0),
            n_trajectories: 0,
            overflow: 0,
            counts: vec![0; geometry.len()],
        }
    }

    pub fn add_point(&mut self, x: f64, y: f64) {
        match self.geometry.cell_index(x, y) {
            Some(c) => self.counts[c] += 1,
            None => self.overflow += 1,
        }
    }

    pub fn count_at(&self, i: usize, j: usize) -> u64 {
        self.counts[j * self.geometry.nx + i]
    }

    /// Add every sample of `record` and count it as one trajectory.
    pub fn accumulate(&mut self, record: &TrajectoryRecord) -> Result<(), PatternError> {
        if !same_dt(self.sample_dt, record.sample_dt) {
            return Err(PatternError::SampleDtMismatch {
                grid: self.sample_dt,
                record: record.sample_dt,
            });
        }
        self.accumulate_points(&record.samples);
        self.n_trajectories += 1;
        Ok(())
    }

    pub fn accumulate_points(&mut self, points: &[PhasePoint]) {
        for p in points {
            self.add_point(p.x, p.y);
        }
        if let (Some(first), Some(last)) = (points.first(), points.last()) {
            self.extend_t_range(first.t.min(last.t), first.t.max(last.t));
        }
    }

    fn extend_t_range(&mut self, lo: f64, hi: f64) {
        if self.n_trajectories == 0 && self.t_range == (0.0, 0.0) {
            self.t_range = (lo, hi);
        } else {
            self.t_range = (self.t_range.0.min(lo), self.t_range.1.max(hi));
        }
    }

    /// Add `other` into `self`. Trajectory counts add as well.
    pub fn merge(&mut self, other: &PatternGrid) -> Result<(), PatternError> {
        if self.geometry != other.geometry {
            return Err(PatternError::GeometryMismatch);
        }
        if !same_dt(self.sample_dt, other.sample_dt) {
            return Err(PatternError::SampleDtMismatch {
                grid: self.sample_dt,
                record: other.sample_dt,
            });
        }
        let empty = self.n_trajectories == 0 && self.t_range == (0.0, 0.0);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.n_trajectories += other.n_trajectories;
        self.t_range = if empty {
            other.t_range
        } else {
            (self.t_range.0.min(other.t_range.0), self.t_range.1.max(other.t_range.1))
        };
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.counts
            .iter()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(&self, normalization: Normalization) -> Vec<f64> {
        let w: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        normalize(&w, normalization)
    }

    pub fn header(&self) -> DumpHeader {
        DumpHeader {
            extent: [
                self.geometry.x_min,
                self.geometry.x_max,
                self.geometry.y_min,
                self.geometry.y_max,
            ],
            nx: self.geometry.nx,
            ny: self.geometry.ny,
            sample_dt: self.sample_dt,
            t_range: [self.t_range.0, self.t_range.1],
            n_trajectories: self.n_trajectories,
            overflow: self.overflow,
            note: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each matrix scaled to total mass 1.
    UnitMass,
    /// Each matrix scaled to Frobenius norm 1.
    #[default]
    UnitFrobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternDistance {
    pub value: f64,
    pub normalization: Normalization,
}

/// Scale non-negative weights per `normalization`. An all-zero input stays zero.
pub fn normalize(w: &[f64], normalization: Normalization) -> Vec<f64> {
    let scale = match normalization {
        Normalization::UnitMass => w.iter().sum::<f64>(),
        Normalization::UnitFrobenius => w.iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    if scale > 0.0 {
        w.iter().map(|v| v / scale).collect()
    } else {
        vec![0.0; w.len()]
    }
}

/// Frobenius norm of the difference of two weight matrices after normalization.
pub fn weight_distance(a: &[f64], b: &[f64], normalization: Normalization) -> f64 {
    assert_eq!(a.len(), b.len(), "weight matrices differ in size");
    let na = normalize(a, normalization);
    let nb = normalize(b, normalization);
    na.iter()
        .zip(&nb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn frobenius_distance(
    a: &PatternGrid,
    b: &PatternGrid,
    normalization: Normalization,
) -> Result<PatternDistance, PatternError> {
    if a.geometry != b.geometry {
        return Err(PatternError::GeometryMismatch);
    }
    let wa: Vec<f64> = a.counts.iter().map(|&c| c as f64).collect();
    let wb: Vec<f64> = b.counts.iter().map(|&c| c as f64).collect();
    Ok(PatternDistance {
        value: weight_distance(&wa, &wb, normalization),
        normalization,
    })
}

/// `D(t)` between two sequences of cumulative patterns at shared checkpoints.
pub fn distance_curve(
    a: &[(f64, PatternGrid)],
    b: &[(f64, PatternGrid)],
    normalization: Normalization,
) -> Result<Vec<(f64, f64)>, PatternError> {
    if a.len() != b.len() {
        return Err(PatternError::Decode("checkpoint lists differ in length".into()));
    }
    a.iter()
        .zip(b)
        .map(|((ta, pa), (tb, pb))| {
            if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
                return Err(PatternError::Decode(format!("checkpoints {ta} and {tb} differ")));
            }
            Ok((*ta, frobenius_distance(pa, pb, normalization)?.value))
        })
        .collect()
}

/// `D` between each cumulative pattern and the one at the previous checkpoint.
pub fn successive_distances(
    series: &[(f64, PatternGrid)],
    normalization: Normalization,
) -> Result<Vec<(f64, f64)>, PatternError> {
    series
        .windows(2)
        .map(|w| Ok((w[1].0, frobenius_distance(&w[0].1, &w[1].1, normalization)?.value)))
        .collect()
}

pub fn write_curve_csv<W: Write>(curve: &[(f64, f64)], comment: Option<&str>, mut out: W) -> std::io::Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "t,D")?;
    for (t, d) in curve {
        writeln!(out, "{t},{d:e}")?;
    }
    Ok(())
}

/// First line of the binary dump.
pub const DUMP_MAGIC: &str = "BOHM-PATTERN v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpHeader {
    /// `[x_min, x_max, y_min, y_max]`.
    pub extent: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub sample_dt: f64,
    pub t_range: [f64; 2],
    pub n_trajectories: u64,
    pub overflow: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DumpHeader {
    fn geometry(&self) -> Result<GridGeometry, PatternError> {
        let g = GridGeometry {
            nx: self.nx,
            ny: self.ny,
            x_min: self.extent[0],
            x_max: self.extent[1],
            y_min: self.extent[2],
            y_max: self.extent[3],
        };
        if !g.is_sane() {
            return Err(PatternError::Decode("implausible grid geometry".into()));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(PatternError::Decode("sample_dt must be positive".into()));
        }
        Ok(g)
    }

    fn into_grid(self, counts: Vec<u64>) -> Result<PatternGrid, PatternError> {
        let geometry = self.geometry()?;
        Ok(PatternGrid {
            geometry,
            sample_dt: self.sample_dt,
            t_range: (self.t_range[0], self.t_range[1]),
            n_trajectories: self.n_trajectories,
            overflow: self.overflow,
            counts,
        })
    }
}

/// Binary dump: the magic line, one line of JSON header, then `nx * ny`
/// little-endian `u64` counts in row-major order (x fastest).
pub fn write_dump<W: Write>(grid: &PatternGrid, note: Option<&str>, mut out: W) -> std::io::Result<()> {
    let header = DumpHeader {
        note: note.map(str::to_string),
        ..grid.header()
    };
    writeln!(out, "{DUMP_MAGIC}")?;
    writeln!(out, "{}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
    let mut buf = Vec::with_capacity(grid.counts.len() * 8);
    for c in &grid.counts {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    out.write_all(&buf)
}

const MAX_HEADER_LINE: u64 = 1 << 16;

fn read_line_limited<R: BufRead>(input: &mut R, what: &str) -> Result<String, PatternError> {
    let mut line = String::new();
    let n = input
        .by_ref()
        .take(MAX_HEADER_LINE)
        .read_line(&mut line)
        .map_err(|e| PatternError::Decode(format!("{what}: {e}")))?;
    if n == 0 || !line.ends_with('\n') {
        return Err(PatternError::Decode(format!("{what}: missing or overlong line")));
    }
    line.pop();
    Ok(line)
}

pub fn read_dump<R: BufRead>(mut input: R) -> Result<(PatternGrid, Option<String>), PatternError> {
    if read_line_limited(&mut input, "magic")? != DUMP_MAGIC {
        return Err(PatternError::Decode("not a pattern dump".into()));
    }
    let header: DumpHeader = serde_json::from_str(&read_line_limited(&mut input, "header")?)
        .map_err(|e| PatternError::Decode(format!("header: {e}")))?;
    let len = header.geometry()?.len();
    let mut bytes = Vec::new();
    input
        .take(len as u64 * 8 + 1)
        .read_to_end(&mut bytes)
        .map_err(|e| PatternError::Decode(e.to_string()))?;
    if bytes.len() != len * 8 {
        return Err(PatternError::Decode(format!(
            "expected {} bytes of counts, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let counts = bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let note = header.note.clone();
    Ok((header.into_grid(counts)?, note))
}

/// CSV dump: a `# {json header}` comment line, then one row of counts per
/// y cell starting from the bottom.
pub fn write_dump_csv<W: Write>(grid: &PatternGrid, note: Option<&str>, mut out: W) -> std::io::Result<()> {
    let header = DumpHeader {
        note: note.map(str::to_string),
        ..grid.header()
    };
    writeln!(out, "# {}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
    for row in grid.counts.chunks(grid.geometry.nx) {
        let line: Vec<String> = row.iter().map(u64::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_dump_csv<R: BufRead>(mut input: R) -> Result<(PatternGrid, Option<String>), PatternError> {
    let first = read_line_limited(&mut input, "header")?;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| PatternError::Decode("missing '# ' header".into()))?;
    let header: DumpHeader =
        serde_json::from_str(json).map_err(|e| PatternError::Decode(format!("header: {e}")))?;
    let g = header.geometry()?;
    let mut counts = Vec::with_capacity(g.len());
    for (j, line) in input.lines().enumerate() {
        let line = line.map_err(|e| PatternError::Decode(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        if j >= g.ny {
            return Err(PatternError::Decode("too many rows".into()));
        }
        let before = counts.len();
        for field in line.split(',') {
            counts.push(
                field
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| PatternError::Decode(format!("row {j}: bad count {field:?}")))?,
            );
        }
        if counts.len() - before != g.nx {
            return Err(PatternError::Decode(format!("row {j}: expected {} fields", g.nx)));
        }
    }
    if counts.len() != g.len() {
        return Err(PatternError::Decode("wrong number of rows".into()));
    }
    let note = header.note.clone();
    Ok((header.into_grid(counts)?, note))
}
