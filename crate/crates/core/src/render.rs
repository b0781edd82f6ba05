//! PNG rendering of pattern grids.
//!
//! One pixel per cell (optionally upscaled), row 0 of the image at the top of
//! the y range so the origin sits at the lower left. A vertical legend bar is
//! drawn to the right of the map. Axis annotations go to a sidecar text file
//! next to the image.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::pattern::PatternGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorScale {
    Linear,
    #[default]
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    pub scale: ColorScale,
    /// Pixels per cell along each axis.
    pub pixels_per_cell: u32,
    pub legend_width: u32,
    pub legend_gap: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            scale: ColorScale::Log,
            pixels_per_cell: 1,
            legend_width: 16,
            legend_gap: 6,
        }
    }
}

/// Control points of the spectral map, low to high.
const SPECTRAL: [[u8; 3]; 9] = [
    [50, 40, 120],
    [50, 110, 180],
    [90, 180, 170],
    [170, 220, 165],
    [240, 245, 170],
    [253, 205, 120],
    [245, 140, 80],
    [215, 70, 75],
    [160, 5, 65],
];

/// Spectral colormap on `[0, 1]`.
pub fn spectral(v: f64) -> [u8; 3] {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let pos = v * (SPECTRAL.len() - 1) as f64;
    let i = (pos.floor() as usize).min(SPECTRAL.len() - 2);
    let f = pos - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let a = SPECTRAL[i][c] as f64;
        let b = SPECTRAL[i + 1][c] as f64;
        out[c] = (a + f * (b - a)).round() as u8;
    }
    out
}

fn level(count: u64, max: u64, scale: ColorScale) -> f64 {
    if max == 0 {
        return 0.0;
    }
    match scale {
        ColorScale::Linear => count as f64 / max as f64,
        ColorScale::Log => (count as f64).ln_1p() / (max as f64).ln_1p(),
    }
}

/// Build the image in memory.
pub fn render_image(grid: &PatternGrid, opts: &RenderOptions) -> RgbImage {
    let ppc = opts.pixels_per_cell.max(1);
    let (nx, ny) = (grid.geometry.nx as u32, grid.geometry.ny as u32);
    let map_w = nx * ppc;
    let h = ny * ppc;
    let w = map_w + opts.legend_gap + opts.legend_width;
    let max = grid.counts.iter().copied().max().unwrap_or(0);
    let mut img: RgbImage = ImageBuffer::from_pixel(w, h, Rgb([255, 255, 255]));
    for py in 0..h {
        let j = (ny - 1 - py / ppc) as usize;
        for px in 0..map_w {
            let i = (px / ppc) as usize;
            let c = grid.count_at(i, j);
            img.put_pixel(px, py, Rgb(spectral(level(c, max, opts.scale))));
        }
        let v = 1.0 - py as f64 / (h.max(2) - 1) as f64;
        for px in map_w + opts.legend_gap..w {
            img.put_pixel(px, py, Rgb(spectral(v)));
        }
    }
    img
}

/// Path of the sidecar text file for `image_path`.
pub fn sidecar_path(image_path: &Path) -> PathBuf {
    let mut s = image_path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

pub fn sidecar_text(grid: &PatternGrid, opts: &RenderOptions, note: Option<&str>) -> String {
    let g = &grid.geometry;
    let max = grid.counts.iter().copied().max().unwrap_or(0);
    let mut s = String::new();
    if let Some(n) = note {
        s.push_str(&format!("note: {n}\n"));
    }
    s.push_str(&format!(
        "x: [{}, {}] left to right, {} cells\ny: [{}, {}] bottom to top, {} cells\n",
        g.x_min, g.x_max, g.nx, g.y_min, g.y_max, g.ny
    ));
    s.push_str(&format!(
        "pixels_per_cell: {}\nscale: {:?}\ncolor range: 0 .. {} counts (legend bar on the right, bottom = 0)\n",
        opts.pixels_per_cell.max(1),
        opts.scale,
        max
    ));
    s.push_str(&format!(
        "t_range: [{}, {}]\nsample_dt: {}\ntrajectories: {}\ntotal counts: {}\noverflow: {}\n",
        grid.t_range.0,
        grid.t_range.1,
        grid.sample_dt,
        grid.n_trajectories,
        grid.total(),
        grid.overflow
    ));
    s
}

/// Write the PNG and its sidecar. Output is byte-identical for identical grids.
pub fn render(
    grid: &PatternGrid,
    path: &Path,
    opts: &RenderOptions,
    note: Option<&str>,
) -> std::io::Result<()> {
    let img = render_image(grid, opts);
    let mut out = BufWriter::new(File::create(path)?);
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(std::io::Error::other)?;
    out.flush()?;
    std::fs::write(sidecar_path(path), sidecar_text(grid, opts, note))
}
