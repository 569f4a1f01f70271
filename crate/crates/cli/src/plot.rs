//! Bare-bones PNG rendering of the rate fit. The CSVs are the real output;
//! the picture is a convenience for eyeballing a run.

use std::path::Path;

use image::{Rgb, RgbImage};
use oulab::{Error, Result};

const W: u32 = 640;
const H: u32 = 480;
const MARGIN: u32 = 48;

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const FRAME: Rgb<u8> = Rgb([120, 120, 120]);
const POINT: Rgb<u8> = Rgb([30, 60, 180]);
const LINE: Rgb<u8> = Rgb([190, 50, 40]);

/// Draws `points` (already in plot coordinates, e.g. log-log) plus the line
/// `y = intercept + slope * x` across the x-range, and writes a PNG.
pub fn scatter_with_fit(
    points: &[(f64, f64)],
    slope: f64,
    intercept: f64,
    path: &Path,
) -> Result<()> {
    assert!(!points.is_empty(), "nothing to plot");
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    // include the fitted line's endpoints in the vertical range
    for x in [x0, x1] {
        let y = intercept + slope * x;
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-12);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);

    let to_px = |x: f64, y: f64| {
        let fx = (x - x0) / (x1 - x0);
        let fy = (y - y0) / (y1 - y0);
        let px = MARGIN as f64 + fx * (W - 2 * MARGIN) as f64;
        let py = (H - MARGIN) as f64 - fy * (H - 2 * MARGIN) as f64;
        (px.round() as i64, py.round() as i64)
    };

    let mut img = RgbImage::from_pixel(W, H, BG);
    for x in MARGIN..=(W - MARGIN) {
        img.put_pixel(x, MARGIN, FRAME);
        img.put_pixel(x, H - MARGIN, FRAME);
    }
    for y in MARGIN..=(H - MARGIN) {
        img.put_pixel(MARGIN, y, FRAME);
        img.put_pixel(W - MARGIN, y, FRAME);
    }

    let mut put = |px: i64, py: i64, c: Rgb<u8>| {
        if px >= 0 && py >= 0 && (px as u32) < W && (py as u32) < H {
            img.put_pixel(px as u32, py as u32, c);
        }
    };

    // fitted line, sampled densely
    for step in 0..=800 {
        let x = x0 + (x1 - x0) * step as f64 / 800.0;
        let (px, py) = to_px(x, intercept + slope * x);
        put(px, py, LINE);
        put(px, py + 1, LINE);
    }
    // data points as filled squares
    for &(x, y) in points {
        let (px, py) = to_px(x, y);
        for dx in -2..=2 {
            for dy in -2..=2 {
                put(px + dx, py + dy, POINT);
            }
        }
    }

    img.save(path).map_err(|e| Error::Config(format!("write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_a_png() {
        let dir = std::env::temp_dir().join("oulab_plot_test");
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("fit.png");
        let pts = [(0.0, 1.0), (1.0, 1.4), (2.0, 2.1)];
        scatter_with_fit(&pts, 0.55, 0.9, &file).unwrap();
        let bytes = std::fs::read(&file).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
