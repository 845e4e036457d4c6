//! Static PNG line charts.
//!
//! Charts carry no text; series colors and axis meaning are fixed per file
//! and documented in the README.

use std::path::Path;

use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use crate::CliError;

pub const BLUE: [u8; 3] = [31, 119, 180];
pub const RED: [u8; 3] = [214, 39, 40];

const WIDTH: u32 = 800;
const HEIGHT: u32 = 480;
const MARGIN: f32 = 40.0;

pub struct Series<'a> {
    pub points: &'a [(f64, f64)],
    pub color: [u8; 3],
}

fn bounds(series: &[Series], log_y: bool) -> Option<(f64, f64, f64, f64)> {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in series.iter().flat_map(|s| s.points.iter().copied()) {
        let Some(y) = transform(y, log_y) else { continue };
        if !x.is_finite() {
            continue;
        }
        b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
    }
    if !b.0.is_finite() {
        return None;
    }
    if b.1 == b.0 {
        b.1 = b.0 + 1.0;
    }
    if b.3 == b.2 {
        b.2 -= 0.5;
        b.3 += 0.5;
    }
    Some(b)
}

fn transform(y: f64, log_y: bool) -> Option<f64> {
    let v = if log_y { y.log10() } else { y };
    v.is_finite().then_some(v)
}

/// Renders the series into `path`. Non-finite points (and non-positive
/// ones when `log_y`) are skipped and break the line.
pub fn line_chart(path: &Path, series: &[Series], log_y: bool) -> Result<(), CliError> {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([255, 255, 255]));
    let (w, h) = (WIDTH as f32 - 2.0 * MARGIN, HEIGHT as f32 - 2.0 * MARGIN);
    let grid = Rgb([225, 225, 225]);
    for i in 1..5 {
        let y = MARGIN + h * i as f32 / 5.0;
        let x = MARGIN + w * i as f32 / 5.0;
        draw_line_segment_mut(&mut img, (MARGIN, y), (MARGIN + w, y), grid);
        draw_line_segment_mut(&mut img, (x, MARGIN), (x, MARGIN + h), grid);
    }
    draw_hollow_rect_mut(
        &mut img,
        Rect::at(MARGIN as i32, MARGIN as i32).of_size(w as u32, h as u32),
        Rgb([0, 0, 0]),
    );
    if let Some((x0, x1, y0, y1)) = bounds(series, log_y) {
        let px = |x: f64| MARGIN + ((x - x0) / (x1 - x0)) as f32 * w;
        let py = |y: f64| MARGIN + h - ((y - y0) / (y1 - y0)) as f32 * h;
        for s in series {
            let mut prev: Option<(f32, f32)> = None;
            for &(x, y) in s.points {
                let cur = transform(y, log_y).filter(|_| x.is_finite()).map(|y| (px(x), py(y)));
                if let (Some(a), Some(b)) = (prev, cur) {
                    draw_line_segment_mut(&mut img, a, b, Rgb(s.color));
                } else if let Some(b) = cur {
                    img.put_pixel(b.0 as u32, b.1 as u32, Rgb(s.color));
                }
                prev = cur;
            }
        }
    }
    img.save(path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_a_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let pts = [(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0), (3.0, 0.5)];
        line_chart(&path, &[Series { points: &pts, color: BLUE }], true).unwrap();
        let img = image::open(&path).unwrap();
        assert_eq!((img.width(), img.height()), (WIDTH, HEIGHT));
        line_chart(&path, &[], false).unwrap();
    }
}
