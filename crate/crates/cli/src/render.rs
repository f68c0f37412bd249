//! Heatmaps of surface summaries.

use std::path::Path;

use anyhow::{bail, Context, Result};
use image::{Rgb, RgbImage};
use jsdm_odds::inference::SurfaceGrid;
use jsdm_odds::tables::Extended;

const MASK: Rgb<u8> = Rgb([190, 190, 190]);
/// Target width of an image in pixels.
const TARGET_PX: usize = 480;

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> Rgb<u8> {
    let c = |i: usize| (a[i] + (b[i] - a[i]) * t).round().clamp(0.0, 255.0) as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Blue below zero, white at zero, red above; `t` in `[-1, 1]`.
pub fn diverging(t: f64) -> Rgb<u8> {
    const BLUE: [f64; 3] = [33.0, 102.0, 172.0];
    const WHITE: [f64; 3] = [247.0, 247.0, 247.0];
    const RED: [f64; 3] = [178.0, 24.0, 43.0];
    let t = t.clamp(-1.0, 1.0);
    if t < 0.0 {
        lerp(WHITE, BLUE, -t)
    } else {
        lerp(WHITE, RED, t)
    }
}

/// Light yellow to dark green; `t` in `[0, 1]`.
pub fn sequential(t: f64) -> Rgb<u8> {
    lerp([255.0, 255.0, 204.0], [0.0, 90.0, 50.0], t.clamp(0.0, 1.0))
}

/// Paints one colour per node, north up. `None` marks a masked node.
fn paint(nx: usize, ny: usize, colours: &[Option<Rgb<u8>>], path: &Path) -> Result<()> {
    let cell = (TARGET_PX / nx).max(1);
    let mut img = RgbImage::new((nx * cell) as u32, (ny * cell) as u32);
    for iy in 0..ny {
        for ix in 0..nx {
            let c = colours[iy * nx + ix].unwrap_or(MASK);
            let top = (ny - 1 - iy) * cell;
            for dy in 0..cell {
                for dx in 0..cell {
                    img.put_pixel((ix * cell + dx) as u32, (top + dy) as u32, c);
                }
            }
        }
    }
    img.save_with_format(path, image::ImageFormat::Png).with_context(|| format!("writing {}", path.display()))
}

/// Posterior mean log10 odds ratio on a scale symmetric about 0; extremes
/// take the end colours. Returns the half-width of the scale.
pub fn log_theta_heatmap(s: &SurfaceGrid, path: &Path) -> Result<f64> {
    let Some(g) = s.grid else { bail!("surface has no regular grid to draw") };
    let limit = s
        .active()
        .filter_map(|n| n.mean_log10_theta.finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = if limit > 0.0 { limit } else { 1.0 };
    let colours: Vec<Option<Rgb<u8>>> = s
        .summaries
        .iter()
        .map(|n| {
            n.map(|n| match n.mean_log10_theta {
                Extended::NegInf => diverging(-1.0),
                Extended::PosInf => diverging(1.0),
                Extended::Finite(v) => diverging(v / limit),
            })
        })
        .collect();
    paint(g.nx, g.ny, &colours, path)?;
    Ok(limit)
}

/// Posterior mean joint-presence probability on `[0, max]`.
pub fn p11_heatmap(s: &SurfaceGrid, path: &Path) -> Result<f64> {
    let Some(g) = s.grid else { bail!("surface has no regular grid to draw") };
    let top = s.active().map(|n| n.p11_mean).fold(0.0f64, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    let colours: Vec<Option<Rgb<u8>>> = s.summaries.iter().map(|n| n.map(|n| sequential(n.p11_mean / top))).collect();
    paint(g.nx, g.ny, &colours, path)?;
    Ok(top)
}
