//! Minimal PNG line plot of a running-average trace.

use image::{Rgb, RgbImage};

const W: u32 = 900;
const H: u32 = 540;
const MARGIN: u32 = 50;

/// Plot (t, value) traces against a horizontal target line.
pub fn running_average_png(
    path: &std::path::Path,
    traces: &[Vec<(f64, f64)>],
    target: f64,
) -> anyhow::Result<()> {
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut vmin, mut vmax) = (target, target);
    for trace in traces {
        for &(t, v) in trace {
            tmin = tmin.min(t);
            tmax = tmax.max(t);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
    }
    if !tmin.is_finite() || tmax <= tmin {
        anyhow::bail!("empty plot trace");
    }
    let pad = 0.08 * (vmax - vmin).max(1e-12);
    vmin -= pad;
    vmax += pad;
    let to_px = |t: f64, v: f64| -> (i64, i64) {
        let x = MARGIN as f64 + (t - tmin) / (tmax - tmin) * (W - 2 * MARGIN) as f64;
        let y = (H - MARGIN) as f64 - (v - vmin) / (vmax - vmin) * (H - 2 * MARGIN) as f64;
        (x as i64, y as i64)
    };

    // Axes.
    let axis = Rgb([60, 60, 60]);
    for x in MARGIN..(W - MARGIN) {
        img.put_pixel(x, H - MARGIN, axis);
    }
    for y in MARGIN..(H - MARGIN) {
        img.put_pixel(MARGIN, y, axis);
    }
    // Target line.
    let (_, ty) = to_px(tmin, target);
    if ty >= 0 && (ty as u32) < H {
        for x in MARGIN..(W - MARGIN) {
            img.put_pixel(x, ty as u32, Rgb([200, 40, 40]));
        }
    }
    // Traces.
    let palette = [
        Rgb([30, 90, 180]),
        Rgb([40, 140, 80]),
        Rgb([150, 90, 200]),
        Rgb([220, 140, 30]),
    ];
    for (i, trace) in traces.iter().enumerate() {
        let color = palette[i % palette.len()];
        for pair in trace.windows(2) {
            let (x0, y0) = to_px(pair[0].0, pair[0].1);
            let (x1, y1) = to_px(pair[1].0, pair[1].1);
            draw_line(&mut img, x0, y0, x1, y1, color);
        }
    }
    img.save(path)?;
    Ok(())
}

fn draw_line(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < W && (y as u32) < H {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
