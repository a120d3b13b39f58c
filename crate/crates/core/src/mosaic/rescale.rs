use image::Rgb;

use super::Canvas;

/// Bilinear resampling to `target_w × target_h` with pixel-center
/// alignment; edges clamp. Aspect ratio may change.
pub fn rescale(canvas: &Canvas, target_w: u32, target_h: u32) -> Canvas {
    let (sw, sh) = canvas.dimensions();
    if (sw, sh) == (target_w.max(1), target_h.max(1)) {
        return canvas.clone();
    }
    resample_region(canvas, [0.0, 0.0, f64::from(sw), f64::from(sh)], target_w, target_h)
}

/// Bilinear resampling of the source rectangle `[x0, y0, x1, y1)` (in
/// source pixel units, edges not necessarily on pixel boundaries) onto a
/// `target_w × target_h` canvas. Output pixel `(i, j)` samples the source
/// at `x0 + (i + ½)·(x1 - x0)/target_w - ½` and likewise vertically.
pub fn resample_region(canvas: &Canvas, region: [f64; 4], target_w: u32, target_h: u32) -> Canvas {
    let (sw, sh) = canvas.dimensions();
    let (tw, th) = (target_w.max(1), target_h.max(1));
    let [x0, y0, x1, y1] = region;
    let sx = (x1 - x0) / f64::from(tw);
    let sy = (y1 - y0) / f64::from(th);
    let axis = |dst: u32, origin: f64, ratio: f64, len: u32| -> (u32, u32, f64) {
        let pos = (origin + (f64::from(dst) + 0.5) * ratio - 0.5).clamp(0.0, f64::from(len - 1));
        let lo = pos.floor() as u32;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, pos - f64::from(lo))
    };
    let cols: Vec<_> = (0..tw).map(|x| axis(x, x0, sx, sw)).collect();
    let rows: Vec<_> = (0..th).map(|y| axis(y, y0, sy, sh)).collect();
    Canvas::from_fn(tw, th, |x, y| {
        let (x0, x1, fx) = cols[x as usize];
        let (y0, y1, fy) = rows[y as usize];
        let (a, b) = (canvas.get_pixel(x0, y0).0, canvas.get_pixel(x1, y0).0);
        let (c, d) = (canvas.get_pixel(x0, y1).0, canvas.get_pixel(x1, y1).0);
        let mut out = [0u8; 3];
        for k in 0..3 {
            let top = f64::from(a[k]) * (1.0 - fx) + f64::from(b[k]) * fx;
            let bottom = f64::from(c[k]) * (1.0 - fx) + f64::from(d[k]) * fx;
            out[k] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    })
}
