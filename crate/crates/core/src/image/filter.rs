use super::{CropRect, ImagePlane};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Normalized 1-D Gaussian taps over `[-radius, radius]`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Half-sample symmetric reflection: `-1 -> 0`, `n -> n - 1`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if i < 0 {
        (-i - 1) as usize
    } else if i >= n {
        (2 * n - i - 1) as usize
    } else {
        i as usize
    }
}

/// Separable Gaussian blur with symmetric border reflection.
pub fn gaussian_filter(p: &ImagePlane, sigma: f64, radius: usize) -> Result<ImagePlane> {
    if !(sigma > 0.0) || radius == 0 {
        return Err(Error::Invalid(format!("gaussian_filter needs sigma > 0 and radius >= 1 (got {sigma}, {radius})")));
    }
    let (w, h) = (p.width(), p.height());
    if radius >= w.min(h) {
        return Err(Error::dim(format!("radius {radius} too large for {w}x{h} plane")));
    }
    let k = gaussian_kernel(sigma, radius);
    let r = radius as isize;
    let src = p.data();

    let mut tmp = vec![0.0; w * h];
    let mut padded = vec![0.0; w + 2 * radius];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (i, slot) in padded.iter_mut().enumerate() {
            *slot = row[reflect(i as isize - r, w)];
        }
        let out = &mut tmp[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            *o = padded[x..x + k.len()].iter().zip(&k).map(|(a, b)| a * b).sum();
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (ti, &kt) in k.iter().enumerate() {
            let sy = reflect(y as isize + ti as isize - r, h);
            let row = &tmp[sy * w..(sy + 1) * w];
            for (d, &s) in dst.iter_mut().zip(row) {
                *d += kt * s;
            }
        }
    }
    Ok(ImagePlane::from_raw(w, h, out))
}

/// 2x2 box average; an odd trailing row or column is dropped.
pub fn downscale_half(p: &ImagePlane) -> Result<ImagePlane> {
    let (w, h) = (p.width(), p.height());
    if w < 2 || h < 2 {
        return Err(Error::dim(format!("cannot halve a {w}x{h} plane")));
    }
    let (ow, oh) = (w / 2, h / 2);
    let src = p.data();
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        let r0 = &src[2 * y * w..];
        let r1 = &src[(2 * y + 1) * w..];
        for x in 0..ow {
            out.push(((r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1])) * 0.25);
        }
    }
    Ok(ImagePlane::from_raw(ow, oh, out))
}

pub fn crop(p: &ImagePlane, r: CropRect) -> Result<ImagePlane> {
    if !r.fits(p.width(), p.height()) {
        return Err(Error::dim(format!("{r:?} outside {}x{} plane", p.width(), p.height())));
    }
    let mut out = Vec::with_capacity(r.w * r.h);
    for y in r.y..r.y + r.h {
        let start = y * p.width() + r.x;
        out.extend_from_slice(&p.data()[start..start + r.w]);
    }
    Ok(ImagePlane::from_raw(r.w, r.h, out))
}

/// Draws `count` square crops of side `size` with offsets uniform over all
/// valid positions. Each rect consumes two draws from a [`SplitMix64`]
/// seeded with `seed`: `x = below(w - size + 1)` then `y = below(h - size + 1)`.
pub fn random_crops(p: &ImagePlane, size: usize, count: usize, seed: u64) -> Result<Vec<CropRect>> {
    crop_rects(p.width(), p.height(), size, count, seed)
}

pub(crate) fn crop_rects(width: usize, height: usize, size: usize, count: usize, seed: u64) -> Result<Vec<CropRect>> {
    if size == 0 || size > width.min(height) {
        return Err(Error::dim(format!("crop size {size} does not fit {width}x{height}")));
    }
    let mut rng = SplitMix64::new(seed);
    Ok((0..count)
        .map(|_| {
            let x = rng.below((width - size + 1) as u64) as usize;
            let y = rng.below((height - size + 1) as u64) as usize;
            CropRect::new(x, y, size, size)
        })
        .collect())
}

/// Area-weighted 1-D resampling matrix rows: (first source index, weights).
fn area_weights(src: usize, dst: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = ((i + 1) as f64 * scale).min(src as f64);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            let weights: Vec<f64> = (first..last)
                .map(|s| ((s + 1) as f64).min(hi) - (s as f64).max(lo))
                .map(|c| c / (hi - lo))
                .collect();
            (first, weights)
        })
        .collect()
}

fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Box (area-average) resampling; meant for downscaling by any real factor.
pub fn resize_area(p: &ImagePlane, new_w: usize, new_h: usize) -> Result<ImagePlane> {
    if new_w == 0 || new_h == 0 || new_w > p.width() || new_h > p.height() {
        return Err(Error::dim(format!(
            "area resize {}x{} -> {new_w}x{new_h} is not a downscale",
            p.width(),
            p.height()
        )));
    }
    let (w, h) = (p.width(), p.height());
    let xw = area_weights(w, new_w);
    let yw = area_weights(h, new_h);
    let mut tmp = vec![0.0; new_w * h];
    for y in 0..h {
        let row = &p.data()[y * w..(y + 1) * w];
        for (x, (first, ws)) in xw.iter().enumerate() {
            tmp[y * new_w + x] = ws.iter().enumerate().map(|(i, c)| c * row[first + i]).sum();
        }
    }
    let mut out = vec![0.0; new_w * new_h];
    for (y, (first, ws)) in yw.iter().enumerate() {
        for (i, c) in ws.iter().enumerate() {
            let src = &tmp[(first + i) * new_w..(first + i + 1) * new_w];
            for (o, s) in out[y * new_w..(y + 1) * new_w].iter_mut().zip(src) {
                *o += c * s;
            }
        }
    }
    Ok(ImagePlane::from_raw(new_w, new_h, out))
}

/// Bilinear resampling with half-pixel-centred sample positions and edge clamping.
pub fn resize_bilinear(p: &ImagePlane, new_w: usize, new_h: usize) -> Result<ImagePlane> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::dim("bilinear target must be non-empty"));
    }
    let w = p.width();
    let xt = bilinear_taps(w, new_w);
    let yt = bilinear_taps(p.height(), new_h);
    let mut out = Vec::with_capacity(new_w * new_h);
    for &(y0, y1, fy) in &yt {
        let r0 = &p.data()[y0 * w..(y0 + 1) * w];
        let r1 = &p.data()[y1 * w..(y1 + 1) * w];
        for &(x0, x1, fx) in &xt {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
            out.push(top + (bot - top) * fy);
        }
    }
    Ok(ImagePlane::from_raw(new_w, new_h, out))
}
