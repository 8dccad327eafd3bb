//! Procedural stand-in for a photographic corpus, plus directory loading.
//!
//! Images follow a dead-leaves model: occluding discs with a power-law size
//! distribution, each carrying its own smooth shading and fine texture, over
//! a gradient background, lightly band-limited. Such images share the
//! heavy-tailed gradient and scale-invariant statistics of natural scenes,
//! which is what the metric and distortion machinery needs. Generation is
//! fully determined by `(size, seed)`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{gaussian_filter, load_image, save_png, ImageBuffer, ImagePlane};
use crate::rng::{derive_seed_index, SplitMix64};

pub const DEFAULT_CORPUS_SIZE: usize = 30;
pub const DEFAULT_IMAGE_SIDE: usize = 384;

struct Leaf {
    cx: f64,
    cy: f64,
    radius: f64,
    aspect: f64,
    angle: f64,
    color: [f64; 3],
    /// linear shading gradient per unit offset
    shade: (f64, f64),
    texture_freq: f64,
    texture_amp: f64,
    texture_phase: f64,
}

fn random_color(rng: &mut SplitMix64) -> [f64; 3] {
    // muted palette: a base luminance with bounded chroma
    let base = 30.0 + 200.0 * rng.next_f64();
    let mut c = [0.0; 3];
    for v in c.iter_mut() {
        *v = (base + 60.0 * (rng.next_f64() - 0.5)).clamp(0.0, 255.0);
    }
    c
}

/// One synthetic RGB scene of `side x side` pixels.
pub fn generate_image(side: usize, seed: u64) -> Result<ImageBuffer> {
    if side < 32 {
        return Err(Error::dim(format!("corpus images must be at least 32 px, got {side}")));
    }
    let mut rng = SplitMix64::new(seed);
    let s = side as f64;
    let n = side * side;

    let bg_a = random_color(&mut rng);
    let bg_b = random_color(&mut rng);
    let bg_angle = rng.next_f64() * std::f64::consts::TAU;
    let (bx, by) = (bg_angle.cos(), bg_angle.sin());
    let mut planes = vec![vec![0.0; n]; 3];
    for y in 0..side {
        for x in 0..side {
            let t = (((x as f64 - s / 2.0) * bx + (y as f64 - s / 2.0) * by) / s + 0.5).clamp(0.0, 1.0);
            for c in 0..3 {
                planes[c][y * side + x] = bg_a[c] * (1.0 - t) + bg_b[c] * t;
            }
        }
    }

    // power-law radii, r ~ r^-3 between r_min and r_max (inverse-CDF sampling)
    let (r_min, r_max) = (2.0, s * 0.3);
    let leaves = 120 + rng.below(120) as usize;
    let mut list = Vec::with_capacity(leaves);
    for _ in 0..leaves {
        let u = rng.next_f64();
        let inv = 1.0 / (r_min * r_min) - u * (1.0 / (r_min * r_min) - 1.0 / (r_max * r_max));
        list.push(Leaf {
            cx: rng.next_f64() * s,
            cy: rng.next_f64() * s,
            radius: 1.0 / inv.sqrt(),
            aspect: 0.5 + rng.next_f64(),
            angle: rng.next_f64() * std::f64::consts::PI,
            color: random_color(&mut rng),
            shade: ((rng.next_f64() - 0.5) * 1.5, (rng.next_f64() - 0.5) * 1.5),
            texture_freq: 0.15 + 0.9 * rng.next_f64(),
            texture_amp: 12.0 * rng.next_f64(),
            texture_phase: rng.next_f64() * std::f64::consts::TAU,
        });
    }
    // large leaves first so small detail stays visible
    list.sort_by(|a, b| b.radius.total_cmp(&a.radius));

    for leaf in &list {
        let reach = leaf.radius * leaf.aspect.max(1.0 / leaf.aspect) + 1.5;
        let x0 = (leaf.cx - reach).floor().max(0.0) as usize;
        let x1 = ((leaf.cx + reach).ceil() as usize).min(side);
        let y0 = (leaf.cy - reach).floor().max(0.0) as usize;
        let y1 = ((leaf.cy + reach).ceil() as usize).min(side);
        let (ca, sa) = (leaf.angle.cos(), leaf.angle.sin());
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = x as f64 + 0.5 - leaf.cx;
                let dy = y as f64 + 0.5 - leaf.cy;
                let u = (dx * ca + dy * sa) / leaf.aspect;
                let v = (-dx * sa + dy * ca) * leaf.aspect;
                let dist = (u * u + v * v).sqrt();
                // anti-aliased edge, one pixel wide
                let cover = (leaf.radius - dist + 0.5).clamp(0.0, 1.0);
                if cover <= 0.0 {
                    continue;
                }
                let tex = leaf.texture_amp * (leaf.texture_freq * u + leaf.texture_phase).sin()
                    * (0.7 * leaf.texture_freq * v).cos();
                let shade = leaf.shade.0 * dx + leaf.shade.1 * dy;
                let i = y * side + x;
                for c in 0..3 {
                    let val = leaf.color[c] + shade + tex;
                    planes[c][i] = planes[c][i] * (1.0 - cover) + val * cover;
                }
            }
        }
    }

    // film-grain-like fine texture shared across channels, then mild optical blur
    let grain: Vec<f64> = (0..n).map(|_| 3.0 * rng.normal()).collect();
    let mut out = Vec::with_capacity(3);
    for mut p in planes {
        for (v, g) in p.iter_mut().zip(&grain) {
            *v += g;
        }
        let plane = ImagePlane::new(side, side, p)?;
        out.push(gaussian_filter(&plane, 0.6, 2)?);
    }
    ImageBuffer::from_planes(&out)
}

/// Content ids `c000`, `c001`, ... paired with generated images.
pub fn mini_corpus(count: usize, side: usize, seed: u64) -> Result<Vec<(String, ImageBuffer)>> {
    (0..count)
        .map(|i| Ok((format!("c{i:03}"), generate_image(side, derive_seed_index(seed, i as u64))?)))
        .collect()
}

pub fn write_corpus(corpus: &[(String, ImageBuffer)], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (id, img) in corpus {
        save_png(img, dir.join(format!("{id}.png")))?;
    }
    Ok(())
}

/// Loads every PNG/PGM/PPM in `dir`, sorted by file name; ids are file stems.
pub fn load_corpus_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, ImageBuffer)>> {
    let mut paths: Vec<_> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!("no images in {}", dir.as_ref().display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok((id, load_image(&p)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::to_luma;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate_image(64, 5).unwrap();
        assert_eq!(a, generate_image(64, 5).unwrap());
        assert_ne!(a, generate_image(64, 6).unwrap());
        assert_eq!((a.width(), a.height(), a.channels()), (64, 64, 3));
    }

    #[test]
    fn images_have_texture_and_range() {
        for (_, img) in mini_corpus(4, 128, 1).unwrap() {
            let l = to_luma(&img);
            let m = l.mean();
            let var = l.data().iter().map(|v| (v - m).powi(2)).sum::<f64>() / l.data().len() as f64;
            assert!(var.sqrt() > 10.0, "too flat: {}", var.sqrt());
        }
    }

    #[test]
    fn corpus_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = mini_corpus(3, 40, 9).unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        assert_eq!(load_corpus_dir(dir.path()).unwrap(), corpus);
    }
}
