//! Ordered distortion ladders with pseudo-MOS labels.
//!
//! Each family implements [`Distortion`] and is looked up by name in a
//! [`DistortionRegistry`]. Severity `s` in `1..=5` indexes the family's fixed
//! ladder. Stochastic families draw from a seed that does not depend on the
//! severity, so successive levels share one noise field and differ only in
//! strength.

use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fr::{psnr, ssim, SsimParams};
use crate::image::{
    gaussian_filter, load_image, quantize, resize_area, resize_bilinear, save_png, to_luma,
    ImageBuffer, ImagePlane,
};
use crate::rng::{derive_seed, SplitMix64};

pub const SEVERITIES: usize = 5;
pub const MIN_SIDE: usize = 32;
pub const PRISTINE_MOS: f64 = 100.0;

pub trait Distortion: Send + Sync {
    fn family(&self) -> &'static str;

    /// Strength parameter per severity level 1..=5.
    fn ladder(&self) -> &'static [f64; SEVERITIES];

    /// Applies the distortion at an explicit strength parameter.
    fn apply_strength(&self, img: &ImageBuffer, strength: f64, seed: u64) -> Result<ImageBuffer>;
}

fn map_planes(img: &ImageBuffer, mut f: impl FnMut(usize, &ImagePlane) -> Result<ImagePlane>) -> Result<ImageBuffer> {
    let planes = img
        .channel_planes()
        .iter()
        .enumerate()
        .map(|(c, p)| f(c, p))
        .collect::<Result<Vec<_>>>()?;
    ImageBuffer::from_planes(&planes)
}

pub struct GaussianBlur;

impl Distortion for GaussianBlur {
    fn family(&self) -> &'static str {
        "gaussian-blur"
    }

    fn ladder(&self) -> &'static [f64; SEVERITIES] {
        &[0.8, 1.6, 2.6, 4.0, 6.0]
    }

    fn apply_strength(&self, img: &ImageBuffer, sigma: f64, _seed: u64) -> Result<ImageBuffer> {
        let radius = ((3.0 * sigma).ceil() as usize).clamp(1, img.width().min(img.height()) - 1);
        map_planes(img, |_, p| gaussian_filter(p, sigma, radius))
    }
}

pub struct GaussianNoise;

impl Distortion for GaussianNoise {
    fn family(&self) -> &'static str {
        "gaussian-noise"
    }

    fn ladder(&self) -> &'static [f64; SEVERITIES] {
        &[4.0, 8.0, 16.0, 28.0, 44.0]
    }

    /// Adds `sigma·N(0,1)` per sample in interleaved order, then rounds and clips.
    fn apply_strength(&self, img: &ImageBuffer, sigma: f64, seed: u64) -> Result<ImageBuffer> {
        let mut rng = SplitMix64::new(seed);
        let data = img.data().iter().map(|&v| quantize(v as f64 + sigma * rng.normal())).collect();
        ImageBuffer::new(img.width(), img.height(), img.channels(), data)
    }
}

pub struct DownscaleUpscale;

impl Distortion for DownscaleUpscale {
    fn family(&self) -> &'static str {
        "downscale-upscale"
    }

    fn ladder(&self) -> &'static [f64; SEVERITIES] {
        &[1.5, 2.0, 3.0, 4.0, 6.0]
    }

    /// Box-average down by `factor`, bilinear back up to the original size.
    fn apply_strength(&self, img: &ImageBuffer, factor: f64, _seed: u64) -> Result<ImageBuffer> {
        if !(factor >= 1.0) {
            return Err(Error::Invalid(format!("resampling factor {factor} must be >= 1")));
        }
        let (w, h) = (img.width(), img.height());
        let sw = ((w as f64 / factor).round() as usize).max(1);
        let sh = ((h as f64 / factor).round() as usize).max(1);
        map_planes(img, |_, p| resize_bilinear(&resize_area(p, sw, sh)?, w, h))
    }
}

pub struct ContrastCompress;

impl Distortion for ContrastCompress {
    fn family(&self) -> &'static str {
        "contrast-compress"
    }

    fn ladder(&self) -> &'static [f64; SEVERITIES] {
        &[0.85, 0.7, 0.55, 0.4, 0.25]
    }

    /// `x -> 128 + f·(x - 128)`.
    fn apply_strength(&self, img: &ImageBuffer, f: f64, _seed: u64) -> Result<ImageBuffer> {
        let data = img.data().iter().map(|&v| quantize(128.0 + f * (v as f64 - 128.0))).collect();
        ImageBuffer::new(img.width(), img.height(), img.channels(), data)
    }
}

pub struct BlockQuantize;

const BLOCK: usize = 8;

fn dct_basis() -> [[f64; BLOCK]; BLOCK] {
    let mut m = [[0.0; BLOCK]; BLOCK];
    for (k, row) in m.iter_mut().enumerate() {
        let norm = if k == 0 { (1.0 / BLOCK as f64).sqrt() } else { (2.0 / BLOCK as f64).sqrt() };
        for (n, v) in row.iter_mut().enumerate() {
            *v = norm * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * BLOCK) as f64).cos();
        }
    }
    m
}

impl BlockQuantize {
    /// Quantizer step for coefficient `(u, v)`: coarser at high frequency.
    fn step(scale: f64, u: usize, v: usize) -> f64 {
        scale * (1.0 + (u + v) as f64 * 2.0)
    }

    fn quantize_plane(p: &ImagePlane, scale: f64) -> Result<ImagePlane> {
        let basis = dct_basis();
        let (w, h) = (p.width(), p.height());
        let mut out = p.data().to_vec();
        let mut block = [[0.0; BLOCK]; BLOCK];
        let mut tmp = [[0.0; BLOCK]; BLOCK];
        for by in (0..h).step_by(BLOCK) {
            for bx in (0..w).step_by(BLOCK) {
                // edge blocks replicate the last row/column; only valid pixels are written back
                for (y, row) in block.iter_mut().enumerate() {
                    for (x, v) in row.iter_mut().enumerate() {
                        *v = p.get((bx + x).min(w - 1), (by + y).min(h - 1)) - 128.0;
                    }
                }
                // forward: C = B · X · Bᵀ
                for u in 0..BLOCK {
                    for x in 0..BLOCK {
                        tmp[u][x] = (0..BLOCK).map(|y| basis[u][y] * block[y][x]).sum();
                    }
                }
                for u in 0..BLOCK {
                    for v in 0..BLOCK {
                        let c: f64 = (0..BLOCK).map(|x| tmp[u][x] * basis[v][x]).sum();
                        let q = Self::step(scale, u, v);
                        block[u][v] = (c / q).round() * q;
                    }
                }
                // inverse: X = Bᵀ · C · B
                for y in 0..BLOCK {
                    for v in 0..BLOCK {
                        tmp[y][v] = (0..BLOCK).map(|u| basis[u][y] * block[u][v]).sum();
                    }
                }
                for y in 0..BLOCK.min(h - by) {
                    for x in 0..BLOCK.min(w - bx) {
                        let val: f64 = (0..BLOCK).map(|v| tmp[y][v] * basis[v][x]).sum();
                        out[(by + y) * w + bx + x] = val + 128.0;
                    }
                }
            }
        }
        ImagePlane::new(w, h, out)
    }
}

impl Distortion for BlockQuantize {
    fn family(&self) -> &'static str {
        "block-quantize"
    }

    fn ladder(&self) -> &'static [f64; SEVERITIES] {
        &[2.0, 4.0, 8.0, 16.0, 32.0]
    }

    /// 8x8 orthonormal DCT per channel with uniform quantization.
    fn apply_strength(&self, img: &ImageBuffer, scale: f64, _seed: u64) -> Result<ImageBuffer> {
        if !(scale > 0.0) {
            return Err(Error::Invalid(format!("quantizer scale {scale} must be positive")));
        }
        map_planes(img, |_, p| Self::quantize_plane(p, scale))
    }
}

/// Name-keyed set of distortion families.
pub struct DistortionRegistry {
    entries: Vec<Box<dyn Distortion>>,
}

impl Default for DistortionRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(GaussianBlur));
        r.register(Box::new(GaussianNoise));
        r.register(Box::new(DownscaleUpscale));
        r.register(Box::new(ContrastCompress));
        r.register(Box::new(BlockQuantize));
        r
    }
}

impl DistortionRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Adds a family, replacing any existing one with the same name.
    pub fn register(&mut self, d: Box<dyn Distortion>) {
        self.entries.retain(|e| e.family() != d.family());
        self.entries.push(d);
    }

    pub fn get(&self, family: &str) -> Result<&dyn Distortion> {
        self.entries
            .iter()
            .find(|e| e.family() == family)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Unknown { kind: "distortion family", name: family.to_string() })
    }

    pub fn families(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.family()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub family: String,
    pub severity: u8,
    pub seed: u64,
}

impl DistortionSpec {
    pub fn new(family: impl Into<String>, severity: u8, seed: u64) -> Self {
        Self { family: family.into(), severity, seed }
    }

    pub fn variant_id(&self) -> String {
        format!("{}-{}", self.family, self.severity)
    }
}

impl fmt::Display for DistortionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.family, self.severity)
    }
}

pub fn apply_distortion(img: &ImageBuffer, spec: &DistortionSpec) -> Result<ImageBuffer> {
    apply_with(&DistortionRegistry::default(), img, spec)
}

pub fn apply_with(registry: &DistortionRegistry, img: &ImageBuffer, spec: &DistortionSpec) -> Result<ImageBuffer> {
    if img.width() < MIN_SIDE || img.height() < MIN_SIDE {
        return Err(Error::dim(format!("distortion needs at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}", img.width(), img.height())));
    }
    let family = registry.get(&spec.family)?;
    if spec.severity == 0 || spec.severity as usize > SEVERITIES {
        return Err(Error::Invalid(format!("severity {} outside 1..={SEVERITIES}", spec.severity)));
    }
    family.apply_strength(img, family.ladder()[spec.severity as usize - 1], spec.seed)
}

/// `100·(0.5·max(0, SSIM) + 0.5·clamp(PSNR/50, 0, 1))` on luma; infinite PSNR counts as 1.
pub fn pseudo_mos(distorted: &ImagePlane, pristine: &ImagePlane) -> Result<f64> {
    let s = ssim(distorted, pristine, &SsimParams::default())?.mean;
    let p = psnr(distorted, pristine, 255.0)?;
    let p_term = if p.is_infinite() { 1.0 } else { (p / 50.0).clamp(0.0, 1.0) };
    Ok(100.0 * (0.5 * s.max(0.0) + 0.5 * p_term))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub spec: DistortionSpec,
    pub image: ImageBuffer,
    pub pseudo_mos: f64,
}

/// A pristine image and its distorted variants, with quality labels.
///
/// Index 0 of [`DistortedSequence::images`] is the pristine image.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortedSequence {
    pub content_id: String,
    pub pristine: ImageBuffer,
    pub pristine_quality: f64,
    pub variants: Vec<Variant>,
}

/// One member of a sequence as seen by pair construction.
#[derive(Debug, Clone, Copy)]
pub struct SequenceImage<'a> {
    pub family: Option<&'a str>,
    pub image: &'a ImageBuffer,
    pub quality: f64,
}

impl DistortedSequence {
    pub fn len(&self) -> usize {
        self.variants.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn images(&self) -> Vec<SequenceImage<'_>> {
        let mut out = vec![SequenceImage { family: None, image: &self.pristine, quality: self.pristine_quality }];
        for v in &self.variants {
            out.push(SequenceImage {
                family: Some(v.spec.family.as_str()),
                image: &v.image,
                quality: v.pseudo_mos,
            });
        }
        out
    }

    pub fn image_ids(&self) -> Vec<String> {
        std::iter::once("pristine".to_string()).chain(self.variants.iter().map(|v| v.spec.variant_id())).collect()
    }
}

/// Builds one sequence: every family at every severity, labelled by pseudo-MOS.
pub fn make_sequence(
    registry: &DistortionRegistry,
    content_id: &str,
    pristine: &ImageBuffer,
    families: &[&str],
    seed: u64,
) -> Result<DistortedSequence> {
    let content_seed = derive_seed(seed, content_id);
    let reference = to_luma(pristine);
    let mut variants = Vec::with_capacity(families.len() * SEVERITIES);
    for &family in families {
        let family_seed = derive_seed(content_seed, family);
        for severity in 1..=SEVERITIES as u8 {
            let spec = DistortionSpec::new(family, severity, family_seed);
            let image = apply_with(registry, pristine, &spec)?;
            let pseudo_mos = pseudo_mos(&to_luma(&image), &reference)?;
            variants.push(Variant { spec, image, pseudo_mos });
        }
    }
    Ok(DistortedSequence {
        content_id: content_id.to_string(),
        pristine: pristine.clone(),
        pristine_quality: PRISTINE_MOS,
        variants,
    })
}

/// One sequence per corpus image; parallel over contents, output in input order.
pub fn make_dataset(corpus: &[(String, ImageBuffer)], families: &[&str], seed: u64) -> Result<Vec<DistortedSequence>> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus is empty".into()));
    }
    let registry = DistortionRegistry::default();
    for f in families {
        registry.get(f)?;
    }
    corpus
        .par_iter()
        .map(|(id, img)| make_sequence(&registry, id, img, families, seed))
        .collect()
}

pub fn default_families() -> Vec<&'static str> {
    DistortionRegistry::default().families()
}

/// One row of a distortion manifest. `quality` is `pseudo_mos` for
/// synthesized sets and `mos` for ingested datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub content_id: String,
    pub variant_id: String,
    pub family: String,
    pub severity: u8,
    pub path: String,
    #[serde(alias = "mos")]
    pub pseudo_mos: f64,
}

/// Writes variants as PNG plus `manifest.csv` (paths relative to `out_dir`).
pub fn write_dataset(sequences: &[DistortedSequence], out_dir: impl AsRef<Path>) -> Result<()> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("manifest.csv"))?;
    for seq in sequences {
        let dir = out_dir.join(&seq.content_id);
        fs::create_dir_all(&dir)?;
        let rel = format!("{}/pristine.png", seq.content_id);
        save_png(&seq.pristine, out_dir.join(&rel))?;
        w.serialize(ManifestRow {
            content_id: seq.content_id.clone(),
            variant_id: "pristine".into(),
            family: "pristine".into(),
            severity: 0,
            path: rel,
            pseudo_mos: seq.pristine_quality,
        })?;
        for v in &seq.variants {
            let rel = format!("{}/{}.png", seq.content_id, v.spec.variant_id());
            save_png(&v.image, out_dir.join(&rel))?;
            w.serialize(ManifestRow {
                content_id: seq.content_id.clone(),
                variant_id: v.spec.variant_id(),
                family: v.spec.family.clone(),
                severity: v.spec.severity,
                path: rel,
                pseudo_mos: v.pseudo_mos,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a manifest back into sequences. Each content needs exactly one
/// severity-0 reference row. Relative paths resolve against the manifest's directory.
pub fn read_dataset(manifest: impl AsRef<Path>) -> Result<Vec<DistortedSequence>> {
    let manifest = manifest.as_ref();
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut rdr = csv::Reader::from_path(manifest)?;
    let headers = rdr.headers()?.clone();
    for required in ["content_id", "variant_id", "family", "severity", "path"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Schema(format!("manifest lacks `{required}` column")));
        }
    }
    if !headers.iter().any(|h| h == "pseudo_mos" || h == "mos") {
        return Err(Error::Schema("manifest needs a `pseudo_mos` or `mos` column".into()));
    }
    let rows: Vec<ManifestRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    let mut order: Vec<String> = Vec::new();
    for r in &rows {
        if !order.contains(&r.content_id) {
            order.push(r.content_id.clone());
        }
    }
    order
        .into_iter()
        .map(|cid| {
            let mine: Vec<&ManifestRow> = rows.iter().filter(|r| r.content_id == cid).collect();
            let refs: Vec<&&ManifestRow> = mine.iter().filter(|r| r.severity == 0).collect();
            if refs.len() != 1 {
                return Err(Error::Schema(format!("content {cid} needs exactly one severity-0 reference row")));
            }
            let resolve = |p: &str| {
                let p = Path::new(p);
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base.join(p)
                }
            };
            let pristine = load_image(resolve(&refs[0].path))?;
            let variants = mine
                .iter()
                .filter(|r| r.severity != 0)
                .map(|r| {
                    let image = load_image(resolve(&r.path))?;
                    if !image.same_shape(&pristine) {
                        return Err(Error::dim(format!("{} differs in shape from its reference", r.path)));
                    }
                    Ok(Variant {
                        spec: DistortionSpec::new(r.family.clone(), r.severity, 0),
                        image,
                        pseudo_mos: r.pseudo_mos,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DistortedSequence { content_id: cid, pristine, pristine_quality: refs[0].pseudo_mos, variants })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_image;

    fn laplacian_energy(p: &ImagePlane) -> f64 {
        let (w, h) = (p.width(), p.height());
        let mut e = 0.0;
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let l = 4.0 * p.get(x, y) - p.get(x - 1, y) - p.get(x + 1, y) - p.get(x, y - 1) - p.get(x, y + 1);
                e += l * l;
            }
        }
        e
    }

    #[test]
    fn noise_is_deterministic() {
        let img = generate_image(48, 1).unwrap();
        let spec = DistortionSpec::new("gaussian-noise", 3, 42);
        assert_eq!(apply_distortion(&img, &spec).unwrap(), apply_distortion(&img, &spec).unwrap());
        let other = DistortionSpec::new("gaussian-noise", 3, 43);
        assert_ne!(apply_distortion(&img, &spec).unwrap(), apply_distortion(&img, &other).unwrap());
    }

    #[test]
    fn contrast_endpoints() {
        let img = generate_image(40, 2).unwrap();
        let c = ContrastCompress;
        assert_eq!(c.apply_strength(&img, 1.0, 0).unwrap(), img);
        let flat = c.apply_strength(&img, 0.0, 0).unwrap();
        assert!(flat.data().iter().all(|&v| v == 128));
    }

    #[test]
    fn blur_reduces_laplacian_energy() {
        for seed in 0..5 {
            let img = generate_image(64, seed).unwrap();
            let lo = to_luma(&apply_distortion(&img, &DistortionSpec::new("gaussian-blur", 1, 0)).unwrap());
            let hi = to_luma(&apply_distortion(&img, &DistortionSpec::new("gaussian-blur", 5, 0)).unwrap());
            assert!(laplacian_energy(&hi) < laplacian_energy(&lo));
        }
    }

    #[test]
    fn dimensions_and_channels_preserved() {
        let img = generate_image(37, 3).unwrap();
        let reg = DistortionRegistry::default();
        for fam in reg.families() {
            for s in 1..=5 {
                let out = apply_with(&reg, &img, &DistortionSpec::new(fam, s, 9)).unwrap();
                assert!(out.same_shape(&img), "{fam}@{s}");
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let img = generate_image(40, 3).unwrap();
        assert!(matches!(apply_distortion(&img, &DistortionSpec::new("jpeg", 1, 0)), Err(Error::Unknown { .. })));
        assert!(apply_distortion(&img, &DistortionSpec::new("gaussian-blur", 0, 0)).is_err());
        assert!(apply_distortion(&img, &DistortionSpec::new("gaussian-blur", 6, 0)).is_err());
        let tiny = ImageBuffer::filled(16, 16, 1, 0).unwrap();
        assert!(matches!(apply_distortion(&tiny, &DistortionSpec::new("gaussian-blur", 1, 0)), Err(Error::Dimension(_))));
    }

    #[test]
    fn pseudo_mos_closed_forms() {
        let a = ImagePlane::filled(32, 32, 100.0).unwrap();
        assert_eq!(pseudo_mos(&a, &a).unwrap(), 100.0);
        let b = ImagePlane::filled(32, 32, 120.0).unwrap();
        let c1 = SsimParams::default().c1();
        let s = (2.0 * 100.0 * 120.0 + c1) / (100.0f64.powi(2) + 120.0f64.powi(2) + c1);
        let p = 10.0 * (65025.0f64 / 400.0).log10();
        let expected = 100.0 * (0.5 * s + 0.5 * p / 50.0);
        assert!((pseudo_mos(&b, &a).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 71.29).abs() < 0.01);
    }

    #[test]
    fn ladder_labels_strictly_decrease() {
        let corpus: Vec<(String, ImageBuffer)> = (0..3).map(|i| (format!("k{i}"), generate_image(96, 10 + i).unwrap())).collect();
        let seqs = make_dataset(&corpus, &default_families(), 7).unwrap();
        for seq in &seqs {
            assert_eq!(seq.len(), 26);
            for fam in default_families() {
                let q: Vec<f64> = seq.variants.iter().filter(|v| v.spec.family == fam).map(|v| v.pseudo_mos).collect();
                assert_eq!(q.len(), 5);
                assert!(q[0] < 100.0 && q[4] > 0.0);
                for w in q.windows(2) {
                    assert!(w[1] < w[0], "{} {fam}: {q:?}", seq.content_id);
                }
            }
        }
    }

    #[test]
    fn dataset_round_trips_through_manifest() {
        let corpus = vec![("a".to_string(), generate_image(40, 1).unwrap())];
        let seqs = make_dataset(&corpus, &["gaussian-noise", "contrast-compress"], 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&seqs, dir.path()).unwrap();
        let back = read_dataset(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].pristine, seqs[0].pristine);
        assert_eq!(back[0].variants.len(), 10);
        for (x, y) in back[0].variants.iter().zip(&seqs[0].variants) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.pseudo_mos, y.pseudo_mos);
        }
        let header = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
        assert!(header.starts_with("content_id,variant_id,family,severity,path,pseudo_mos\n"));
    }

    #[test]
    fn mos_column_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let img = generate_image(40, 1).unwrap();
        save_png(&img, dir.path().join("r.png")).unwrap();
        save_png(&img, dir.path().join("d.png")).unwrap();
        std::fs::write(
            dir.path().join("m.csv"),
            "content_id,variant_id,family,severity,path,mos\nx,ref,pristine,0,r.png,4.5\nx,d1,blur,1,d.png,3.0\n",
        )
        .unwrap();
        let seqs = read_dataset(dir.path().join("m.csv")).unwrap();
        assert_eq!(seqs[0].pristine_quality, 4.5);
        assert_eq!(seqs[0].variants[0].pseudo_mos, 3.0);
    }
}
