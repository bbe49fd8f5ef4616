//! Synthetic SR-degradation benchmark: area-average downsampling followed by
//! bilinear upsampling, labelled with a squashed PSNR against the source.

use std::f32::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::image::PlanarImage;
use super::manifest::{DatasetManifest, LabelPolarity, LabelRange, SampleRecord};
use crate::error::{Error, Result};

pub const SYNTH_METHOD: &str = "synthetic-bilinear";
pub const SUPPORTED_SCALES: [u32; 6] = [2, 3, 4, 5, 6, 8];
pub const MIN_SOURCE_SIDE: usize = 256;

/// PSNR (dB) mapped to 0.5 by the label squashing.
pub const LABEL_PSNR_MIDPOINT: f64 = 26.0;
/// Logistic width (dB) of the label squashing.
pub const LABEL_PSNR_SPAN: f64 = 4.0;
/// Stand-in for identical images, where PSNR is infinite.
const PSNR_CAP: f64 = 100.0;

/// Frequency bands (cycles per pixel) of the stationary detail gratings.
const DETAIL_BANDS: [(f32, f32); 6] = [(0.02, 0.04), (0.03, 0.06), (0.05, 0.1), (0.08, 0.15), (0.12, 0.22), (0.18, 0.3)];
const DETAIL_AMPLITUDE: f32 = 0.06;
const SHAPES: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct SourceImage {
    pub id: String,
    pub image: PlanarImage,
}

/// Where the benchmark's pristine images come from.
#[derive(Clone, Debug)]
pub enum SynthSources {
    /// Procedurally generated square images, drawn from the benchmark seed.
    Procedural { count: usize, size: usize },
    Images(Vec<SourceImage>),
}

/// Loads every PNG in `dir` (sorted by file name) as a source; ids are file stems.
pub fn load_sources(dir: &Path) -> Result<Vec<SourceImage>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok(SourceImage { id, image: PlanarImage::load(p)?.quantized() })
        })
        .collect()
}

pub fn procedural_sources(count: usize, size: usize, seed: u64) -> Vec<SourceImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| SourceImage { id: format!("src{i:03}"), image: procedural_image(size, &mut rng) })
        .collect()
}

/// Smooth background, a few hard-edged shapes, a stationary texture of oriented
/// gratings and fine noise. The texture amplitude varies per image and sets
/// how much detail the degradation destroys.
fn procedural_image<R: Rng>(size: usize, rng: &mut R) -> PlanarImage {
    let n = size as f32;
    let detail: f32 = rng.random_range(0.15..1.0);
    let mut img = PlanarImage::zeros(size, size);

    struct Wave {
        fx: f32,
        fy: f32,
        phase: f32,
        amp: [f32; 3],
    }
    let wave = |rng: &mut R, lo: f32, hi: f32, amp: f32, spread: f32| {
        let f = rng.random_range(lo..hi);
        let theta = rng.random_range(0.0..TAU);
        Wave {
            fx: f * theta.cos(),
            fy: f * theta.sin(),
            phase: rng.random_range(0.0..TAU),
            amp: std::array::from_fn(|_| amp * rng.random_range(1.0 - spread..=1.0)),
        }
    };
    // colour varies across each image rather than between images
    let mut waves: Vec<Wave> = (0..4).map(|_| wave(rng, 0.5 / n, 3.0 / n, 0.12, 1.0)).collect();
    // detail texture spans octaves so part of it survives every supported scale
    for &(lo, hi) in &DETAIL_BANDS {
        waves.push(wave(rng, lo, hi, DETAIL_AMPLITUDE * detail, 0.2));
    }

    for y in 0..size {
        for x in 0..size {
            for c in 0..3 {
                let mut v = 0.5;
                for w in &waves {
                    v += w.amp[c] * (TAU * (w.fx * x as f32 + w.fy * y as f32) + w.phase).sin();
                }
                *img.at_mut(c, y, x) = v;
            }
        }
    }

    for _ in 0..SHAPES {
        let color: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let alpha: f32 = rng.random_range(0.6..1.0);
        let cx = rng.random_range(0.0..n);
        let cy = rng.random_range(0.0..n);
        let r = rng.random_range(0.04..0.25) * n;
        let disk = rng.random_bool(0.5);
        let (x0, x1) = ((cx - r).max(0.0) as usize, ((cx + r).ceil() as usize).min(size));
        let (y0, y1) = ((cy - r).max(0.0) as usize, ((cy + r).ceil() as usize).min(size));
        for y in y0..y1 {
            for x in x0..x1 {
                let (dx, dy) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
                if disk && dx * dx + dy * dy > r * r {
                    continue;
                }
                for (c, &col) in color.iter().enumerate() {
                    let p = img.at_mut(c, y, x);
                    *p = (1.0 - alpha) * *p + alpha * col;
                }
            }
        }
    }

    let noise = 0.03 * detail;
    for y in 0..size {
        for x in 0..size {
            let e = rng.random_range(-noise..=noise);
            for c in 0..3 {
                let p = img.at_mut(c, y, x);
                *p = (*p + e).clamp(0.0, 1.0);
            }
        }
    }
    img.quantized()
}

/// Averages non-overlapping `factor x factor` blocks. Dimensions must be multiples of `factor`.
pub fn area_downsample(img: &PlanarImage, factor: usize) -> PlanarImage {
    assert!(factor > 0 && img.width.is_multiple_of(factor) && img.height.is_multiple_of(factor));
    let (w, h) = (img.width / factor, img.height / factor);
    let mut out = PlanarImage::zeros(w, h);
    let inv = 1.0 / (factor * factor) as f32;
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0f32;
                for dy in 0..factor {
                    for dx in 0..factor {
                        s += img.at(c, y * factor + dy, x * factor + dx);
                    }
                }
                *out.at_mut(c, y, x) = s * inv;
            }
        }
    }
    out
}

/// Bilinear resize with pixel-centre alignment and edge clamping.
pub fn bilinear_resize(img: &PlanarImage, width: usize, height: usize) -> PlanarImage {
    let axis = |dst: usize, src: usize| -> Vec<(usize, usize, f32)> {
        let ratio = src as f32 / dst as f32;
        (0..dst)
            .map(|d| {
                let s = ((d as f32 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f32);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, s - i0 as f32)
            })
            .collect()
    };
    let xs = axis(width, img.width);
    let ys = axis(height, img.height);
    let mut out = PlanarImage::zeros(width, height);
    for c in 0..3 {
        for (y, &(y0, y1, ty)) in ys.iter().enumerate() {
            for (x, &(x0, x1, tx)) in xs.iter().enumerate() {
                let top = img.at(c, y0, x0) * (1.0 - tx) + img.at(c, y0, x1) * tx;
                let bottom = img.at(c, y1, x0) * (1.0 - tx) + img.at(c, y1, x1) * tx;
                *out.at_mut(c, y, x) = top * (1.0 - ty) + bottom * ty;
            }
        }
    }
    out
}

/// One degraded SR-like image together with the reference it is scored against.
#[derive(Clone, Debug)]
pub struct Degraded {
    pub reference: PlanarImage,
    pub sr: PlanarImage,
    pub lr_width: usize,
}

/// Crops the source to a multiple of `factor`, downsamples, upsamples back and
/// quantizes to 8 bits.
pub fn degrade(source: &PlanarImage, factor: u32) -> Degraded {
    let k = factor as usize;
    let (w, h) = (source.width / k * k, source.height / k * k);
    let reference = source.crop(0, 0, w, h);
    let lr = area_downsample(&reference, k);
    let sr = bilinear_resize(&lr, w, h).quantized();
    Degraded { reference, sr, lr_width: lr.width }
}

/// Peak signal-to-noise ratio in dB for images with unit peak.
pub fn psnr(a: &PlanarImage, b: &PlanarImage) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height));
    let mse = a.data.iter().zip(&b.data).map(|(&x, &y)| ((x - y) as f64).powi(2)).sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

/// Strictly increasing map from PSNR onto `(0, 1)`.
pub fn psnr_to_label(psnr: f64) -> f64 {
    1.0 / (1.0 + (-(psnr - LABEL_PSNR_MIDPOINT) / LABEL_PSNR_SPAN).exp())
}

/// Builds the benchmark under `out_dir`: `images/<content>_x<scale>.png` plus
/// `manifest.jsonl`. Returns the manifest (rooted at `out_dir`).
pub fn synth_benchmark(sources: &SynthSources, scales: &[u32], seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    if scales.is_empty() {
        return Err(Error::InvalidConfig("scale set is empty".into()));
    }
    if let Some(s) = scales.iter().find(|s| !SUPPORTED_SCALES.contains(s)) {
        return Err(Error::InvalidConfig(format!("scale {s} is not one of {SUPPORTED_SCALES:?}")));
    }
    let mut scales = scales.to_vec();
    scales.sort_unstable();
    scales.dedup();

    let generated;
    let sources: &[SourceImage] = match sources {
        SynthSources::Procedural { count, size } => {
            if *size < MIN_SOURCE_SIDE {
                return Err(Error::InvalidConfig(format!("source size {size} is below {MIN_SOURCE_SIDE}")));
            }
            generated = procedural_sources(*count, *size, seed);
            &generated
        }
        SynthSources::Images(v) => v,
    };
    if sources.is_empty() {
        return Err(Error::InvalidConfig("no source images".into()));
    }
    if let Some(s) = sources.iter().find(|s| s.image.width < MIN_SOURCE_SIDE || s.image.height < MIN_SOURCE_SIDE) {
        return Err(Error::InvalidConfig(format!(
            "source {} is {}x{}, below {MIN_SOURCE_SIDE}x{MIN_SOURCE_SIDE}",
            s.id, s.image.width, s.image.height
        )));
    }

    let images_dir = out_dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    let mut records = Vec::with_capacity(sources.len() * scales.len());
    for src in sources {
        for &s in &scales {
            let d = degrade(&src.image, s);
            let rel = Path::new("images").join(format!("{}_x{s}.png", src.id));
            d.sr.save_png(&out_dir.join(&rel))?;
            let label = psnr_to_label(psnr(&d.reference, &d.sr));
            records.push(SampleRecord::new(rel, d.sr.width as u32, d.lr_width as u32, label, &src.id, SYNTH_METHOD)?);
        }
    }
    let mut manifest =
        DatasetManifest::new("synthetic", LabelRange::new(0.0, 1.0)?, LabelPolarity::HigherIsBetter, records)?;
    manifest.provenance = Some(json!({ "generator": SYNTH_METHOD, "seed": seed, "scales": scales }));
    manifest.root = out_dir.to_path_buf();
    manifest.write(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::Scale;

    /// Independent PSNR: 8-bit integer squared errors, peak 255.
    fn psnr_u8_oracle(a: &PlanarImage, b: &PlanarImage) -> f64 {
        let (a, b) = (a.to_rgb8(), b.to_rgb8());
        let mut sse = 0u64;
        for (pa, pb) in a.pixels().zip(b.pixels()) {
            for c in 0..3 {
                let d = pa[c] as i64 - pb[c] as i64;
                sse += (d * d) as u64;
            }
        }
        let mse = sse as f64 / (a.width() * a.height() * 3) as f64;
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }

    #[test]
    fn labels_strictly_decrease_with_scale() {
        for src in procedural_sources(6, 256, 42) {
            let mut prev = f64::INFINITY;
            for s in [2, 3, 4, 5, 6, 8] {
                let d = degrade(&src.image, s);
                let oracle = psnr_u8_oracle(&d.reference, &d.sr);
                let fast = psnr(&d.reference, &d.sr);
                assert!((oracle - fast).abs() < 1e-3, "{oracle} vs {fast}");
                assert!(oracle < prev, "{}: psnr {oracle} at x{s} not below {prev}", src.id);
                prev = oracle;
            }
        }
    }

    #[test]
    fn downsample_then_upsample_shapes() {
        let src = &procedural_sources(1, 256, 1)[0];
        let d = degrade(&src.image, 3);
        assert_eq!((d.sr.width, d.sr.height, d.lr_width), (255, 255, 85));
        let down = area_downsample(&d.reference, 3);
        assert_eq!((down.width, down.height), (85, 85));
    }

    #[test]
    fn constant_image_survives_degradation() {
        let mut img = PlanarImage::zeros(8, 8);
        img.data.iter_mut().for_each(|v| *v = 0.4);
        let up = bilinear_resize(&area_downsample(&img, 2), 8, 8);
        assert!(up.data.iter().all(|v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let proc_ = SynthSources::Procedural { count: 1, size: 256 };
        for scales in [&[1u32][..], &[][..], &[7][..]] {
            let e = synth_benchmark(&proc_, scales, 0, dir.path()).unwrap_err();
            assert!(matches!(e, Error::InvalidConfig(_)));
        }
        let empty = SynthSources::Images(vec![]);
        assert!(matches!(synth_benchmark(&empty, &[2], 0, dir.path()), Err(Error::InvalidConfig(_))));
        let small = SynthSources::Procedural { count: 1, size: 128 };
        assert!(synth_benchmark(&small, &[2], 0, dir.path()).is_err());
    }

    #[test]
    fn benchmark_is_deterministic_and_monotone() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let src = SynthSources::Procedural { count: 2, size: 256 };
        let ma = synth_benchmark(&src, &[8, 2, 4], 9, a.path()).unwrap();
        synth_benchmark(&src, &[2, 4, 8], 9, b.path()).unwrap();
        let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
        assert_eq!(read(a.path(), "manifest.jsonl"), read(b.path(), "manifest.jsonl"));
        assert_eq!(read(a.path(), "images/src001_x4.png"), read(b.path(), "images/src001_x4.png"));
        assert_eq!(ma.records.len(), 6);
        assert_eq!(ma.records[2].scale, Scale::integer(8).unwrap());
        for chunk in ma.records.chunks(3) {
            assert!(chunk[0].label > chunk[1].label && chunk[1].label > chunk[2].label);
            assert!(chunk.iter().all(|r| r.method_id == SYNTH_METHOD));
        }
        let back = DatasetManifest::read(&a.path().join("manifest.jsonl")).unwrap();
        let img = PlanarImage::load(&back.resolve(&back.records[0])).unwrap();
        assert_eq!(img.width, 256);
    }
}
