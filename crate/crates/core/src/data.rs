//! Data pipeline: image/fixation ingestion, preprocessing geometry,
//! fixation-density construction, dataset splitting, and a seeded synthetic
//! generator for desk-scale experiments.
//!
//! Geometry convention: images are resized preserving aspect ratio so the
//! tighter dimension fits the target exactly, the rest is zero-padded
//! symmetrically. Fixation coordinates are 0-based (row, col) integers in
//! the padded target frame; predictions are evaluated in that same frame.

use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::map::{FixationMap, Map2d, SaliencyMap};
use crate::pnm;
use crate::tensor::Tensor;

/// One evaluation unit: image, gaze ground truth in both representations,
/// and an optional category tag.
#[derive(Clone)]
pub struct Sample {
    /// `[3, H, W]`, values in [0, 1].
    pub image: Tensor,
    pub fixations: FixationMap,
    pub density: SaliencyMap,
    pub category: Option<String>,
}

impl Sample {
    /// The image as a one-image batch `[1, 3, H, W]` (shares storage).
    pub fn image_batch(&self) -> Tensor {
        let s = self.image.shape();
        self.image.reshape(&[1, s[0], s[1], s[2]]).unwrap()
    }

    /// The density map as a `[1, 1, H, W]` target tensor.
    pub fn density_batch(&self) -> Tensor {
        Tensor::from_vec(
            &[1, 1, self.density.height, self.density.width],
            self.density.data().to_vec(),
        )
        .unwrap()
    }
}

/// Preprocessing parameters of one dataset.
#[derive(Clone, Debug)]
pub struct DatasetSpec {
    pub name: String,
    /// (rows, cols); both divisible by 8.
    pub target_size: (usize, usize),
    /// Training fraction of the split.
    pub split_fraction: f64,
    /// Validation floor (the split rule tops out at N - 1).
    pub min_val: usize,
    /// Blur of the fixation density; defaults to `target width / 32`.
    pub density_sigma: Option<f64>,
}

impl DatasetSpec {
    pub fn new(name: &str, target_size: (usize, usize)) -> DatasetSpec {
        DatasetSpec {
            name: name.to_string(),
            target_size,
            split_fraction: 0.8,
            min_val: 200,
            density_sigma: None,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.density_sigma
            .unwrap_or(self.target_size.1 as f64 / 32.0)
    }
}

/// Where the resized content sits inside the padded frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContentRect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// General bilinear resize of a `[C, H, W]` tensor (half-pixel centers).
fn resize_bilinear(image: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let src = image.data();
    let mut out = vec![0.0; c * out_h * out_w];
    let axis = |out_extent: usize, in_extent: usize| -> Vec<(usize, usize, f64)> {
        let scale = in_extent as f64 / out_extent as f64;
        (0..out_extent)
            .map(|o| {
                let pos = (o as f64 + 0.5) * scale - 0.5;
                let low = pos.floor();
                let t = pos - low;
                let clamp = |v: f64| (v.max(0.0) as usize).min(in_extent - 1);
                (clamp(low), clamp(low + 1.0), t)
            })
            .collect()
    };
    let rows = axis(out_h, h);
    let cols = axis(out_w, w);
    for ci in 0..c {
        let plane = &src[ci * h * w..(ci + 1) * h * w];
        let dst = &mut out[ci * out_h * out_w..(ci + 1) * out_h * out_w];
        for (oy, &(r0, r1, t)) in rows.iter().enumerate() {
            for (ox, &(c0, c1, u)) in cols.iter().enumerate() {
                dst[oy * out_w + ox] = (1.0 - t) * (1.0 - u) * plane[r0 * w + c0]
                    + (1.0 - t) * u * plane[r0 * w + c1]
                    + t * (1.0 - u) * plane[r1 * w + c0]
                    + t * u * plane[r1 * w + c1];
            }
        }
    }
    Tensor::from_vec(&[c, out_h, out_w], out).unwrap()
}

/// Aspect-preserving resize into `target`, zero-padding the loose axis
/// symmetrically. Returns the padded image and the content rectangle for
/// mapping predictions back to source coordinates.
pub fn resize_pad(image: &Tensor, target: (usize, usize)) -> Result<(Tensor, ContentRect)> {
    if image.shape().len() != 3 {
        return Err(Error::ShapeMismatch {
            op: "resize_pad",
            detail: format!("expected [C, H, W], got {:?}", image.shape()),
        });
    }
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    if h == 0 || w == 0 {
        return Err(Error::DegenerateImage);
    }
    let (tr, tc) = target;
    let scale = (tr as f64 / h as f64).min(tc as f64 / w as f64);
    let ch = ((h as f64 * scale).round() as usize).clamp(1, tr);
    let cw = ((w as f64 * scale).round() as usize).clamp(1, tc);
    let content = resize_bilinear(image, ch, cw);
    let top = (tr - ch) / 2;
    let left = (tc - cw) / 2;
    let mut out = vec![0.0; c * tr * tc];
    for ci in 0..c {
        for y in 0..ch {
            let src = ci * ch * cw + y * cw;
            let dst = ci * tr * tc + (top + y) * tc + left;
            out[dst..dst + cw].copy_from_slice(&content.data()[src..src + cw]);
        }
    }
    Ok((
        Tensor::from_vec(&[c, tr, tc], out)?,
        ContentRect {
            top,
            left,
            height: ch,
            width: cw,
        },
    ))
}

/// Gaussian blur of discrete fixations: one isotropic kernel per fixation,
/// truncated at 4 sigma, renormalized to unit sum.
pub fn fixations_to_density(fixations: &FixationMap, sigma: f64) -> Result<SaliencyMap> {
    if fixations.is_empty() {
        return Err(Error::EmptyFixations);
    }
    let (h, w) = (fixations.height, fixations.width);
    let mut map = Map2d::zeros(h, w);
    let reach = (4.0 * sigma).ceil() as i64;
    let cutoff2 = (4.0 * sigma) * (4.0 * sigma);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for &(fr, fc) in fixations.points() {
        let (fr, fc) = (fr as i64, fc as i64);
        for y in (fr - reach).max(0)..=(fr + reach).min(h as i64 - 1) {
            for x in (fc - reach).max(0)..=(fc + reach).min(w as i64 - 1) {
                let d2 = ((y - fr) * (y - fr) + (x - fc) * (x - fc)) as f64;
                if d2 <= cutoff2 {
                    let v = map.at(y as usize, x as usize);
                    map.set(y as usize, x as usize, v + (-d2 * inv).exp());
                }
            }
        }
    }
    SaliencyMap::from_nonnegative(map)
}

/// Seeded shuffle, then `val = min(max(ceil((1-f) * N), min_val), N - 1)`
/// samples go to validation and the rest to training.
pub fn split_dataset(
    mut samples: Vec<Sample>,
    spec: &DatasetSpec,
    seed: u64,
) -> (Vec<Sample>, Vec<Sample>) {
    assert!(samples.len() >= 2, "cannot split fewer than two samples");
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        samples.swap(i, rng.random_range(0..=i));
    }
    let val = validation_size(n, spec);
    let val_set = samples.split_off(n - val);
    (samples, val_set)
}

pub fn validation_size(n: usize, spec: &DatasetSpec) -> usize {
    let fraction = ((1.0 - spec.split_fraction) * n as f64).ceil() as usize;
    fraction.max(spec.min_val).min(n - 1)
}

/// A disc around a synthetic target center, in pixels. The generator
/// guarantees the fixation mass of a sample concentrates inside its discs.
#[derive(Clone, Copy, Debug)]
pub struct TargetRegion {
    pub row: f64,
    pub col: f64,
    pub radius: f64,
}

impl TargetRegion {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let dr = row as f64 - self.row;
        let dc = col as f64 - self.col;
        dr * dr + dc * dc <= self.radius * self.radius
    }
}

pub struct SyntheticSample {
    pub sample: Sample,
    pub targets: Vec<TargetRegion>,
}

const SHAPES: [&str; 3] = ["circle", "square", "cross"];
const FIXATIONS_PER_IMAGE: usize = 30;

/// Synthetic eye-tracking data: 1-3 high-contrast geometric targets on a
/// textured background, 30 fixations per image drawn from Gaussians at the
/// target centers plus a center-bias component. Fully seeded.
pub fn generate_synthetic(count: usize, size: (usize, usize), seed: u64) -> Result<Vec<Sample>> {
    Ok(generate_synthetic_detailed(count, size, seed)?
        .into_iter()
        .map(|s| s.sample)
        .collect())
}

pub fn generate_synthetic_detailed(
    count: usize,
    size: (usize, usize),
    seed: u64,
) -> Result<Vec<SyntheticSample>> {
    let (h, w) = size;
    if h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0 {
        return Err(Error::InvalidConfig(format!(
            "synthetic size {h}x{w} must be positive and divisible by 8"
        )));
    }
    let sigma = w as f64 / 32.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(generate_one(&mut rng, h, w, sigma)?);
    }
    Ok(out)
}

fn generate_one(
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
    sigma: f64,
) -> Result<SyntheticSample> {
    let min_extent = h.min(w) as f64;
    // Background: quantized noise over a gentle gradient, one byte per
    // channel so file round trips are exact.
    let mut pixels = vec![0u8; 3 * h * w];
    let base = [
        rng.random_range(60u8..100),
        rng.random_range(60u8..100),
        rng.random_range(60u8..100),
    ];
    for y in 0..h {
        for x in 0..w {
            let grad = (30.0 * (x as f64 / w as f64 + y as f64 / h as f64) / 2.0) as i32;
            for c in 0..3 {
                let noise = rng.random_range(-18i32..=18);
                let v = base[c] as i32 + grad + noise;
                pixels[c * h * w + y * w + x] = v.clamp(0, 255) as u8;
            }
        }
    }

    let n_targets = rng.random_range(1..=3usize);
    let shape = SHAPES[rng.random_range(0..SHAPES.len())];
    // Target placement carries the center bias of natural viewing data:
    // centers are drawn from a centered Gaussian (symmetrically clamped),
    // so the fixation statistics of the whole set peak at the image center.
    let placement = Normal::<f64>::new(0.0, 0.16).unwrap();
    let mut targets = Vec::with_capacity(n_targets);
    for _ in 0..n_targets {
        let radius = rng.random_range(min_extent / 12.0..min_extent / 6.0);
        let row = (0.5 + placement.sample(rng)).clamp(0.18, 0.82) * h as f64;
        let col = (0.5 + placement.sample(rng)).clamp(0.18, 0.82) * w as f64;
        let color = [
            rng.random_range(210u8..=255),
            rng.random_range(180u8..=255),
            rng.random_range(0u8..=60),
        ];
        draw_shape(&mut pixels, h, w, shape, row, col, radius, color);
        targets.push(TargetRegion {
            row,
            col,
            radius: radius + 4.0 * sigma,
        });
    }

    // Fixations: a balanced mixture of Gaussians at the target centers
    // (equal component weights, so each target draws the same share of
    // fixations regardless of how many targets the image has).
    let target_jitter = Normal::new(0.0, min_extent / 32.0).unwrap();
    let mut points = Vec::with_capacity(FIXATIONS_PER_IMAGE);
    for k in 0..FIXATIONS_PER_IMAGE {
        let t = &targets[k % targets.len()];
        let row = (t.row + target_jitter.sample(rng)).clamp(0.0, h as f64 - 1.0);
        let col = (t.col + target_jitter.sample(rng)).clamp(0.0, w as f64 - 1.0);
        points.push((row.round() as usize, col.round() as usize));
    }
    let fixations = FixationMap::new(h, w, points)?;
    let density = fixations_to_density(&fixations, sigma)?;

    let image = Tensor::from_vec(
        &[3, h, w],
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )?;
    Ok(SyntheticSample {
        sample: Sample {
            image,
            fixations,
            density,
            category: Some(shape.to_string()),
        },
        targets,
    })
}

fn draw_shape(
    pixels: &mut [u8],
    h: usize,
    w: usize,
    shape: &str,
    row: f64,
    col: f64,
    radius: f64,
    color: [u8; 3],
) {
    let r = radius.ceil() as i64;
    let (cr, cc) = (row.round() as i64, col.round() as i64);
    for y in (cr - r).max(0)..=(cr + r).min(h as i64 - 1) {
        for x in (cc - r).max(0)..=(cc + r).min(w as i64 - 1) {
            let (dy, dx) = ((y - cr) as f64, (x - cc) as f64);
            let inside = match shape {
                "circle" => dy * dy + dx * dx <= radius * radius,
                "square" => dy.abs() <= radius * 0.8 && dx.abs() <= radius * 0.8,
                _ => dy.abs() <= radius * 0.3 || dx.abs() <= radius * 0.3, // cross
            };
            if inside {
                for c in 0..3 {
                    pixels[c * h * w + y as usize * w + x as usize] = color[c];
                }
            }
        }
    }
}

/// Loads a PNG, PPM, or PGM image as a `[3, H, W]` tensor in [0, 1].
/// Grayscale sources are replicated across the three channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "ppm" | "pgm" => {
            let img = pnm::read(path)?;
            let plane = img.height * img.width;
            let data = if img.channels == 1 {
                let mut d = Vec::with_capacity(3 * plane);
                for _ in 0..3 {
                    d.extend_from_slice(&img.data);
                }
                d
            } else {
                img.data
            };
            Tensor::from_vec(&[3, img.height, img.width], data)
        }
        "png" => {
            let img = image::open(path)
                .map_err(|e| Error::MalformedFile {
                    what: "png",
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?
                .to_rgb8();
            let (w, h) = (img.width() as usize, img.height() as usize);
            if w == 0 || h == 0 {
                return Err(Error::DegenerateImage);
            }
            let mut data = vec![0.0; 3 * h * w];
            for (x, y, p) in img.enumerate_pixels() {
                for c in 0..3 {
                    data[c * h * w + y as usize * w + x as usize] = p[c] as f64 / 255.0;
                }
            }
            Tensor::from_vec(&[3, h, w], data)
        }
        other => Err(Error::MalformedFile {
            what: "image",
            path: path.display().to_string(),
            detail: format!("unsupported extension {other:?}"),
        }),
    }
}

/// Parses a fixation file: UTF-8 text, one `row col` pair per line,
/// 0-based integers in the target frame. Bounds are validated.
pub fn load_fixations(
    path: impl AsRef<Path>,
    height: usize,
    width: usize,
) -> Result<FixationMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<i64> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::MalformedFile {
                what: "fixation",
                path: path.display().to_string(),
                detail: format!("line {}: expected `row col`, got {:?}", lineno + 1, line),
            })
        };
        let row = parse(it.next())?;
        let col = parse(it.next())?;
        if row < 0 || col < 0 || row >= height as i64 || col >= width as i64 {
            return Err(Error::FixationOutOfBounds {
                row,
                col,
                height,
                width,
            });
        }
        points.push((row as usize, col as usize));
    }
    FixationMap::new(height, width, points)
}

/// One row of a dataset manifest. Paths are relative to the manifest file.
#[derive(Clone, Debug)]
pub struct ManifestEntry {
    pub path_image: PathBuf,
    pub path_fixations: PathBuf,
    pub category: Option<String>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::MalformedFile {
        what: "manifest",
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedFile {
            what: "manifest",
            path: path.display().to_string(),
            detail: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(cf)) = (col("path_image"), col("path_fixations")) else {
        return Err(Error::MalformedFile {
            what: "manifest",
            path: path.display().to_string(),
            detail: "missing path_image / path_fixations columns".into(),
        });
    };
    let cc = col("category");
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedFile {
            what: "manifest",
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        entries.push(ManifestEntry {
            path_image: base.join(&record[ci]),
            path_fixations: base.join(&record[cf]),
            category: cc
                .and_then(|i| record.get(i))
                .filter(|s| !s.is_empty())
                .map(String::from),
        });
    }
    Ok(entries)
}

/// Loads and preprocesses every manifest entry to the spec's target frame.
pub fn load_dataset(manifest: impl AsRef<Path>, spec: &DatasetSpec) -> Result<Vec<Sample>> {
    let entries = load_manifest(manifest)?;
    let (tr, tc) = spec.target_size;
    let sigma = spec.sigma();
    entries
        .into_iter()
        .map(|entry| {
            let raw = load_image(&entry.path_image)?;
            let image = if (raw.shape()[1], raw.shape()[2]) == (tr, tc) {
                raw
            } else {
                resize_pad(&raw, spec.target_size)?.0
            };
            let fixations = load_fixations(&entry.path_fixations, tr, tc)?;
            if fixations.is_empty() {
                return Err(Error::EmptyFixations);
            }
            let density = fixations_to_density(&fixations, sigma)?;
            Ok(Sample {
                image,
                fixations,
                density,
                category: entry.category,
            })
        })
        .collect()
}

/// Writes a dataset as PPM images, fixation text files, and a manifest.
/// Returns the manifest path.
pub fn write_dataset(dir: impl AsRef<Path>, samples: &[Sample]) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let images = dir.join("images");
    let fixdir = dir.join("fixations");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    std::fs::create_dir_all(&fixdir).map_err(|e| Error::io(&fixdir, e))?;
    let manifest_path = dir.join("manifest.csv");
    let mut rows = String::from("path_image,path_fixations,category\n");
    for (i, sample) in samples.iter().enumerate() {
        let (h, w) = (sample.image.shape()[1], sample.image.shape()[2]);
        let img_rel = format!("images/{i:05}.ppm");
        let fix_rel = format!("fixations/{i:05}.txt");
        pnm::write(
            dir.join(&img_rel),
            &pnm::PnmImage {
                channels: 3,
                height: h,
                width: w,
                data: sample.image.data().to_vec(),
            },
        )?;
        let mut text = String::new();
        for &(r, c) in sample.fixations.points() {
            text.push_str(&format!("{r} {c}\n"));
        }
        let fix_path = fixdir.join(format!("{i:05}.txt"));
        std::fs::write(&fix_path, text).map_err(|e| Error::io(&fix_path, e))?;
        rows.push_str(&format!(
            "{},{},{}\n",
            img_rel,
            fix_rel,
            sample.category.as_deref().unwrap_or("")
        ));
    }
    std::fs::write(&manifest_path, rows).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_image(c: usize, h: usize, w: usize) -> Tensor {
        Tensor::from_vec(
            &[c, h, w],
            (0..c * h * w).map(|i| (i % 256) as f64 / 255.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn resize_pad_pure_resize_when_aspect_matches() {
        let (out, rect) = resize_pad(&ramp_image(3, 480, 640), (240, 320)).unwrap();
        assert_eq!(out.shape(), &[3, 240, 320]);
        assert_eq!(
            rect,
            ContentRect {
                top: 0,
                left: 0,
                height: 240,
                width: 320
            }
        );
        let (out, rect) = resize_pad(&ramp_image(3, 400, 400), (360, 360)).unwrap();
        assert_eq!(out.shape(), &[3, 360, 360]);
        assert_eq!(rect.height, 360);
        assert_eq!(rect.width, 360);
    }

    #[test]
    fn resize_pad_spec_arithmetic_200x400_to_216x384() {
        let (out, rect) = resize_pad(&ramp_image(3, 200, 400), (216, 384)).unwrap();
        assert_eq!(out.shape(), &[3, 216, 384]);
        assert_eq!(
            rect,
            ContentRect {
                top: 12,
                left: 0,
                height: 192,
                width: 384
            }
        );
        // padding rows are zero
        for x in 0..384 {
            assert_eq!(out.data()[x], 0.0);
            assert_eq!(out.data()[215 * 384 + x], 0.0);
        }
    }

    #[test]
    fn resize_pad_rejects_degenerate() {
        assert!(matches!(
            resize_pad(&Tensor::zeros(&[3, 0, 10]), (16, 16)).unwrap_err(),
            Error::DegenerateImage | Error::ShapeMismatch { .. }
        ));
    }

    #[test]
    fn density_single_fixation_peaks_there() {
        let f = FixationMap::new(33, 33, [(16, 16)]).unwrap();
        let d = fixations_to_density(&f, 2.0).unwrap();
        assert_eq!(d.argmax(), (16, 16));
        // radially nonincreasing along both axes
        for k in 0..16 {
            assert!(d.at(16, 16 + k) >= d.at(16, 16 + k + 1) - 1e-15);
            assert!(d.at(16 + k, 16) >= d.at(16 + k + 1, 16) - 1e-15);
        }
        assert!((d.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_two_far_fixations_split_mass() {
        let sigma = 2.0;
        let f = FixationMap::new(64, 64, [(16, 16), (48, 48)]).unwrap();
        let d = fixations_to_density(&f, sigma).unwrap();
        let disc_mass = |cr: i64, cc: i64| {
            let mut m = 0.0;
            for y in 0..64i64 {
                for x in 0..64i64 {
                    if (y - cr).pow(2) + (x - cc).pow(2) <= (4.0 * sigma * 4.0 * sigma) as i64 {
                        m += d.at(y as usize, x as usize);
                    }
                }
            }
            m
        };
        assert!((disc_mass(16, 16) - 0.5).abs() < 1e-6);
        assert!((disc_mass(48, 48) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn density_unit_sum_for_random_fixation_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let pts: Vec<_> = (0..n)
                .map(|_| (rng.random_range(0..48), rng.random_range(0..64)))
                .collect();
            let f = FixationMap::new(48, 64, pts).unwrap();
            let d = fixations_to_density(&f, 2.0).unwrap();
            assert!((d.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn density_requires_fixations() {
        let f = FixationMap::new(8, 8, []).unwrap();
        assert!(matches!(
            fixations_to_density(&f, 1.0).unwrap_err(),
            Error::EmptyFixations
        ));
    }

    fn dummy_samples(n: usize) -> Vec<Sample> {
        generate_synthetic(n, (16, 16), 1).unwrap()
    }

    #[test]
    fn split_rule_matches_spec_cases() {
        let spec = DatasetSpec::new("t", (16, 16));
        assert_eq!(validation_size(2000, &spec), 400);
        assert_eq!(validation_size(700, &spec), 200);
        assert_eq!(validation_size(50, &spec), 49);
        let (train, val) = split_dataset(dummy_samples(50), &spec, 3);
        assert_eq!((train.len(), val.len()), (1, 49));
    }

    #[test]
    fn split_is_deterministic_disjoint_covering() {
        let spec = DatasetSpec {
            min_val: 2,
            ..DatasetSpec::new("t", (16, 16))
        };
        let tag = |s: &Sample| s.fixations.points().to_vec();
        let (t1, v1) = split_dataset(dummy_samples(12), &spec, 9);
        let (t2, v2) = split_dataset(dummy_samples(12), &spec, 9);
        let ids = |set: &[Sample]| set.iter().map(tag).collect::<Vec<_>>();
        assert_eq!(ids(&t1), ids(&t2));
        assert_eq!(ids(&v1), ids(&v2));
        let mut all = ids(&t1);
        all.extend(ids(&v1));
        all.sort();
        let mut orig = ids(&dummy_samples(12));
        orig.sort();
        assert_eq!(all, orig);

        let (t3, _) = split_dataset(dummy_samples(12), &spec, 10);
        assert_ne!(ids(&t1), ids(&t3), "different seed should reshuffle");
    }

    #[test]
    fn synthetic_is_seeded_and_well_formed() {
        let a = generate_synthetic(4, (48, 64), 7).unwrap();
        let b = generate_synthetic(4, (48, 64), 7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image.data(), y.image.data());
            assert_eq!(x.fixations, y.fixations);
        }
        for s in &a {
            assert!((s.density.sum() - 1.0).abs() < 1e-6);
            assert!(!s.fixations.is_empty());
            assert!(SHAPES.contains(&s.category.as_deref().unwrap()));
            assert!(s.image.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn synthetic_mean_fixation_near_center() {
        let samples = generate_synthetic(50, (48, 64), 11).unwrap();
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0);
        for s in &samples {
            for &(r, c) in s.fixations.points() {
                sr += r as f64;
                sc += c as f64;
                n += 1;
            }
        }
        let (mr, mc) = (sr / n as f64, sc / n as f64);
        let diag = ((48.0f64 * 48.0) + (64.0 * 64.0)).sqrt();
        let dist = ((mr - 23.5).powi(2) + (mc - 31.5).powi(2)).sqrt();
        assert!(dist < 0.1 * diag, "mean ({mr:.1}, {mc:.1}) too far off-center");
    }

    #[test]
    fn dataset_round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate_synthetic(3, (16, 24), 5).unwrap();
        let manifest = write_dataset(dir.path(), &samples).unwrap();
        let spec = DatasetSpec::new("synth", (16, 24));
        let loaded = load_dataset(&manifest, &spec).unwrap();
        assert_eq!(loaded.len(), 3);
        for (a, b) in samples.iter().zip(&loaded) {
            assert_eq!(a.image.data(), b.image.data());
            assert_eq!(a.fixations, b.fixations);
            assert_eq!(a.density.data(), b.density.data());
            assert_eq!(a.category, b.category);
        }
    }

    #[test]
    fn fixation_loader_rejects_out_of_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        std::fs::write(&path, "399 0\n").unwrap();
        assert!(matches!(
            load_fixations(&path, 360, 360).unwrap_err(),
            Error::FixationOutOfBounds { row: 399, .. }
        ));
        std::fs::write(&path, "10 x\n").unwrap();
        assert!(load_fixations(&path, 360, 360).is_err());
        std::fs::write(&path, "10 20\n\n30 40\n").unwrap();
        assert_eq!(load_fixations(&path, 360, 360).unwrap().len(), 2);
    }
}
