use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use msinet::data::{load_image, load_manifest, resize_pad};
use msinet::pnm;
use msinet::train::normalize_output;
use msinet::weights;
use msinet::{Model, Tensor};

use super::{config_snapshot, ensure_out_dir, resolve_model_config};
use crate::manifest::RunManifest;
use crate::settings::FileConfig;
use crate::{usage, CliError, PredictArgs};

pub fn run(args: PredictArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let seed = file.resolve(args.common.seed, "seed")?.unwrap_or(0);
    let config = resolve_model_config(&args.model, &file, seed, (240, 320))?;
    if !args.dataset.exists() {
        return Err(usage(format!(
            "--dataset {}: file does not exist",
            args.dataset.display()
        )));
    }

    let mut model = Model::build(config.clone())?;
    weights::load_weights(&mut model, &args.weights, false)?;

    let entries = load_manifest(&args.dataset)?;
    if entries.is_empty() {
        return Err(usage("dataset manifest has no entries"));
    }
    let images: Vec<(String, Tensor)> = entries
        .iter()
        .map(|entry| {
            let stem = entry
                .path_image
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "image".to_string());
            let raw = load_image(&entry.path_image)?;
            let image = if (raw.shape()[1], raw.shape()[2]) == config.input_size {
                raw
            } else {
                resize_pad(&raw, config.input_size)?.0
            };
            let s = image.shape().to_vec();
            Ok((stem, image.reshape(&[1, s[0], s[1], s[2]])?))
        })
        .collect::<Result<_, msinet::Error>>()?;

    ensure_out_dir(&args.common.out)?;
    let mut manifest = RunManifest::new(
        "predict",
        seed,
        config_snapshot(&config, serde_json::json!({"images": images.len()})),
    );
    manifest.input(&args.weights)?;
    manifest.input(&args.dataset)?;

    let outputs: Vec<(PathBuf, PathBuf)> = images
        .par_iter()
        .map(|(stem, image)| {
            let raw = model.forward(image)?;
            let map = normalize_output(&raw)?.remove(0);

            // 16-bit PGM scaled by the per-image maximum.
            let peak = map.data().iter().cloned().fold(0.0f64, f64::max);
            let pgm = pnm::PnmImage {
                channels: 1,
                height: map.height,
                width: map.width,
                data: map.data().iter().map(|&v| v / peak).collect(),
            };
            let pgm_path = args.common.out.join(format!("{stem}.pgm"));
            pnm::write_with_maxval(&pgm_path, &pgm, 65535)?;

            // Raw dump preserving the exact distribution for evaluation.
            let mut bytes = Vec::with_capacity(4 * map.data().len());
            for &v in map.data() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            let raw_path = args.common.out.join(format!("{stem}.f32"));
            weights::write_atomic(&raw_path, &bytes)?;
            Ok((pgm_path, raw_path))
        })
        .collect::<Result<_, msinet::Error>>()?;
    for (pgm, raw) in &outputs {
        manifest.output(pgm);
        manifest.output(raw);
    }
    println!("wrote {} saliency maps to {}", outputs.len(), args.common.out.display());

    if args.timing_repeats > 0 {
        let mut rates = Vec::with_capacity(args.timing_repeats);
        for _ in 0..args.timing_repeats {
            let start = Instant::now();
            for (_, image) in &images {
                let _ = model.forward(image)?;
            }
            rates.push(images.len() as f64 / start.elapsed().as_secs_f64());
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / rates.len() as f64;
        println!(
            "throughput: {:.2} images/s (std {:.2} over {} passes)",
            mean,
            var.sqrt(),
            args.timing_repeats
        );
    }

    manifest.write(&args.common.out)?;
    Ok(())
}
