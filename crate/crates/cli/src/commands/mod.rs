pub mod ablate;
pub mod eval;
pub mod inspect;
pub mod predict;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use msinet::data::{DatasetSpec, Sample};
use msinet::{ModelConfig, TrainConfig};

use crate::settings::{apply_variant, parse_size, FileConfig};
use crate::{usage, CliError, DataArgs, ModelArgs, TrainArgs};

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("creating output dir {}: {e}", dir.display()).into())
}

/// Resolves the model configuration from flags + config file.
pub fn resolve_model_config(
    args: &ModelArgs,
    file: &FileConfig,
    seed: u64,
    default_size: (usize, usize),
) -> Result<ModelConfig, CliError> {
    let mut config = ModelConfig {
        seed,
        ..ModelConfig::default()
    };
    config.channel_scale = file.resolve(args.scale, "scale")?.unwrap_or(1.0);
    config.input_size = match file.resolve(args.size.clone(), "size")? {
        Some(s) => parse_size(&s, "--size")?,
        None => default_size,
    };
    apply_variant(&mut config, file.resolve_variant(args.variant, "variant")?);
    config
        .validate()
        .map_err(|e| usage(format!("invalid model configuration: {e}")))?;
    Ok(config)
}

/// Loads either the synthetic set or a manifest dataset, in the target
/// frame implied by `--size` (default 240x320 for files, 48x64 synthetic).
pub fn resolve_dataset(
    data: &DataArgs,
    model: &ModelArgs,
    file: &FileConfig,
    seed: u64,
) -> Result<(Vec<Sample>, DatasetSpec), CliError> {
    let synthetic = file.resolve(data.synthetic, "synthetic")?;
    let dataset: Option<PathBuf> = file.resolve(data.dataset.clone(), "dataset")?;
    let sigma = file.resolve(data.sigma, "sigma")?;
    let explicit_size = match file.resolve(model.size.clone(), "size")? {
        Some(s) => Some(parse_size(&s, "--size")?),
        None => None,
    };
    match (synthetic, dataset) {
        (Some(_), Some(_)) => Err(usage("--synthetic and --dataset are mutually exclusive")),
        (None, None) => Err(usage(
            "a data source is required: pass --dataset PATH or --synthetic N",
        )),
        (Some(n), None) => {
            if n < 2 {
                return Err(usage("--synthetic needs at least 2 samples"));
            }
            let size = explicit_size.unwrap_or((48, 64));
            let samples = msinet::data::generate_synthetic(n, size, seed)?;
            let mut spec = DatasetSpec::new("synthetic", size);
            spec.density_sigma = sigma;
            Ok((samples, spec))
        }
        (None, Some(path)) => {
            if !path.exists() {
                return Err(usage(format!(
                    "--dataset {}: file does not exist",
                    path.display()
                )));
            }
            let size = explicit_size.unwrap_or((240, 320));
            let mut spec = DatasetSpec::new("dataset", size);
            spec.density_sigma = sigma;
            let samples = msinet::data::load_dataset(&path, &spec)?;
            if samples.len() < 2 {
                return Err(usage("dataset must contain at least 2 samples"));
            }
            Ok((samples, spec))
        }
    }
}

pub fn resolve_train_config(
    args: &TrainArgs,
    file: &FileConfig,
    seed: u64,
) -> Result<TrainConfig, CliError> {
    let mut tc = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    if let Some(epochs) = file.resolve(args.epochs, "epochs")? {
        tc.epochs = epochs;
    }
    if let Some(lr) = file.resolve(args.lr, "lr")? {
        tc.learning_rate = lr;
    }
    tc.validate()
        .map_err(|e| usage(format!("invalid training configuration: {e}")))?;
    Ok(tc)
}

pub fn config_snapshot(model: &ModelConfig, extra: serde_json::Value) -> serde_json::Value {
    let mut value = serde_json::to_value(model).expect("config serializes");
    if let (Some(obj), serde_json::Value::Object(extra)) = (value.as_object_mut(), extra) {
        for (k, v) in extra {
            obj.insert(k, v);
        }
    }
    value
}
