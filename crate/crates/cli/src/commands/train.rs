use msinet::data::split_dataset;
use msinet::train;
use msinet::weights;
use msinet::Model;

use super::{
    config_snapshot, ensure_out_dir, resolve_dataset, resolve_model_config, resolve_train_config,
};
use crate::manifest::RunManifest;
use crate::settings::FileConfig;
use crate::{usage, CliError, TrainArgs};

pub fn run(args: TrainArgs, finetune: bool) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let seed = file.resolve(args.common.seed, "seed")?.unwrap_or(0);
    let (samples, spec) = resolve_dataset(&args.data, &args.model, &file, seed)?;
    let model_config = resolve_model_config(&args.model, &file, seed, spec.target_size)?;
    if model_config.input_size != spec.target_size {
        return Err(usage(format!(
            "--size {}x{} does not match the dataset frame {}x{}",
            model_config.input_size.0,
            model_config.input_size.1,
            spec.target_size.0,
            spec.target_size.1
        )));
    }
    let train_config = resolve_train_config(&args, &file, seed)?;
    let base_weights = file.resolve(args.weights.clone(), "weights")?;
    if finetune && base_weights.is_none() {
        return Err(usage("finetune requires --weights PATH (the base checkpoint)"));
    }

    let (train_set, val_set) = split_dataset(samples, &spec, seed);
    eprintln!(
        "training on {} samples, validating on {}",
        train_set.len(),
        val_set.len()
    );

    let mut model = Model::new(model_config.clone())?;
    let mut manifest = RunManifest::new(
        if finetune { "finetune" } else { "train" },
        seed,
        config_snapshot(
            &model_config,
            serde_json::json!({
                "epochs": train_config.epochs,
                "learning_rate": train_config.learning_rate,
                "dataset": spec.name,
                "train_samples": train_set.len(),
                "val_samples": val_set.len(),
            }),
        ),
    );
    if let Some(dataset) = &args.data.dataset {
        manifest.input(dataset)?;
    }

    let report = if let Some(base) = &base_weights {
        manifest.input(base)?;
        train::finetune(&mut model, base, &train_set, &val_set, &train_config)?
    } else {
        train::train(&mut model, &train_set, &val_set, &train_config)?
    };

    ensure_out_dir(&args.common.out)?;
    let checkpoint = args.common.out.join("checkpoint.msiw");
    weights::write_atomic(&checkpoint, &weights::serialize(&model))?;
    let log_path = args.common.out.join("train_log.csv");
    weights::write_atomic(&log_path, report.to_csv().as_bytes())?;

    for row in &report.log {
        eprintln!(
            "epoch {:>4}  train_kld {:.6}  val_kld {:.6}",
            row.epoch, row.mean_train_kld, row.val_kld
        );
    }
    println!(
        "best epoch {} (val_kld {:.6}); checkpoint: {}",
        report.best_epoch,
        report.best_val_kld,
        checkpoint.display()
    );

    manifest.output(&checkpoint);
    manifest.output(&log_path);
    manifest.write(&args.common.out)?;
    Ok(())
}
