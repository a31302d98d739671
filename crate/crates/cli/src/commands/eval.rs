use std::path::Path;

use msinet::data::{load_dataset, load_manifest, DatasetSpec};
use msinet::map::Map2d;
use msinet::metrics::{EvalOptions, Metric};
use msinet::rank::{cumulative_rank, ModelScores};
use msinet::weights;

use super::ensure_out_dir;
use crate::manifest::RunManifest;
use crate::settings::{parse_size, parse_subset, FileConfig};
use crate::{usage, CliError, EvalArgs};

pub const DEFAULT_RANK_SUBSET: &str = "sAUC,CC,KLD";

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let seed = file.resolve(args.common.seed, "seed")?.unwrap_or(0);
    let values = file.resolve(args.values.clone(), "values")?;
    let dataset = file.resolve(args.dataset.clone(), "dataset")?;
    let pred = file.resolve(args.pred.clone(), "pred")?;
    if values.is_none() && (dataset.is_none() || pred.is_none()) {
        return Err(usage(
            "eval needs --dataset and --pred (and/or --values for a rank table)",
        ));
    }
    ensure_out_dir(&args.common.out)?;
    let mut manifest = RunManifest::new("eval", seed, serde_json::json!({}));

    if let (Some(dataset), Some(pred)) = (&dataset, &pred) {
        let size = match file.resolve(args.size.clone(), "size")? {
            Some(s) => parse_size(&s, "--size")?,
            None => (240, 320),
        };
        let grid = match file.resolve(args.grid.clone(), "grid")? {
            Some(g) => parse_size(&g, "--grid")?,
            None => (40, 40),
        };
        let opts = EvalOptions {
            emd_grid: grid,
            n_splits: file.resolve(args.splits, "splits")?.unwrap_or(100),
            seed,
            ..EvalOptions::default()
        };
        let mut spec = DatasetSpec::new("eval", size);
        spec.density_sigma = file.resolve(args.sigma, "sigma")?;
        let samples = load_dataset(dataset, &spec)?;
        let predictions = load_predictions(dataset, pred, size)?;
        if predictions.len() != samples.len() {
            return Err(usage(format!(
                "{} predictions for {} samples",
                predictions.len(),
                samples.len()
            )));
        }
        manifest.input(dataset)?;

        let report = msinet::metrics::evaluate_dataset(&predictions, &samples, &opts)?;
        let csv_path = args.common.out.join("report.csv");
        weights::write_atomic(&csv_path, report.to_csv().as_bytes())?;
        let agg = serde_json::json!({
            "aggregate": report.aggregate_json(),
            "samples": samples.len(),
            "emd_grid": [grid.0, grid.1],
            "splits": opts.n_splits,
        });
        let agg_path = args.common.out.join("aggregate.json");
        weights::write_atomic(&agg_path, serde_json::to_string_pretty(&agg).unwrap().as_bytes())?;
        manifest.output(&csv_path);
        manifest.output(&agg_path);

        println!("aggregate over {} samples:", samples.len());
        for (metric, value) in Metric::ALL.iter().zip(report.aggregate()) {
            match value {
                Some(v) => println!("  {:<6} {:>10.4}", metric.name(), v),
                None => println!("  {:<6} {:>10}", metric.name(), "missing"),
            }
        }

        if report.categories.iter().all(Option::is_some) {
            let mut text = String::from("category");
            for m in Metric::ALL {
                text.push(',');
                text.push_str(m.name());
            }
            text.push('\n');
            for (cat, means) in report.category_means() {
                text.push_str(&cat);
                for v in means {
                    text.push(',');
                    if let Some(v) = v {
                        text.push_str(&format!("{v:.6}"));
                    }
                }
                text.push('\n');
            }
            let cat_path = args.common.out.join("per_category.csv");
            weights::write_atomic(&cat_path, text.as_bytes())?;
            manifest.output(&cat_path);
        }
    }

    if let Some(values) = &values {
        let scores = load_scores(values)?;
        let subset_raw = file
            .resolve(args.rank_subset.clone(), "rank-subset")?
            .unwrap_or_else(|| DEFAULT_RANK_SUBSET.to_string());
        let subset = parse_subset(&subset_raw);
        let subset_refs: Vec<&str> = subset.iter().map(String::as_str).collect();
        let table = cumulative_rank(&scores, &subset_refs)?;
        print!("{}", table.render_text());
        let rank_path = args.common.out.join("rank_table.csv");
        weights::write_atomic(&rank_path, table.to_csv().as_bytes())?;
        manifest.input(values)?;
        manifest.output(&rank_path);
    }

    manifest.write(&args.common.out)?;
    Ok(())
}

/// Reads the `.f32` raw dumps written by `predict`, matched to the
/// manifest entries by image file stem.
fn load_predictions(
    dataset: &Path,
    pred_dir: &Path,
    size: (usize, usize),
) -> Result<Vec<Map2d>, CliError> {
    let entries = load_manifest(dataset)?;
    entries
        .iter()
        .map(|entry| {
            let stem = entry
                .path_image
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            let path = pred_dir.join(format!("{stem}.f32"));
            let bytes = std::fs::read(&path)
                .map_err(|e| usage(format!("prediction {}: {e}", path.display())))?;
            if bytes.len() != size.0 * size.1 * 4 {
                return Err(usage(format!(
                    "prediction {} has {} bytes, expected {} for {}x{}",
                    path.display(),
                    bytes.len(),
                    size.0 * size.1 * 4,
                    size.0,
                    size.1
                )));
            }
            let data: Vec<f64> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            Ok(Map2d::new(size.0, size.1, data)?)
        })
        .collect()
}

/// Multi-model scores CSV: a `model` column plus one column per metric.
fn load_scores(path: &Path) -> Result<Vec<ModelScores>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("--values {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| usage("--values file is empty"))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("model") {
        return Err(usage("--values file must start with a `model` column"));
    }
    let mut scores = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(usage(format!("--values row has {} cells, expected {}", cells.len(), header.len())));
        }
        let mut values = indexmap::IndexMap::new();
        for (name, cell) in header.iter().skip(1).zip(cells.iter().skip(1)) {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| usage(format!("--values: bad number {cell:?} for {name}")))?;
            values.insert(name.clone(), v);
        }
        scores.push(ModelScores {
            name: cells[0].to_string(),
            values,
        });
    }
    Ok(scores)
}
