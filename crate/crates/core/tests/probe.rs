// Temporary timing/convergence probe. Deleted before release.
use msinet::data::generate_synthetic_detailed;
use msinet::model::{Model, ModelConfig};
use msinet::train::{train, TrainConfig};

#[test]
#[ignore]
fn overfit_probe() {
    let t0 = std::time::Instant::now();
    let seed: u64 = std::env::var("PROBE_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(2024);
    let detailed = generate_synthetic_detailed(10, (48, 64), seed).unwrap();
    let samples: Vec<_> = detailed.iter().map(|d| d.sample.clone()).collect();
    let cfg = ModelConfig {
        channel_scale: 0.125,
        input_size: (48, 64),
        seed,
        ..ModelConfig::default()
    };
    let mut model = Model::new(cfg).unwrap();
    let epochs: usize = std::env::var("PROBE_EPOCHS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(50);
    let beta2: f64 = std::env::var("PROBE_BETA2")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0.999);
    let tc = TrainConfig {
        learning_rate: 1e-3,
        epochs,
        adam_beta2: beta2,
        seed,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &samples, &samples, &tc).unwrap();
    for row in report.log.iter().step_by(5).chain(report.log.last()) {
        eprintln!(
            "epoch {:>3}  train {:.5}  val {:.5}  t {:.1}s",
            row.epoch, row.mean_train_kld, row.val_kld, row.wall_seconds
        );
    }
    eprintln!("total {:.1}s", t0.elapsed().as_secs_f64());

    // argmax hit rate and per-image loss breakdown
    let mut hits = 0;
    for (i, d) in detailed.iter().enumerate() {
        let raw = model.forward(&d.sample.image_batch()).unwrap();
        let pred = msinet::train::normalize_output(&raw).unwrap().remove(0);
        let (r, c) = pred.argmax();
        let hit = d.targets.iter().any(|t| t.contains(r, c));
        hits += hit as usize;
        let kld = msinet::train::kld_value(&pred, &d.sample.density, 1e-7).unwrap();
        eprintln!(
            "img {i}: kld {kld:.4} targets {} fix {} hit {hit}",
            d.targets.len(),
            d.sample.fixations.len()
        );
    }
    eprintln!("argmax hits: {hits}/10");
}
