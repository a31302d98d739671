//! The nine-metric saliency evaluation protocol.
//!
//! Value-based metrics (the AUC family, NSS, CC) read the prediction as an
//! arbitrary score map. Distribution-based metrics (SIM, KLD, EMD, IG)
//! renormalize their inputs first, so they see the prediction only through
//! its induced distribution. Metrics that are undefined on degenerate
//! input (zero variance) come back as `None` and are reported as missing,
//! never as a silent zero.
//!
//! Threshold conventions: a pixel equal to the threshold counts as
//! positive, ROC curves are anchored at (0,0) and (1,1) and integrated by
//! trapezoid. AUC-Judd thresholds at each distinct fixated value; the
//! sampled AUC variants threshold at every distinct observed value of the
//! two samples.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Sample;
use crate::emd;
use crate::error::{Error, Result};
use crate::map::{FixationMap, Map2d, SaliencyMap};

/// Regularization constant shared by the divergence loss/metric and IG.
pub const DEFAULT_EPSILON: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Metric {
    AucJudd,
    Sim,
    Emd,
    AucBorji,
    Sauc,
    Cc,
    Nss,
    Kld,
    Ig,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::AucJudd,
        Metric::Sim,
        Metric::Emd,
        Metric::AucBorji,
        Metric::Sauc,
        Metric::Cc,
        Metric::Nss,
        Metric::Kld,
        Metric::Ig,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::AucJudd => "AUC_J",
            Metric::Sim => "SIM",
            Metric::Emd => "EMD",
            Metric::AucBorji => "AUC_B",
            Metric::Sauc => "sAUC",
            Metric::Cc => "CC",
            Metric::Nss => "NSS",
            Metric::Kld => "KLD",
            Metric::Ig => "IG",
        }
    }

    pub fn parse(name: &str) -> Option<Metric> {
        let fold = name.to_ascii_lowercase().replace(['-', '_'], "");
        Metric::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase().replace(['-', '_'], "") == fold)
    }

    /// Direction of the metric: `true` if larger values are better.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Emd | Metric::Kld)
    }
}

fn check_shapes(op: &'static str, p: &Map2d, q: &Map2d) -> Result<()> {
    if !p.same_shape(q) {
        return Err(Error::ShapeMismatch {
            op,
            detail: format!("{}x{} vs {}x{}", p.height, p.width, q.height, q.width),
        });
    }
    Ok(())
}

fn check_fixations(p: &Map2d, f: &FixationMap) -> Result<()> {
    if f.height != p.height || f.width != p.width {
        return Err(Error::ShapeMismatch {
            op: "metric",
            detail: format!(
                "map {}x{} vs fixations {}x{}",
                p.height, p.width, f.height, f.width
            ),
        });
    }
    if f.is_empty() {
        return Err(Error::EmptyFixations);
    }
    Ok(())
}

/// Divergence of the target from the prediction. Both maps are
/// renormalized; supply the density map as `q`.
pub fn metric_kld(p: &Map2d, q: &Map2d, eps: f64) -> Result<f64> {
    check_shapes("metric_kld", p, q)?;
    let p = SaliencyMap::from_nonnegative(p.clone())?;
    let q = SaliencyMap::from_nonnegative(q.clone())?;
    Ok(crate::ops::kld_sum(p.data(), q.data(), eps))
}

/// Pearson correlation over pixels; `None` when either map has zero
/// variance.
pub fn metric_cc(p: &Map2d, q: &Map2d) -> Result<Option<f64>> {
    check_shapes("metric_cc", p, q)?;
    let n = p.data().len() as f64;
    let (mp, mq) = (p.sum() / n, q.sum() / n);
    let (mut cov, mut vp, mut vq) = (0.0, 0.0, 0.0);
    for (&a, &b) in p.data().iter().zip(q.data()) {
        cov += (a - mp) * (b - mq);
        vp += (a - mp) * (a - mp);
        vq += (b - mq) * (b - mq);
    }
    if vp == 0.0 || vq == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (vp.sqrt() * vq.sqrt())))
}

/// Histogram intersection of the two induced distributions.
pub fn metric_sim(p: &Map2d, q: &Map2d) -> Result<f64> {
    check_shapes("metric_sim", p, q)?;
    let p = SaliencyMap::from_nonnegative(p.clone())?;
    let q = SaliencyMap::from_nonnegative(q.clone())?;
    Ok(p.data()
        .iter()
        .zip(q.data())
        .map(|(&a, &b)| a.min(b))
        .sum())
}

/// Mean of the standardized map at the fixations; `None` on constant maps.
pub fn metric_nss(p: &Map2d, f: &FixationMap) -> Result<Option<f64>> {
    check_fixations(p, f)?;
    let n = p.data().len() as f64;
    let mean = p.sum() / n;
    let var = p.data().iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return Ok(None);
    }
    let std = var.sqrt();
    let total: f64 = f.values_in(p).iter().map(|&v| (v - mean) / std).sum();
    Ok(Some(total / f.len() as f64))
}

fn trapezoid(points: &mut Vec<(f64, f64)>) -> f64 {
    points.push((0.0, 0.0));
    points.push((1.0, 1.0));
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// ROC area with negatives = all non-fixated pixels and thresholds at each
/// distinct fixated value.
pub fn metric_auc_judd(p: &Map2d, f: &FixationMap) -> Result<f64> {
    check_fixations(p, f)?;
    let pos = f.values_in(p);
    let mut neg = Vec::with_capacity(p.data().len() - pos.len());
    for r in 0..p.height {
        for c in 0..p.width {
            if !f.contains(r, c) {
                neg.push(p.at(r, c));
            }
        }
    }
    let mut pos_sorted = pos.clone();
    pos_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut neg_sorted = neg;
    neg_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut thresholds = pos_sorted.clone();
    thresholds.dedup();
    let count_ge = |sorted: &[f64], thr: f64| sorted.len() - sorted.partition_point(|&v| v < thr);
    let mut points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&thr| {
            let tpr = count_ge(&pos_sorted, thr) as f64 / pos_sorted.len() as f64;
            let fpr = if neg_sorted.is_empty() {
                0.0
            } else {
                count_ge(&neg_sorted, thr) as f64 / neg_sorted.len() as f64
            };
            (fpr, tpr)
        })
        .collect();
    Ok(trapezoid(&mut points))
}

/// Rank-style ROC area of two value samples, thresholds at every distinct
/// observed value (ties across the classes earn half credit).
pub fn two_sample_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut pos_sorted = pos.to_vec();
    pos_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut neg_sorted = neg.to_vec();
    neg_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut thresholds: Vec<f64> = pos_sorted.iter().chain(&neg_sorted).cloned().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let count_ge = |sorted: &[f64], thr: f64| sorted.len() - sorted.partition_point(|&v| v < thr);
    let mut points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&thr| {
            (
                count_ge(&neg_sorted, thr) as f64 / neg_sorted.len() as f64,
                count_ge(&pos_sorted, thr) as f64 / pos_sorted.len() as f64,
            )
        })
        .collect();
    trapezoid(&mut points)
}

/// Mean [`two_sample_auc`] of the fixated values against each provided
/// negative location set. Shared core of AUC-Borji and shuffled AUC.
pub fn auc_with_negative_sets(
    p: &Map2d,
    f: &FixationMap,
    negative_sets: &[Vec<(usize, usize)>],
) -> Result<f64> {
    check_fixations(p, f)?;
    assert!(!negative_sets.is_empty());
    let pos = f.values_in(p);
    let mut total = 0.0;
    for set in negative_sets {
        let neg: Vec<f64> = set.iter().map(|&(r, c)| p.at(r, c)).collect();
        total += two_sample_auc(&pos, &neg);
    }
    Ok(total / negative_sets.len() as f64)
}

/// AUC with `|F|` negatives drawn uniformly from the non-fixated pixels,
/// averaged over `n_splits` seeded draws.
pub fn metric_auc_borji(
    p: &Map2d,
    f: &FixationMap,
    n_splits: usize,
    seed: u64,
) -> Result<f64> {
    check_fixations(p, f)?;
    let mut allowed = Vec::with_capacity(p.data().len() - f.len());
    for r in 0..p.height {
        for c in 0..p.width {
            if !f.contains(r, c) {
                allowed.push((r, c));
            }
        }
    }
    if allowed.is_empty() {
        // Every pixel fixated: no negatives to compare against.
        return Err(Error::EmptyFixationPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets: Vec<Vec<(usize, usize)>> = (0..n_splits)
        .map(|_| {
            (0..f.len())
                .map(|_| allowed[rng.random_range(0..allowed.len())])
                .collect()
        })
        .collect();
    auc_with_negative_sets(p, f, &sets)
}

/// Shuffled AUC: negatives drawn from the pooled fixation locations of the
/// other images (minus this image's own fixations). A location fixated in
/// several other images stays in the pool once per image, so sampling
/// reproduces the empirical fixation distribution; this is what penalizes
/// center-biased predictions.
pub fn metric_sauc(
    p: &Map2d,
    f: &FixationMap,
    other_fixations: &[FixationMap],
    n_splits: usize,
    seed: u64,
) -> Result<f64> {
    check_fixations(p, f)?;
    let pool: Vec<(usize, usize)> = other_fixations
        .iter()
        .flat_map(|o| o.points().iter().copied())
        .filter(|&(r, c)| r < p.height && c < p.width && !f.contains(r, c))
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyFixationPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets: Vec<Vec<(usize, usize)>> = (0..n_splits)
        .map(|_| {
            (0..f.len())
                .map(|_| pool[rng.random_range(0..pool.len())])
                .collect()
        })
        .collect();
    auc_with_negative_sets(p, f, &sets)
}

/// EMD between the induced distributions, computed on a capped grid.
pub fn metric_emd(p: &Map2d, q: &Map2d, grid: (usize, usize)) -> Result<f64> {
    check_shapes("metric_emd", p, q)?;
    let p = SaliencyMap::from_nonnegative(p.clone())?;
    let q = SaliencyMap::from_nonnegative(q.clone())?;
    emd::emd(&p, &q, grid)
}

/// Information gain (bits) of the prediction over a baseline at the
/// fixated pixels. Both maps are renormalized.
pub fn metric_ig(p: &Map2d, f: &FixationMap, baseline: &Map2d, eps: f64) -> Result<f64> {
    check_fixations(p, f)?;
    check_shapes("metric_ig", p, baseline)?;
    let p = SaliencyMap::from_nonnegative(p.clone())?;
    let b = SaliencyMap::from_nonnegative(baseline.clone())?;
    let total: f64 = f
        .points()
        .iter()
        .map(|&(r, c)| (eps + p.at(r, c)).log2() - (eps + b.at(r, c)).log2())
        .sum();
    Ok(total / f.len() as f64)
}

/// Default IG baseline: an untruncated center Gaussian, sigma = width / 4.
pub fn center_prior(height: usize, width: usize) -> SaliencyMap {
    let sigma = width as f64 / 4.0;
    let (cr, cc) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
    let mut map = Map2d::zeros(height, width);
    for r in 0..height {
        for c in 0..width {
            let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
            map.set(r, c, (-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    SaliencyMap::from_nonnegative(map).unwrap()
}

/// Knobs of the full per-sample evaluation.
#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub emd_grid: (usize, usize),
    pub n_splits: usize,
    pub seed: u64,
    pub eps: f64,
}

impl Default for EvalOptions {
    fn default() -> EvalOptions {
        EvalOptions {
            emd_grid: (40, 40),
            n_splits: 100,
            seed: 0,
            eps: DEFAULT_EPSILON,
        }
    }
}

/// All nine metrics of one prediction against one sample's ground truth.
/// `pool` holds the other images' fixations for the shuffled AUC; when
/// empty, sAUC is reported missing.
pub fn evaluate_sample(
    prediction: &Map2d,
    sample: &Sample,
    pool: &[FixationMap],
    opts: &EvalOptions,
) -> Result<Vec<(Metric, Option<f64>)>> {
    let q = sample.density.map();
    let f = &sample.fixations;
    let baseline = center_prior(prediction.height, prediction.width);
    let sauc = if pool.is_empty() {
        None
    } else {
        Some(metric_sauc(prediction, f, pool, opts.n_splits, opts.seed)?)
    };
    Ok(vec![
        (Metric::AucJudd, Some(metric_auc_judd(prediction, f)?)),
        (Metric::Sim, Some(metric_sim(prediction, q)?)),
        (Metric::Emd, Some(metric_emd(prediction, q, opts.emd_grid)?)),
        (
            Metric::AucBorji,
            Some(metric_auc_borji(prediction, f, opts.n_splits, opts.seed)?),
        ),
        (Metric::Sauc, sauc),
        (Metric::Cc, metric_cc(prediction, q)?),
        (Metric::Nss, metric_nss(prediction, f)?),
        (Metric::Kld, Some(metric_kld(prediction, q, opts.eps)?)),
        (
            Metric::Ig,
            Some(metric_ig(prediction, f, baseline.map(), opts.eps)?),
        ),
    ])
}

/// Per-sample metric values plus aggregate means. Missing values stay
/// `None` through aggregation.
#[derive(Clone, Debug)]
pub struct MetricReport {
    /// One row per sample: values in [`Metric::ALL`] order.
    pub per_sample: Vec<Vec<Option<f64>>>,
    pub categories: Vec<Option<String>>,
}

impl MetricReport {
    /// Mean of each metric over the samples where it is present.
    pub fn aggregate(&self) -> Vec<Option<f64>> {
        (0..Metric::ALL.len())
            .map(|m| {
                let values: Vec<f64> =
                    self.per_sample.iter().filter_map(|row| row[m]).collect();
                if values.is_empty() {
                    None
                } else {
                    Some(values.iter().sum::<f64>() / values.len() as f64)
                }
            })
            .collect()
    }

    /// Per-category means; categories in first-appearance order.
    pub fn category_means(&self) -> Vec<(String, Vec<Option<f64>>)> {
        let mut order: Vec<String> = Vec::new();
        for cat in self.categories.iter().flatten() {
            if !order.contains(cat) {
                order.push(cat.clone());
            }
        }
        order
            .into_iter()
            .map(|cat| {
                let rows: Vec<&Vec<Option<f64>>> = self
                    .per_sample
                    .iter()
                    .zip(&self.categories)
                    .filter(|(_, c)| c.as_deref() == Some(cat.as_str()))
                    .map(|(row, _)| row)
                    .collect();
                let means = (0..Metric::ALL.len())
                    .map(|m| {
                        let values: Vec<f64> = rows.iter().filter_map(|row| row[m]).collect();
                        if values.is_empty() {
                            None
                        } else {
                            Some(values.iter().sum::<f64>() / values.len() as f64)
                        }
                    })
                    .collect();
                (cat, means)
            })
            .collect()
    }

    /// CSV: one row per sample, one column per metric; missing values stay
    /// empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,category");
        for m in Metric::ALL {
            out.push(',');
            out.push_str(m.name());
        }
        out.push('\n');
        for (i, row) in self.per_sample.iter().enumerate() {
            out.push_str(&format!(
                "{},{}",
                i,
                self.categories[i].as_deref().unwrap_or("")
            ));
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn aggregate_json(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        for (m, v) in Metric::ALL.iter().zip(self.aggregate()) {
            obj.insert(
                m.name().to_string(),
                v.map_or(serde_json::Value::Null, |x| serde_json::json!(x)),
            );
        }
        serde_json::Value::Object(obj)
    }
}

/// Evaluates one prediction per sample. Per-sample work runs data-parallel;
/// the sAUC pool of a sample is every other sample's fixations, and seeds
/// derive from `opts.seed` plus the sample index, so the result does not
/// depend on thread scheduling.
pub fn evaluate_dataset(
    predictions: &[Map2d],
    samples: &[Sample],
    opts: &EvalOptions,
) -> Result<MetricReport> {
    if predictions.len() != samples.len() {
        return Err(Error::ShapeMismatch {
            op: "evaluate_dataset",
            detail: format!("{} predictions vs {} samples", predictions.len(), samples.len()),
        });
    }
    let per_sample: Vec<Vec<Option<f64>>> = predictions
        .par_iter()
        .zip(samples.par_iter())
        .enumerate()
        .map(|(i, (prediction, sample))| {
            let pool: Vec<FixationMap> = samples
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s.fixations.clone())
                .collect();
            let opts = EvalOptions {
                seed: opts.seed.wrapping_add(i as u64),
                ..opts.clone()
            };
            evaluate_sample(prediction, sample, &pool, &opts)
                .map(|values| values.into_iter().map(|(_, v)| v).collect())
        })
        .collect::<Result<_>>()?;
    Ok(MetricReport {
        per_sample,
        categories: samples.iter().map(|s| s.category.clone()).collect(),
    })
}
