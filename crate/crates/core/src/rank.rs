//! Model comparison by cumulative rank, and per-category improvement
//! aggregation between two models.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::metrics::Metric;

/// One model's metric values, e.g. a row of a published results table.
#[derive(Clone, Debug)]
pub struct ModelScores {
    pub name: String,
    pub values: IndexMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct RankRow {
    pub model: String,
    pub values: Vec<f64>,
    pub ranks: Vec<usize>,
    pub cumulative: usize,
}

/// Competition ranks over a metric subset, one row per model, sorted by
/// ascending cumulative rank (best first). Ties on the cumulative rank
/// keep the input order.
#[derive(Clone, Debug)]
pub struct RankTable {
    pub metrics: Vec<String>,
    pub rows: Vec<RankRow>,
}

/// Standard competition ("1224") ranking: tied values share the minimal
/// rank; the next distinct value ranks 1 + count of strictly better
/// entries.
pub fn competition_ranks(values: &[f64], higher_is_better: bool) -> Vec<usize> {
    values
        .iter()
        .map(|&v| {
            1 + values
                .iter()
                .filter(|&&o| if higher_is_better { o > v } else { o < v })
                .count()
        })
        .collect()
}

/// Ranks every model on each subset metric and sums the ranks. Metric
/// directions come from the standard metric set; unknown names are
/// rejected (use [`cumulative_rank_with_directions`] for custom columns).
pub fn cumulative_rank(scores: &[ModelScores], subset: &[&str]) -> Result<RankTable> {
    let directed: Vec<(String, bool)> = subset
        .iter()
        .map(|name| {
            Metric::parse(name)
                .map(|m| (m.name().to_string(), m.higher_is_better()))
                .ok_or_else(|| Error::InvalidConfig(format!("unknown metric {name:?}")))
        })
        .collect::<Result<_>>()?;
    cumulative_rank_with_directions(scores, &directed)
}

pub fn cumulative_rank_with_directions(
    scores: &[ModelScores],
    subset: &[(String, bool)],
) -> Result<RankTable> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(subset.len());
    for (metric, _) in subset {
        let column = scores
            .iter()
            .map(|s| {
                s.values.get(metric).copied().ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "model {:?} has no value for metric {:?}",
                        s.name, metric
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        columns.push(column);
    }
    let rank_columns: Vec<Vec<usize>> = columns
        .iter()
        .zip(subset)
        .map(|(col, (_, higher))| competition_ranks(col, *higher))
        .collect();

    let mut rows: Vec<RankRow> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ranks: Vec<usize> = rank_columns.iter().map(|col| col[i]).collect();
            RankRow {
                model: s.name.clone(),
                values: columns.iter().map(|col| col[i]).collect(),
                cumulative: ranks.iter().sum(),
                ranks,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.cumulative);
    Ok(RankTable {
        metrics: subset.iter().map(|(m, _)| m.clone()).collect(),
        rows,
    })
}

impl RankTable {
    pub fn position_of(&self, model: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.model == model).map(|i| i + 1)
    }

    /// Aligned text rendering, one model per line.
    pub fn render_text(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.model.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!("{:<name_w$}  ", "model");
        for m in &self.metrics {
            out.push_str(&format!("{m:>10} {:>5} ", "rank"));
        }
        out.push_str("cumulative\n");
        for row in &self.rows {
            out.push_str(&format!("{:<name_w$}  ", row.model));
            for (v, r) in row.values.iter().zip(&row.ranks) {
                out.push_str(&format!("{v:>10.3} {r:>5} "));
            }
            out.push_str(&format!("{:>10}\n", row.cumulative));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for m in &self.metrics {
            out.push_str(&format!(",{m},rank_{m}"));
        }
        out.push_str(",cumulative\n");
        for row in &self.rows {
            out.push_str(&row.model);
            for (v, r) in row.values.iter().zip(&row.ranks) {
                out.push_str(&format!(",{v},{r}"));
            }
            out.push_str(&format!(",{}\n", row.cumulative));
        }
        out
    }
}

/// Per-category means of two reports over the same samples, with signed
/// deltas (model A minus model B).
#[derive(Clone, Debug)]
pub struct CategoryTable {
    pub categories: Vec<String>,
    pub means_a: Vec<Vec<Option<f64>>>,
    pub means_b: Vec<Vec<Option<f64>>>,
    pub delta: Vec<Vec<Option<f64>>>,
}

pub fn aggregate_by_category(
    report_a: &crate::metrics::MetricReport,
    report_b: &crate::metrics::MetricReport,
) -> Result<CategoryTable> {
    if report_a.categories != report_b.categories {
        return Err(Error::InvalidConfig(
            "category aggregation needs reports over the same samples".into(),
        ));
    }
    if report_a.categories.iter().any(Option::is_none) {
        return Err(Error::InvalidConfig(
            "every sample must carry a category tag".into(),
        ));
    }
    let a = report_a.category_means();
    let b = report_b.category_means();
    let delta = a
        .iter()
        .zip(&b)
        .map(|((_, ma), (_, mb))| {
            ma.iter()
                .zip(mb)
                .map(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) => Some(x - y),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(CategoryTable {
        categories: a.iter().map(|(c, _)| c.clone()).collect(),
        means_a: a.into_iter().map(|(_, m)| m).collect(),
        means_b: b.into_iter().map(|(_, m)| m).collect(),
        delta,
    })
}

/// Orders categories by how much model A improves on model B across the
/// metric subset: each metric contributes +1 / -1 / 0 by direction-aware
/// comparison of the category means. Largest improvement first; ties
/// break alphabetically.
pub fn rank_category_improvements(
    table: &CategoryTable,
    subset: &[&str],
) -> Result<Vec<(String, i64)>> {
    let indices: Vec<(usize, bool)> = subset
        .iter()
        .map(|name| {
            let metric = Metric::parse(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown metric {name:?}")))?;
            let idx = Metric::ALL.iter().position(|m| *m == metric).unwrap();
            Ok((idx, metric.higher_is_better()))
        })
        .collect::<Result<_>>()?;
    let mut scored: Vec<(String, i64)> = table
        .categories
        .iter()
        .enumerate()
        .map(|(ci, cat)| {
            let score: i64 = indices
                .iter()
                .map(|&(mi, higher)| match table.delta[ci][mi] {
                    Some(d) if d != 0.0 => {
                        let improved = (d > 0.0) == higher;
                        if improved {
                            1
                        } else {
                            -1
                        }
                    }
                    _ => 0,
                })
                .sum();
            (cat.clone(), score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}
