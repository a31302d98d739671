//! 2-D map types shared by the data pipeline and the evaluation metrics.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// A plain real-valued 2-D map (prediction scores, densities, baselines).
#[derive(Clone, Debug, PartialEq)]
pub struct Map2d {
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl Map2d {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Map2d> {
        if height == 0 || width == 0 {
            return Err(Error::DegenerateImage);
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                op: "Map2d::new",
                detail: format!("{}x{} map needs {} values, got {}", height, width, height * width, data.len()),
            });
        }
        Ok(Map2d {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Map2d {
        Map2d {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn same_shape(&self, other: &Map2d) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Row/col of the largest value; first occurrence wins ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }
}

/// A per-pixel probability distribution: non-negative values with unit sum.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap(Map2d);

impl SaliencyMap {
    /// Wraps a map that already satisfies the distribution invariant.
    pub fn new(map: Map2d) -> Result<SaliencyMap> {
        if map.data.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidDistribution(
                "negative or non-finite value".into(),
            ));
        }
        let sum = map.sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDistribution(format!(
                "sum {sum} is not 1"
            )));
        }
        Ok(SaliencyMap(map))
    }

    /// Renormalizes a non-negative map with positive total mass.
    pub fn from_nonnegative(mut map: Map2d) -> Result<SaliencyMap> {
        if map.data.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidDistribution(
                "negative or non-finite value".into(),
            ));
        }
        let sum = map.sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        for v in &mut map.data {
            *v /= sum;
        }
        Ok(SaliencyMap(map))
    }

    pub fn uniform(height: usize, width: usize) -> SaliencyMap {
        let v = 1.0 / (height * width) as f64;
        SaliencyMap(Map2d {
            height,
            width,
            data: vec![v; height * width],
        })
    }

    pub fn map(&self) -> &Map2d {
        &self.0
    }

    pub fn into_map(self) -> Map2d {
        self.0
    }
}

impl std::ops::Deref for SaliencyMap {
    type Target = Map2d;
    fn deref(&self) -> &Map2d {
        &self.0
    }
}

/// Discrete gaze locations on a fixed grid ("binary fixation matrix").
/// Locations are stored as a sorted set of (row, col) pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixationMap {
    pub height: usize,
    pub width: usize,
    points: Vec<(usize, usize)>,
}

impl FixationMap {
    pub fn new(
        height: usize,
        width: usize,
        points: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<FixationMap> {
        let mut set = BTreeSet::new();
        for (row, col) in points {
            if row >= height || col >= width {
                return Err(Error::FixationOutOfBounds {
                    row: row as i64,
                    col: col as i64,
                    height,
                    width,
                });
            }
            set.insert((row, col));
        }
        Ok(FixationMap {
            height,
            width,
            points: set.into_iter().collect(),
        })
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.points.binary_search(&(row, col)).is_ok()
    }

    /// Values of `map` at the fixated pixels, in point order.
    pub fn values_in(&self, map: &Map2d) -> Vec<f64> {
        self.points.iter().map(|&(r, c)| map.at(r, c)).collect()
    }
}
