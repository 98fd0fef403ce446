//! Random-forest autoregressor built from CART regression trees.
//!
//! Trees are grown to purity (`min_samples_leaf = 1`, unlimited depth). At
//! every split a random subset of `ceil(dim / 3)` features is searched; the
//! split maximising `S_L^2 / W_L + S_R^2 / W_R` (equivalently minimising the
//! weighted child variance) wins, with thresholds at midpoints between
//! consecutive distinct values. Identical training rows are merged into
//! weights before fitting.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ar_input, predict_recursive, ArSample, Forecast, Forecaster, OneStepPredictor};
use crate::error::{Error, Result};
use crate::stats::central_interval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(dim / 3)`
    Third,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, dim: usize) -> usize {
        match self {
            MaxFeatures::Third => dim.div_ceil(3).max(1),
            MaxFeatures::All => dim,
            MaxFeatures::Count(n) => n.clamp(1, dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestOptions {
    pub fn new(n_estimators: usize, seed: u64) -> Self {
        ForestOptions {
            n_estimators,
            max_features: MaxFeatures::Third,
            bootstrap: true,
            seed,
        }
    }
}

/// Flat tree node; leaves have `feature == None`. Internal nodes send
/// `x[feature] <= threshold` to `left`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub leaf_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.feature {
                None => return node.leaf_value,
                Some(f) => i = if x[f] <= node.threshold { node.left } else { node.right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i].feature {
                None => 0,
                Some(_) => 1 + go(nodes, nodes[i].left).max(go(nodes, nodes[i].right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForestArModel {
    pub order: usize,
    pub n_inputs: usize,
    pub options: ForestOptions,
    pub trees: Vec<RegressionTree>,
}

impl RandomForestArModel {
    fn check_dim(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.n_inputs {
            return Err(Error::Input(format!(
                "forest expects {} inputs, got {}",
                self.n_inputs,
                input.len()
            )));
        }
        Ok(())
    }

    pub fn tree_predictions(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(input)?;
        Ok(self.trees.iter().map(|t| t.predict(input)).collect())
    }

    /// Mean of the per-tree predictions.
    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        let preds = self.tree_predictions(input)?;
        Ok(preds.iter().sum::<f64>() / preds.len() as f64)
    }

    /// Empirical `(1-coverage)/2` and `1-(1-coverage)/2` percentiles of the
    /// per-tree predictions.
    pub fn predict_interval(&self, input: &[f64], coverage: f64) -> Result<(f64, f64)> {
        Ok(central_interval(&self.tree_predictions(input)?, coverage))
    }

    /// Mean-path recursive forecast plus per-step intervals from each tree's
    /// own recursive trajectory.
    pub fn forecast_with_interval(
        &self,
        ts: &[f64],
        statics: &[f64],
        horizon_steps: usize,
        coverage: f64,
    ) -> Result<Forecast> {
        let mut forecast = predict_recursive(self, ts, statics, horizon_steps)?;
        let steps = forecast.values.len();
        let mut per_step: Vec<Vec<f64>> = vec![Vec::with_capacity(self.trees.len()); steps];
        for tree in &self.trees {
            let mut window = ts.to_vec();
            let mut prev = *ts.last().unwrap_or(&0.0);
            for (s, slot) in per_step.iter_mut().enumerate() {
                let x = ar_input(&window[window.len() - self.order..], ts.len() + s, statics);
                self.check_dim(&x)?;
                prev = tree.predict(&x).max(prev);
                slot.push(prev);
                window.push(prev);
            }
        }
        forecast.intervals = Some(
            per_step
                .iter()
                .map(|v| central_interval(v, coverage))
                .collect(),
        );
        Ok(forecast)
    }
}

/// Training rows with identical (input, target) merged into multiplicities.
struct Dataset {
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    multiplicity: Vec<f64>,
    /// Original sample index -> merged row.
    row_of: Vec<u32>,
}

impl Dataset {
    fn new(samples: &[ArSample], dim: usize) -> Result<Self> {
        let mut index: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut cols = vec![Vec::new(); dim];
        let mut y = Vec::new();
        let mut multiplicity = Vec::new();
        let mut row_of = Vec::with_capacity(samples.len());
        for s in samples {
            if s.input.len() != dim {
                return Err(Error::Input("samples have inconsistent widths".into()));
            }
            let key: Vec<u64> = s
                .input
                .iter()
                .chain(std::iter::once(&s.target))
                .map(|v| v.to_bits())
                .collect();
            let next = y.len() as u32;
            let row = *index.entry(key).or_insert(next);
            if row == next {
                for (c, &v) in cols.iter_mut().zip(&s.input) {
                    c.push(v);
                }
                y.push(s.target);
                multiplicity.push(0.0);
            }
            multiplicity[row as usize] += 1.0;
            row_of.push(row);
        }
        Ok(Dataset {
            cols,
            y,
            multiplicity,
            row_of,
        })
    }
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    weight: &'a [f64],
    max_features: usize,
    rng: ChaCha8Rng,
    buf: Vec<(f64, f64, f64)>,
    features: Vec<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn build(mut self, mut rows: Vec<u32>) -> RegressionTree {
        let mut nodes: Vec<TreeNode> = Vec::new();
        // (node index, start, end) ranges into `rows`.
        let mut stack = vec![(0usize, 0usize, rows.len())];
        nodes.push(self.leaf(&rows));
        while let Some((id, start, end)) = stack.pop() {
            let Some(split) = self.best_split(&rows[start..end]) else {
                continue;
            };
            let col = &self.data.cols[split.feature];
            let slice = &mut rows[start..end];
            let mut mid = 0;
            for i in 0..slice.len() {
                if col[slice[i] as usize] <= split.threshold {
                    slice.swap(i, mid);
                    mid += 1;
                }
            }
            let left = nodes.len();
            nodes.push(self.leaf(&rows[start..start + mid]));
            nodes.push(self.leaf(&rows[start + mid..end]));
            nodes[id] = TreeNode {
                feature: Some(split.feature),
                threshold: split.threshold,
                left,
                right: left + 1,
                leaf_value: nodes[id].leaf_value,
            };
            stack.push((left + 1, start + mid, end));
            stack.push((left, start, start + mid));
        }
        RegressionTree { nodes }
    }

    fn leaf(&self, rows: &[u32]) -> TreeNode {
        let y = &self.data.y;
        let first = y[rows[0] as usize];
        let leaf_value = if rows.iter().all(|&r| y[r as usize] == first) {
            first
        } else {
            let (mut sw, mut swy) = (0.0, 0.0);
            for &r in rows {
                let w = self.weight[r as usize];
                sw += w;
                swy += w * y[r as usize];
            }
            swy / sw
        };
        TreeNode {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            leaf_value,
        }
    }

    fn best_split(&mut self, rows: &[u32]) -> Option<Split> {
        if rows.len() < 2 {
            return None;
        }
        let y = &self.data.y;
        let first = y[rows[0] as usize];
        if rows.iter().all(|&r| y[r as usize] == first) {
            return None;
        }

        let dim = self.data.cols.len();
        let shuffle = self.max_features < dim;
        let mut best: Option<Split> = None;
        let mut best_score = f64::NEG_INFINITY;
        let mut searched = 0;
        for pos in 0..dim {
            if shuffle {
                let j = self.rng.random_range(pos..dim);
                self.features.swap(pos, j);
            }
            let feature = self.features[pos];
            let col = &self.data.cols[feature];

            self.buf.clear();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in rows {
                let x = col[r as usize];
                let w = self.weight[r as usize];
                lo = lo.min(x);
                hi = hi.max(x);
                self.buf.push((x, w * y[r as usize], w));
            }
            if lo == hi {
                continue;
            }
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let total_w: f64 = self.buf.iter().map(|e| e.2).sum();
            let total_s: f64 = self.buf.iter().map(|e| e.1).sum();
            let (mut wl, mut sl) = (0.0, 0.0);
            for i in 0..self.buf.len() - 1 {
                let (x, s, w) = self.buf[i];
                wl += w;
                sl += s;
                let x_next = self.buf[i + 1].0;
                if x == x_next {
                    continue;
                }
                let wr = total_w - wl;
                let sr = total_s - sl;
                let score = sl * sl / wl + sr * sr / wr;
                // Different features inducing the same partition tie up to
                // rounding; keep the earliest.
                if best.is_none() || score > best_score + TIE_TOLERANCE * best_score.abs() {
                    best_score = score;
                    best = Some(Split {
                        feature,
                        threshold: midpoint(x, x_next),
                    });
                }
            }
            searched += 1;
            if searched >= self.max_features {
                break;
            }
        }
        best
    }
}

const TIE_TOLERANCE: f64 = 1e-12;

pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = (a + b) * 0.5;
    if m >= b || !m.is_finite() {
        a
    } else {
        m
    }
}

/// Fit a forest of `options.n_estimators` trees, each on a bootstrap sample
/// (unless disabled). Trees are fitted in parallel with per-tree RNG streams
/// derived from `options.seed`, so results are reproducible.
pub fn rf_fit(samples: &[ArSample], order: usize, options: ForestOptions) -> Result<RandomForestArModel> {
    let Some(first) = samples.first() else {
        return Err(Error::Input("no training samples".into()));
    };
    if options.n_estimators == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let dim = first.input.len();
    let data = Dataset::new(samples, dim)?;
    let max_features = options.max_features.resolve(dim);
    let n = samples.len();

    let trees = (0..options.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(t as u64);
            let weight = if options.bootstrap {
                let mut w = vec![0.0; data.y.len()];
                for _ in 0..n {
                    w[data.row_of[rng.random_range(0..n)] as usize] += 1.0;
                }
                w
            } else {
                data.multiplicity.clone()
            };
            let rows: Vec<u32> = (0..data.y.len() as u32)
                .filter(|&r| weight[r as usize] > 0.0)
                .collect();
            let mut features: Vec<usize> = (0..dim).collect();
            if max_features < dim {
                features.shuffle(&mut rng);
            }
            TreeBuilder {
                data: &data,
                weight: &weight,
                max_features,
                rng,
                buf: Vec::with_capacity(rows.len()),
                features,
            }
            .build(rows)
        })
        .collect();

    Ok(RandomForestArModel {
        order,
        n_inputs: dim,
        options,
        trees,
    })
}

impl OneStepPredictor for RandomForestArModel {
    fn order(&self) -> usize {
        self.order
    }

    fn predict_next(&self, lags: &[f64], step_index: usize, statics: &[f64]) -> Result<f64> {
        self.predict(&ar_input(lags, step_index, statics))
    }
}

impl Forecaster for RandomForestArModel {
    fn min_history(&self) -> usize {
        self.order
    }

    fn n_static(&self) -> Option<usize> {
        Some(self.n_inputs - self.order - 1)
    }

    fn forecast(&self, ts: &[f64], statics: &[f64], horizon_steps: usize) -> Result<Forecast> {
        predict_recursive(self, ts, statics, horizon_steps)
    }
}
