use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ar_input, predict_recursive, ArSample, Forecast, Forecaster, OneStepPredictor};
use crate::error::{Error, Result};

/// Linear one-step model over `[lags.., K, statics.., 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearArModel {
    pub order: usize,
    pub n_static: usize,
    /// Lag weights, step weight, static weights, intercept.
    pub coefficients: Vec<f64>,
}

impl LinearArModel {
    pub fn predict_one(&self, input: &[f64]) -> Result<f64> {
        let dim = self.coefficients.len() - 1;
        if input.len() != dim {
            return Err(Error::Input(format!(
                "linear model expects {dim} inputs, got {}",
                input.len()
            )));
        }
        Ok(super::matrix::dot(&self.coefficients[..dim], input) + self.coefficients[dim])
    }
}

/// Ordinary least squares with the minimum-norm solution when the design
/// matrix is rank deficient.
pub fn linear_ar_fit(samples: &[ArSample], order: usize) -> Result<LinearArModel> {
    let Some(first) = samples.first() else {
        return Err(Error::Input("no training samples".into()));
    };
    let dim = first.input.len();
    if dim < order + 1 {
        return Err(Error::Input(format!(
            "sample width {dim} too small for order {order}"
        )));
    }
    let p = dim + 1;
    if samples.len() < p {
        return Err(Error::Input(format!(
            "{} samples cannot determine {p} coefficients",
            samples.len()
        )));
    }
    let n = samples.len();
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut y = DVector::<f64>::zeros(n);
    for (i, s) in samples.iter().enumerate() {
        if s.input.len() != dim {
            return Err(Error::Input("samples have inconsistent widths".into()));
        }
        for (j, &v) in s.input.iter().enumerate() {
            x[(i, j)] = v;
        }
        x[(i, dim)] = 1.0;
        y[i] = s.target;
    }

    let svd = x.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * n.max(p) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < p {
        log::warn!("linear AR design matrix has rank {rank} < {p}; using minimum-norm solution");
    }
    let coef = if max_sv == 0.0 {
        DVector::zeros(p)
    } else {
        svd.solve(&y, tol).map_err(|e| Error::Input(e.to_string()))?
    };
    Ok(LinearArModel {
        order,
        n_static: dim - order - 1,
        coefficients: coef.iter().copied().collect(),
    })
}

impl OneStepPredictor for LinearArModel {
    fn order(&self) -> usize {
        self.order
    }

    fn predict_next(&self, lags: &[f64], step_index: usize, statics: &[f64]) -> Result<f64> {
        self.predict_one(&ar_input(lags, step_index, statics))
    }
}

impl Forecaster for LinearArModel {
    fn min_history(&self) -> usize {
        self.order
    }

    fn n_static(&self) -> Option<usize> {
        Some(self.n_static)
    }

    fn forecast(&self, ts: &[f64], statics: &[f64], horizon_steps: usize) -> Result<Forecast> {
        predict_recursive(self, ts, statics, horizon_steps)
    }
}
