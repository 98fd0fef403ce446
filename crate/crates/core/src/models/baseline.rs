use serde::{Deserialize, Serialize};

use super::{Forecast, Forecaster, OneStepPredictor};
use crate::error::{Error, Result};

/// Linear extrapolation of the last `window` cumulative values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub window: usize,
}

impl BaselineModel {
    pub fn new(window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::Config(format!("baseline window {window} < 2")));
        }
        Ok(BaselineModel { window })
    }
}

impl Default for BaselineModel {
    fn default() -> Self {
        BaselineModel { window: 3 }
    }
}

/// Least-squares line through `(j, f_j)` for the last `k` steps, evaluated
/// at step `n`. Steps are 1-based, so the last point is `(K, f_K)`.
pub fn baseline_predict(ts: &[f64], k: usize, n: usize) -> Result<f64> {
    let (slope, intercept) = fit_line(ts, k)?;
    Ok(intercept + slope * n as f64)
}

fn fit_line(ts: &[f64], k: usize) -> Result<(f64, f64)> {
    let big_k = ts.len();
    if big_k < k || k < 2 {
        return Err(Error::InsufficientHistory {
            needed: k.max(2),
            have: big_k,
        });
    }
    let first = big_k - k + 1;
    let xs = (first..=big_k).map(|j| j as f64);
    let ys = &ts[big_k - k..];
    let x_mean = (first + big_k) as f64 / 2.0;
    let y_mean = ys.iter().sum::<f64>() / k as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, &y) in xs.zip(ys) {
        sxy += (x - x_mean) * (y - y_mean);
        sxx += (x - x_mean) * (x - x_mean);
    }
    let slope = sxy / sxx;
    Ok((slope, y_mean - slope * x_mean))
}

impl OneStepPredictor for BaselineModel {
    fn order(&self) -> usize {
        self.window
    }

    fn predict_next(&self, lags: &[f64], _step_index: usize, _statics: &[f64]) -> Result<f64> {
        baseline_predict(lags, self.window, lags.len() + 1)
    }
}

impl Forecaster for BaselineModel {
    fn min_history(&self) -> usize {
        self.window
    }

    fn n_static(&self) -> Option<usize> {
        None
    }

    /// Direct evaluation of one fitted line at every future step.
    fn forecast(&self, ts: &[f64], _statics: &[f64], horizon_steps: usize) -> Result<Forecast> {
        let (slope, intercept) = fit_line(ts, self.window)?;
        let mut prev = ts[ts.len() - 1];
        let values = (ts.len() + 1..=horizon_steps)
            .map(|step| {
                prev = (intercept + slope * step as f64).max(prev);
                prev
            })
            .collect();
        Ok(Forecast {
            values,
            intervals: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collinear_tail() {
        let ts = [0.0, 1.0, 2.0, 4.0, 6.0];
        assert_eq!(baseline_predict(&ts, 3, 24).unwrap(), 44.0);
    }

    #[test]
    fn constant_series() {
        for n in [4, 10, 24] {
            assert_eq!(baseline_predict(&[5.0, 5.0, 5.0], 3, n).unwrap(), 5.0);
        }
    }

    #[test]
    fn normal_equations_by_hand() {
        // Points (1,0) (2,1) (3,3): [3 6; 6 14][b; a] = [4; 11]
        // gives slope 3/2 and intercept -5/3.
        let (n, sx, sxx, sy, sxy) = (3.0, 6.0, 14.0, 4.0, 11.0);
        let det: f64 = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sxx * sy - sx * sxy) / det;
        assert_eq!((slope, intercept), (1.5, -5.0 / 3.0));
        let got = baseline_predict(&[0.0, 1.0, 3.0], 3, 24).unwrap();
        assert!((got - (intercept + slope * 24.0)).abs() < 1e-12);
        assert!((got - 103.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn insufficient_history() {
        assert!(matches!(
            baseline_predict(&[1.0, 2.0], 3, 24),
            Err(Error::InsufficientHistory { .. })
        ));
        assert!(BaselineModel::new(1).is_err());
    }

    #[test]
    fn recursive_constant_forecast() {
        let m = BaselineModel::default();
        let f = super::super::predict_recursive(&m, &[5.0, 5.0, 5.0], &[], 8).unwrap();
        assert_eq!(f.values, vec![5.0; 5]);
    }

    proptest! {
        #[test]
        fn exact_on_affine_series(a in -50.0f64..50.0, b in 0.0f64..40.0, k in 3usize..23, w in 2usize..4) {
            let ts: Vec<f64> = (1..=k).map(|j| a + b * j as f64).collect();
            let got = baseline_predict(&ts, w, 24).unwrap();
            prop_assert!((got - (a + b * 24.0)).abs() <= 1e-9);
            let f = BaselineModel::new(w).unwrap().forecast(&ts, &[], 24).unwrap();
            prop_assert!((f.final_value(0.0) - (a + b * 24.0)).abs() <= 1e-9);
        }
    }
}
