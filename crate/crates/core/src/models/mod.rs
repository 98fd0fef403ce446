//! The four forecasters and their shared contract: given `f_1..f_K` plus
//! static features, predict the cumulative values `f_{K+1}..f_N`.

mod adam;
mod baseline;
pub mod forest;
pub mod gru;
mod linear;
mod matrix;
mod samples;
pub mod seq2seq;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use self::adam::Adam;
pub use self::baseline::{baseline_predict, BaselineModel};
pub use self::forest::{rf_fit, ForestOptions, MaxFeatures, RandomForestArModel, RegressionTree, TreeNode};
pub use self::gru::{gru_step, GruParams};
pub use self::linear::{linear_ar_fit, LinearArModel};
pub use self::matrix::Matrix;
pub use self::samples::{ar_input, make_ar_samples, ArSample};
pub use self::seq2seq::{s2s_loss, s2s_train, Seq2SeqConfig, Seq2SeqExample, Seq2SeqModel, TrainSchedule};
use crate::error::{Error, Result};
use crate::features::FeatureExtractor;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Predicted cumulative values for steps `K+1..=N`, with optional per-step
/// interval bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub values: Vec<f64>,
    pub intervals: Option<Vec<(f64, f64)>>,
}

impl Forecast {
    /// Prediction at the target step, or `fallback` when nothing was forecast.
    pub fn final_value(&self, fallback: f64) -> f64 {
        self.values.last().copied().unwrap_or(fallback)
    }
}

/// Common forecasting contract.
pub trait Forecaster {
    /// Minimum number of observed steps required.
    fn min_history(&self) -> usize;

    /// Number of static (content + context) inputs expected.
    fn n_static(&self) -> Option<usize>;

    /// Forecast `f_{K+1}..f_N` from `ts = f_1..f_K`.
    fn forecast(&self, ts: &[f64], statics: &[f64], horizon_steps: usize) -> Result<Forecast>;
}

/// A model that predicts the next cumulative value from the last `order`
/// values and the index `K` of the last observed step.
pub trait OneStepPredictor {
    fn order(&self) -> usize;

    fn predict_next(&self, lags: &[f64], step_index: usize, statics: &[f64]) -> Result<f64>;
}

/// Iterate one-step predictions from `K` to `N`, feeding each prediction back
/// as the newest lag. Each prediction is clamped to be at least the previous
/// value.
pub fn predict_recursive<M: OneStepPredictor + ?Sized>(
    model: &M,
    ts: &[f64],
    statics: &[f64],
    horizon_steps: usize,
) -> Result<Forecast> {
    let order = model.order();
    if ts.len() < order {
        return Err(Error::InsufficientHistory {
            needed: order,
            have: ts.len(),
        });
    }
    let mut window: Vec<f64> = ts.to_vec();
    let mut values = Vec::with_capacity(horizon_steps.saturating_sub(ts.len()));
    let mut prev = ts.last().copied().unwrap_or(0.0);
    for step in ts.len()..horizon_steps {
        let lags = &window[window.len() - order..];
        let next = model.predict_next(lags, step, statics)?.max(prev);
        values.push(next);
        window.push(next);
        prev = next;
    }
    Ok(Forecast {
        values,
        intervals: None,
    })
}

/// Left-pad a history shorter than `min_len` with zeros (no mentions before
/// publication). Returns the padded series and the pad length, which must be
/// added to the horizon so the number of forecast steps is unchanged.
pub fn pad_history(ts: Vec<f64>, min_len: usize) -> (Vec<f64>, usize) {
    if ts.len() >= min_len {
        return (ts, 0);
    }
    let pad = min_len - ts.len();
    let mut out = vec![0.0; pad];
    out.extend(ts);
    (out, pad)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Baseline,
    LinearAr,
    Rf,
    S2s,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ModelKind::Baseline),
            "linear_ar" => Ok(ModelKind::LinearAr),
            "rf" => Ok(ModelKind::Rf),
            "s2s" => Ok(ModelKind::S2s),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    None,
    Log1p,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecastModel {
    Baseline(BaselineModel),
    LinearAr(LinearArModel),
    Rf(RandomForestArModel),
    S2s(Seq2SeqModel),
}

impl ForecastModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            ForecastModel::Baseline(_) => ModelKind::Baseline,
            ForecastModel::LinearAr(_) => ModelKind::LinearAr,
            ForecastModel::Rf(_) => ModelKind::Rf,
            ForecastModel::S2s(_) => ModelKind::S2s,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            ForecastModel::Baseline(m) => m.window,
            ForecastModel::LinearAr(m) => m.order,
            ForecastModel::Rf(m) => m.order,
            ForecastModel::S2s(_) => 1,
        }
    }

    pub fn transform(&self) -> Transform {
        match self {
            ForecastModel::S2s(_) => Transform::Log1p,
            _ => Transform::None,
        }
    }

    /// Forecast with per-step intervals where the model supports them.
    pub fn forecast_with_interval(
        &self,
        ts: &[f64],
        statics: &[f64],
        horizon_steps: usize,
        coverage: f64,
    ) -> Result<Forecast> {
        match self {
            ForecastModel::Rf(m) => m.forecast_with_interval(ts, statics, horizon_steps, coverage),
            other => other.forecast(ts, statics, horizon_steps),
        }
    }
}

impl Forecaster for ForecastModel {
    fn min_history(&self) -> usize {
        match self {
            ForecastModel::Baseline(m) => m.min_history(),
            ForecastModel::LinearAr(m) => m.min_history(),
            ForecastModel::Rf(m) => m.min_history(),
            ForecastModel::S2s(m) => m.min_history(),
        }
    }

    fn n_static(&self) -> Option<usize> {
        match self {
            ForecastModel::Baseline(m) => m.n_static(),
            ForecastModel::LinearAr(m) => m.n_static(),
            ForecastModel::Rf(m) => m.n_static(),
            ForecastModel::S2s(m) => m.n_static(),
        }
    }

    fn forecast(&self, ts: &[f64], statics: &[f64], horizon_steps: usize) -> Result<Forecast> {
        match self {
            ForecastModel::Baseline(m) => m.forecast(ts, statics, horizon_steps),
            ForecastModel::LinearAr(m) => m.forecast(ts, statics, horizon_steps),
            ForecastModel::Rf(m) => m.forecast(ts, statics, horizon_steps),
            ForecastModel::S2s(m) => m.forecast(ts, statics, horizon_steps),
        }
    }
}

/// Self-describing model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub model_kind: ModelKind,
    pub order: usize,
    pub transform: Transform,
    pub horizon_steps: usize,
    pub step_secs: i64,
    pub features: FeatureExtractor,
    pub model: ForecastModel,
}

impl ModelFile {
    pub fn new(
        model: ForecastModel,
        features: FeatureExtractor,
        horizon: crate::timeseries::Horizon,
    ) -> Result<Self> {
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            model_kind: model.kind(),
            order: model.order(),
            transform: model.transform(),
            horizon_steps: horizon.steps,
            step_secs: horizon.step_secs,
            features,
            model,
        };
        file.validate()?;
        Ok(file)
    }

    /// Header fields agree with the parameters and the feature extractor
    /// produces the static dimension the model was trained on.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported model schema version {}",
                self.schema_version
            )));
        }
        if self.model_kind != self.model.kind()
            || self.order != self.model.order()
            || self.transform != self.model.transform()
        {
            return Err(Error::Config("model header does not match its parameters".into()));
        }
        if let Some(n) = self.model.n_static() {
            if n != self.features.n_static() {
                return Err(Error::Config(format!(
                    "model expects {n} static features, extractor produces {}",
                    self.features.n_static()
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_slice(&raw)?;
        file.validate()?;
        Ok(file)
    }
}
