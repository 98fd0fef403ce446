//! Encoder-decoder GRU forecaster.
//!
//! Counts are mapped through `log1p` before entering the network. The encoder
//! reads the observed prefix; the decoder starts from the encoder's final
//! state with the last observed value as input and feeds each prediction
//! back as its next input. At every decoder step a dense head reads the GRU
//! output, the relative position of the step within the horizon and the
//! static features, and emits the increment over the current input.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gru::{self, GruCache, GruParams};
use super::{Adam, Forecast, Forecaster, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub hidden: usize,
    pub dense_hidden: usize,
    pub input_dropout: f64,
    pub recurrent_dropout: f64,
    pub init_scale: f64,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Seq2SeqConfig {
            hidden: 200,
            dense_hidden: 200,
            input_dropout: 0.3,
            recurrent_dropout: 0.1,
            init_scale: 0.08,
        }
    }
}

impl Seq2SeqConfig {
    pub fn with_hidden(hidden: usize) -> Self {
        Seq2SeqConfig {
            hidden,
            dense_hidden: hidden,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseHead {
    /// `dense_hidden x (hidden + 1 + n_static)`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqModel {
    pub config: Seq2SeqConfig,
    pub n_static: usize,
    pub horizon_steps: usize,
    pub encoder: GruParams,
    pub decoder: GruParams,
    pub head: DenseHead,
}

struct DecoderStep {
    gru: GruCache,
    dense_in: Vec<f64>,
    in_mask: Option<Vec<f64>>,
    activation: Vec<f64>,
    rec_mask: Option<Vec<f64>>,
}

struct Tape {
    encoder: Vec<GruCache>,
    encoder_masks: Vec<Option<Vec<f64>>>,
    decoder: Vec<DecoderStep>,
}

fn dropout_mask<R: Rng>(rng: &mut R, len: usize, rate: f64) -> Option<Vec<f64>> {
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some(
        (0..len)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect(),
    )
}

fn apply(v: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        v.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }
}

impl Seq2SeqModel {
    pub fn new(config: Seq2SeqConfig, n_static: usize, horizon_steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = config.init_scale;
        let encoder = GruParams::uniform(1, config.hidden, s, &mut rng);
        let decoder = GruParams::uniform(1, config.hidden, s, &mut rng);
        let dense_in = config.hidden + 1 + n_static;
        let w1 = Matrix::from_fn(config.dense_hidden, dense_in, |_, _| rng.random_range(-s..=s));
        let w2 = (0..config.dense_hidden).map(|_| rng.random_range(-s..=s)).collect();
        Seq2SeqModel {
            head: DenseHead {
                w1,
                b1: vec![0.0; config.dense_hidden],
                w2,
                b2: vec![0.0],
            },
            config,
            n_static,
            horizon_steps,
            encoder,
            decoder,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(16);
        out.extend(self.encoder.tensors().into_iter().map(|m| m.data.as_slice()));
        out.extend(self.decoder.tensors().into_iter().map(|m| m.data.as_slice()));
        out.push(&self.head.w1.data);
        out.push(&self.head.b1);
        out.push(&self.head.w2);
        out.push(&self.head.b2);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(16);
        out.extend(self.encoder.tensors_mut().into_iter().map(|m| m.data.as_mut_slice()));
        out.extend(self.decoder.tensors_mut().into_iter().map(|m| m.data.as_mut_slice()));
        out.push(&mut self.head.w1.data);
        out.push(&mut self.head.b1);
        out.push(&mut self.head.w2);
        out.push(&mut self.head.b2);
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn check_statics(&self, statics: &[f64]) -> Result<()> {
        if statics.len() != self.n_static {
            return Err(Error::Input(format!(
                "seq2seq expects {} static features, got {}",
                self.n_static,
                statics.len()
            )));
        }
        Ok(())
    }

    fn run(&self, xs: &[f64], statics: &[f64], n_out: usize, mut rng: Option<&mut ChaCha8Rng>) -> (Vec<f64>, Tape) {
        let hidden = self.config.hidden;
        let mut tape = Tape {
            encoder: Vec::with_capacity(xs.len()),
            encoder_masks: Vec::with_capacity(xs.len()),
            decoder: Vec::with_capacity(n_out),
        };
        let mut mask = |len: usize, rate: f64| match rng.as_deref_mut() {
            Some(r) => dropout_mask(r, len, rate),
            None => None,
        };

        let mut h = vec![0.0; hidden];
        for &x in xs {
            let (mut next, cache) = gru::forward(&[x], &h, &self.encoder);
            let m = mask(hidden, self.config.recurrent_dropout);
            apply(&mut next, &m);
            tape.encoder.push(cache);
            tape.encoder_masks.push(m);
            h = next;
        }

        let mut input = xs.last().copied().unwrap_or(0.0);
        let mut outputs = Vec::with_capacity(n_out);
        let denom = self.horizon_steps.max(1) as f64;
        for s in 0..n_out {
            let (out, cache) = gru::forward(&[input], &h, &self.decoder);
            let mut dense_in = Vec::with_capacity(hidden + 1 + statics.len());
            dense_in.extend_from_slice(&out);
            dense_in.push((xs.len() + s) as f64 / denom);
            dense_in.extend_from_slice(statics);
            let in_mask = mask(dense_in.len(), self.config.input_dropout);
            apply(&mut dense_in, &in_mask);

            let mut activation = self.head.b1.clone();
            self.head.w1.gemv_acc(&dense_in, &mut activation);
            activation.iter_mut().for_each(|v| *v = v.tanh());
            let delta = super::matrix::dot(&self.head.w2, &activation) + self.head.b2[0];
            let y = input + delta;
            outputs.push(y);

            let rec_mask = mask(hidden, self.config.recurrent_dropout);
            let mut next = out;
            apply(&mut next, &rec_mask);
            tape.decoder.push(DecoderStep {
                gru: cache,
                dense_in,
                in_mask,
                activation,
                rec_mask,
            });
            h = next;
            input = y;
        }
        (outputs, tape)
    }

    /// Gradient of `sum_s dys[s] * y_s` with respect to every parameter.
    fn backward(&self, tape: &Tape, dys: &[f64]) -> Seq2SeqModel {
        let hidden = self.config.hidden;
        let mut g = self.zeros_like();
        let mut d_input_next = 0.0;
        let mut dh_next = vec![0.0; hidden];

        for (s, step) in tape.decoder.iter().enumerate().rev() {
            let dy = dys[s] + d_input_next;
            g.head.b2[0] += dy;
            let mut da = vec![0.0; self.config.dense_hidden];
            for i in 0..da.len() {
                g.head.w2[i] += dy * step.activation[i];
                let a = step.activation[i];
                da[i] = dy * self.head.w2[i] * (1.0 - a * a);
                g.head.b1[i] += da[i];
            }
            g.head.w1.outer_acc(&da, &step.dense_in);
            let mut d_dense = vec![0.0; step.dense_in.len()];
            self.head.w1.gemv_t_acc(&da, &mut d_dense);
            apply(&mut d_dense, &step.in_mask);

            let mut dh: Vec<f64> = d_dense[..hidden].to_vec();
            let mut carried = dh_next.clone();
            apply(&mut carried, &step.rec_mask);
            dh.iter_mut().zip(&carried).for_each(|(a, b)| *a += b);

            let (dx, dh_prev) = gru::backward(&self.decoder, &step.gru, &dh, &mut g.decoder);
            d_input_next = dy + dx[0];
            dh_next = dh_prev;
        }

        let mut dh = dh_next;
        for t in (0..tape.encoder.len()).rev() {
            apply(&mut dh, &tape.encoder_masks[t]);
            dh = gru::backward(&self.encoder, &tape.encoder[t], &dh, &mut g.encoder).1;
        }
        g
    }

    /// Network outputs in transformed space for `n_out` steps after `xs`,
    /// without dropout.
    pub fn predict_transformed(&self, xs: &[f64], statics: &[f64], n_out: usize) -> Vec<f64> {
        self.run(xs, statics, n_out, None).0
    }

    /// Squared-error loss in transformed space and its gradient for one
    /// `(prefix, continuation)` pair, without dropout.
    pub fn loss_and_gradient(&self, xs: &[f64], statics: &[f64], targets: &[f64]) -> (f64, Seq2SeqModel) {
        self.loss_and_gradient_with(xs, statics, targets, None)
    }

    fn loss_and_gradient_with(
        &self,
        xs: &[f64],
        statics: &[f64],
        targets: &[f64],
        rng: Option<&mut ChaCha8Rng>,
    ) -> (f64, Seq2SeqModel) {
        let (ys, tape) = self.run(xs, statics, targets.len(), rng);
        let mut loss = 0.0;
        let dys: Vec<f64> = ys
            .iter()
            .zip(targets)
            .map(|(y, t)| {
                loss += (y - t) * (y - t);
                2.0 * (y - t)
            })
            .collect();
        (loss, self.backward(&tape, &dys))
    }
}

/// Run the network on raw counts. With `dropout_rng` set, dropout masks are
/// drawn from it (training behaviour).
pub fn s2s_forward(
    model: &Seq2SeqModel,
    ts: &[f64],
    statics: &[f64],
    horizon_steps: usize,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<Forecast> {
    if ts.is_empty() {
        return Err(Error::InsufficientHistory { needed: 1, have: 0 });
    }
    model.check_statics(statics)?;
    let n_out = horizon_steps.saturating_sub(ts.len());
    if n_out == 0 {
        return Ok(Forecast::default());
    }
    let xs: Vec<f64> = ts.iter().map(|v| v.max(0.0).ln_1p()).collect();
    let ys = model.run(&xs, statics, n_out, dropout_rng).0;
    let mut prev = *ts.last().unwrap();
    let values = ys
        .into_iter()
        .map(|y| {
            prev = y.exp_m1().max(prev);
            prev
        })
        .collect();
    Ok(Forecast {
        values,
        intervals: None,
    })
}

impl Forecaster for Seq2SeqModel {
    fn min_history(&self) -> usize {
        1
    }

    fn n_static(&self) -> Option<usize> {
        Some(self.n_static)
    }

    fn forecast(&self, ts: &[f64], statics: &[f64], horizon_steps: usize) -> Result<Forecast> {
        s2s_forward(self, ts, statics, horizon_steps, None)
    }
}

/// Sum of squared differences.
pub fn s2s_loss(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Input(format!(
            "loss over {} predictions and {} targets",
            predicted.len(),
            actual.len()
        )));
    }
    Ok(predicted.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum())
}

/// A full cumulative series (`horizon_steps` values) plus static features.
#[derive(Clone, Debug, PartialEq)]
pub struct Seq2SeqExample {
    pub series: Vec<u64>,
    pub statics: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    /// `(epochs, learning_rate)` phases run in order.
    pub phases: Vec<(usize, f64)>,
    pub batch_size: usize,
    /// Fixed encoder length; by default a uniformly random split is drawn
    /// per example and epoch.
    pub encoder_len: Option<usize>,
    pub dropout: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            phases: vec![(30, 1e-3), (30, 1e-4), (30, 1e-6)],
            batch_size: 64,
            encoder_len: None,
            dropout: true,
        }
    }
}

impl TrainSchedule {
    /// `epochs` per phase at the default learning rates.
    pub fn scaled(epochs: usize) -> Self {
        TrainSchedule {
            phases: vec![(epochs, 1e-3), (epochs, 1e-4), (epochs, 1e-6)],
            ..Default::default()
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.0).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean per-example loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean per-example loss of each batch, in order.
    pub batch_losses: Vec<f64>,
}

/// Train in place with Adam. Deterministic for a fixed `seed`.
pub fn s2s_train(
    model: &mut Seq2SeqModel,
    corpus: &[Seq2SeqExample],
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<TrainReport> {
    let usable: Vec<&Seq2SeqExample> = corpus.iter().filter(|e| e.series.len() >= 2).collect();
    if usable.is_empty() {
        return Err(Error::Input("no training series with at least two steps".into()));
    }
    for e in &usable {
        model.check_statics(&e.statics)?;
    }
    if schedule.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let transformed: Vec<Vec<f64>> = usable
        .iter()
        .map(|e| e.series.iter().map(|&v| (v as f64).ln_1p()).collect())
        .collect();

    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(&sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut report = TrainReport::default();
    let mut epoch = 0u64;

    for &(epochs, lr) in &schedule.phases {
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            let splits: Vec<usize> = order
                .iter()
                .map(|&i| {
                    let n = transformed[i].len();
                    match schedule.encoder_len {
                        Some(l) => l.clamp(1, n - 1),
                        None => rng.random_range(1..n),
                    }
                })
                .collect();
            let mut epoch_loss = 0.0;
            for (b, chunk) in order.chunks(schedule.batch_size).enumerate() {
                let base = b * schedule.batch_size;
                let results: Vec<(f64, Seq2SeqModel)> = chunk
                    .par_iter()
                    .enumerate()
                    .map(|(j, &i)| {
                        let pos = base + j;
                        let xs = &transformed[i];
                        let l = splits[pos];
                        let mut drop_rng = schedule.dropout.then(|| {
                            let mut r = ChaCha8Rng::seed_from_u64(seed);
                            r.set_stream((epoch << 32) | pos as u64);
                            r
                        });
                        model.loss_and_gradient_with(&xs[..l], &usable[i].statics, &xs[l..], drop_rng.as_mut())
                    })
                    .collect();

                let mut total = model.zeros_like();
                let mut batch_loss = 0.0;
                for (loss, g) in &results {
                    batch_loss += loss;
                    for (acc, part) in total.tensors_mut().into_iter().zip(g.tensors()) {
                        acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
                    }
                }
                if !batch_loss.is_finite() {
                    return Err(Error::Divergence(format!(
                        "loss became {batch_loss} in epoch {epoch}, batch {b}"
                    )));
                }
                let scale = 1.0 / chunk.len() as f64;
                for t in total.tensors_mut() {
                    t.iter_mut().for_each(|v| *v *= scale);
                }
                let grads = total.tensors();
                adam.step(model.tensors_mut(), grads, lr);
                epoch_loss += batch_loss;
                report.batch_losses.push(batch_loss * scale);
            }
            let mean = epoch_loss / usable.len() as f64;
            log::debug!("seq2seq epoch {epoch}: lr {lr:e}, mean loss {mean:.6}");
            report.epoch_losses.push(mean);
            epoch += 1;
        }
    }
    Ok(report)
}
