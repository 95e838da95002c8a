//! Cross-entropy training with Adam-style moment estimates and linear
//! warmup. Per-sample gradients inside a batch may be computed in
//! parallel; the reduction is a fixed-order sum, so parallel and
//! sequential runs produce identical parameters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::forward::{backward, VerifierError, VerifierInput};
use super::params::VerifierParams;
use crate::batch;

/// Verification label; the classifier emits probabilities in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Entailed,
    Refuted,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Entailed => 0,
            Label::Refuted => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Entailed
        } else {
            Label::Refuted
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailed => "ENTAILED",
            Label::Refuted => "REFUTED",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ENTAILED" | "1" | "TRUE" => Some(Label::Entailed),
            "REFUTED" | "0" | "FALSE" => Some(Label::Refuted),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss in batch {batch} of epoch {epoch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Verifier(#[from] VerifierError),
}

#[derive(Debug, Clone)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Steps of linear warmup to the full rate, then constant.
    pub warmup_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Shuffling seed.
    pub seed: u64,
    /// Fan batch gradients across threads (needs the `parallel` feature).
    pub parallel: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 20,
            batch_size: 8,
            learning_rate: 1e-3,
            warmup_steps: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 17,
            parallel: true,
        }
    }
}

impl TrainSchedule {
    /// The setting used for full-scale encoder fine-tuning runs.
    pub fn full_scale() -> Self {
        TrainSchedule {
            learning_rate: 1e-5,
            warmup_steps: 3000,
            ..TrainSchedule::default()
        }
    }
}

/// Per-epoch mean loss and training accuracy.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub epoch_accuracy: Vec<f64>,
    pub steps: usize,
}

struct Adam {
    m: VerifierParams,
    v: VerifierParams,
    t: usize,
}

impl Adam {
    fn new(template: &VerifierParams) -> Self {
        Adam {
            m: template.zeros_like(),
            v: template.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut VerifierParams, grads: &VerifierParams, lr: f64, s: &TrainSchedule) {
        self.t += 1;
        let t = self.t as f64;
        let bc1 = 1.0 - s.beta1.powf(t);
        let bc2 = 1.0 - s.beta2.powf(t);
        let g_tensors = grads.named_tensors();
        let mut m_tensors = self.m.named_tensors_mut();
        let mut v_tensors = self.v.named_tensors_mut();
        let mut p_tensors = params.named_tensors_mut();
        for i in 0..g_tensors.len() {
            let g = g_tensors[i].1;
            let m = &mut m_tensors[i].1;
            let v = &mut v_tensors[i].1;
            let p = &mut p_tensors[i].1;
            for j in 0..g.len() {
                m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g[j];
                v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + s.epsilon);
            }
        }
    }
}

/// Minimize mean cross-entropy over the dataset. Gradients flow through
/// every differentiable stage; the discrete prune selection is fixed per
/// forward pass.
pub fn train(
    data: &[(VerifierInput, Label)],
    params: &mut VerifierParams,
    schedule: &TrainSchedule,
) -> Result<TrainReport, TrainError> {
    let mut report = TrainReport::default();
    if data.is_empty() || schedule.epochs == 0 {
        return Ok(report);
    }
    let mut adam = Adam::new(params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..schedule.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for (batch_no, chunk) in order.chunks(schedule.batch_size.max(1)).enumerate() {
            let results = batch::map(schedule.parallel, chunk, |&i| {
                let (inp, label) = &data[i];
                backward(inp, params, label.index())
            });
            let mut total = params.zeros_like();
            let mut batch_loss = 0.0;
            for (r, &i) in results.into_iter().zip(chunk) {
                let (loss, probs, grads) = r?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                    });
                }
                batch_loss += loss;
                let predicted = if probs[0] >= probs[1] { 0 } else { 1 };
                if predicted == data[i].1.index() {
                    correct += 1;
                }
                let mut t_total = total.named_tensors_mut();
                for (k, (_, g)) in grads.named_tensors().into_iter().enumerate() {
                    for (a, b) in t_total[k].1.iter_mut().zip(g) {
                        *a += b;
                    }
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            for (_, t) in total.named_tensors_mut() {
                for x in t {
                    *x *= scale;
                }
            }
            epoch_loss += batch_loss;
            report.steps += 1;
            let warm = if schedule.warmup_steps == 0 {
                1.0
            } else {
                ((report.steps as f64) / schedule.warmup_steps as f64).min(1.0)
            };
            adam.step(params, &total, schedule.learning_rate * warm, schedule);
        }
        report.epoch_loss.push(epoch_loss / data.len() as f64);
        report
            .epoch_accuracy
            .push(correct as f64 / data.len() as f64);
    }
    Ok(report)
}
