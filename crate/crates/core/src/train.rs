//! Certified training: differentiable abstract propagation, the worst-case
//! robustness loss, loss mixing with a linear ramp schedule, gradient
//! checking, and minibatch SGD with momentum. Regular and adversarial
//! training run through the same loop as baselines.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::attack::{self, AttackConfig};
use crate::cell::{forward_abstract, forward_logits, Model};
use crate::certify::{build_input_domain, PerturbationSpec, Sample, Strategy};
use crate::domain::{AbstractDomain, IntervalBounds, InterZono, NoisePool};
use crate::error::DomainError;
use crate::parallel;
use crate::scalar::{lift, Scalar};
use crate::tape::Tape;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Regular,
    AtFgsm,
    AtPgd,
    Certified,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Regular => "regular",
            TrainMode::AtFgsm => "at-fgsm",
            TrainMode::AtPgd => "at-pgd",
            TrainMode::Certified => "certified",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Target perturbation radius for the robust term.
    pub epsilon_train: f64,
    /// Cap of the mixing weight between standard and robust loss.
    pub lambda_max: f64,
    /// Fraction of the epochs over which epsilon and lambda ramp linearly
    /// from zero before holding at their targets.
    pub ramp_fraction: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.lambda_max) {
            return Err(TrainError::BadConfig("lambda_max must be in [0,1]"));
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 1.0) {
            return Err(TrainError::BadConfig("ramp_fraction must be in (0,1]"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::BadConfig("epochs and batch_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    BadConfig(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}; epoch aborted")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub standard: f64,
    pub robust: f64,
    pub combined: f64,
    pub epsilon_used: f64,
    pub lambda_used: f64,
}

/// Softmax cross-entropy, stable under large logits.
pub fn cross_entropy<S: Scalar>(logits: &[S], label: usize) -> S {
    let mut m = logits[0];
    for &v in &logits[1..] {
        m = m.smax(v);
    }
    let mut sum = S::zero();
    for &v in logits {
        sum = sum + (v - m).exp();
    }
    sum.ln() + m - logits[label]
}

/// Worst-case cross-entropy over the output box: the exact maximizer pins the
/// true class at its lower bound and every other class at its upper bound
/// (cross-entropy is decreasing in the former and increasing in the latter).
pub fn robustness_loss<S: Scalar>(bounds: &IntervalBounds<S>, label: usize) -> S {
    let worst: Vec<S> = (0..bounds.len())
        .map(|j| {
            if j == label {
                bounds.lower[j]
            } else {
                bounds.upper[j]
            }
        })
        .collect();
    cross_entropy(&worst, label)
}

/// (1 - lambda) * standard + lambda * robust.
pub fn combined_loss<S: Scalar>(standard: S, robust: S, lambda: f64) -> S {
    let l = S::from_f64(lambda);
    (S::one() - l) * standard + l * robust
}

/// Linear ramp of (epsilon, lambda) from zero to their targets over
/// `ramp_fraction * epochs`, then hold.
pub fn schedule(epoch: usize, config: &TrainConfig) -> (f64, f64) {
    let ramp = (config.ramp_fraction * config.epochs as f64).max(1.0);
    let factor = (epoch as f64 / ramp).min(1.0);
    (config.epsilon_train * factor, config.lambda_max * factor)
}

/// The per-sample training loss in any scalar type. `adversarial` carries a
/// precomputed adversarial example for the AT baselines.
fn sample_loss<S: Scalar>(
    model: &Model<S>,
    sample: &Sample,
    adversarial: Option<&[Vec<f64>]>,
    epsilon: f64,
    lambda: f64,
    mode: TrainMode,
) -> Result<(S, LossBreakdown), TrainError> {
    let frames: Vec<Vec<S>> = sample.frames.iter().map(|f| lift(f)).collect();
    let standard = cross_entropy(&forward_logits(model, &frames), sample.label);

    let robust: S = if lambda == 0.0 {
        // The robust path is inactive; keep the term out of the graph.
        S::zero()
    } else {
        match mode {
            TrainMode::Regular => S::zero(),
            TrainMode::AtFgsm | TrainMode::AtPgd => {
                let adv = adversarial.expect("adversarial example required for AT modes");
                let adv_frames: Vec<Vec<S>> = adv.iter().map(|f| lift(f)).collect();
                cross_entropy(&forward_logits(model, &adv_frames), sample.label)
            }
            TrainMode::Certified => {
                let mut pool = NoisePool::new();
                let spec = PerturbationSpec::all_frame(epsilon);
                let domains: Vec<InterZono<S>> = build_input_domain(&frames, &spec, &mut pool)?;
                let out = forward_abstract(model, &domains, &mut pool)?;
                let bounds = out.bounds()?;
                robustness_loss(&bounds, sample.label)
            }
        }
    };

    let combined = combined_loss(standard, robust, lambda);
    let breakdown = LossBreakdown {
        standard: standard.val(),
        robust: robust.val(),
        combined: combined.val(),
        epsilon_used: epsilon,
        lambda_used: lambda,
    };
    Ok((combined, breakdown))
}

/// Gradient of the combined loss with respect to the flat parameter vector.
fn sample_gradient(
    shape: &Model<f64>,
    params: &[f64],
    sample: &Sample,
    adversarial: Option<&[Vec<f64>]>,
    epsilon: f64,
    lambda: f64,
    mode: TrainMode,
) -> Result<(Vec<f64>, LossBreakdown), TrainError> {
    let tape = Tape::new();
    let _scope = tape.activate();
    let vars: Vec<crate::tape::Var> = params.iter().map(|&p| tape.var(p)).collect();
    let model = shape.from_flat(&vars);
    let (loss, breakdown) = sample_loss(&model, sample, adversarial, epsilon, lambda, mode)?;
    let grads = tape.gradients(loss);
    Ok((vars.iter().map(|&v| grads.wrt(v)).collect(), breakdown))
}

#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub standard_loss: f64,
    pub robust_loss: f64,
    pub combined_loss: f64,
    pub epsilon_used: f64,
    pub lambda_used: f64,
}

/// State threaded through epochs: flat parameters plus momentum buffer.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub params: Vec<f64>,
    velocity: Vec<f64>,
    pub momentum: f64,
}

impl Optimizer {
    pub fn new(model: &Model<f64>) -> Self {
        let params = model.flatten();
        let velocity = vec![0.0; params.len()];
        Optimizer {
            params,
            velocity,
            momentum: 0.9,
        }
    }

    fn step(&mut self, grad: &[f64], lr: f64) {
        for i in 0..self.params.len() {
            self.velocity[i] = self.momentum * self.velocity[i] + grad[i];
            self.params[i] -= lr * self.velocity[i];
        }
    }
}

/// One epoch of minibatch SGD with momentum on the combined loss under the
/// ramp schedule. Per-sample gradients within a batch may run in parallel;
/// the reduction is a fixed-order sum so results are deterministic.
pub fn train_epoch(
    shape: &Model<f64>,
    opt: &mut Optimizer,
    dataset: &[Sample],
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochMetrics, TrainError> {
    config.validate()?;
    let (epsilon, lambda_sched) = schedule(epoch, config);
    let lambda = match config.mode {
        TrainMode::Regular => 0.0,
        _ => lambda_sched,
    };

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
    order.shuffle(&mut rng);

    let mut sum_std = 0.0;
    let mut sum_rob = 0.0;
    let mut sum_comb = 0.0;
    for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
        let model_snapshot = shape.from_flat(&opt.params);
        let results = parallel::map_indexed(batch, |_, &sample_idx| {
            let sample = &dataset[sample_idx];
            let adversarial = match (config.mode, lambda > 0.0) {
                (TrainMode::AtFgsm, true) => {
                    let cfg = AttackConfig::fgsm(epsilon, Strategy::AllFrame);
                    Some(attack::fgsm(&model_snapshot, sample, &cfg))
                }
                (TrainMode::AtPgd, true) => {
                    let mut cfg = AttackConfig::pgd(epsilon, Strategy::AllFrame, derive_seed(config.seed, epoch, sample_idx));
                    cfg.steps = 10;
                    cfg.restarts = 1;
                    Some(attack::pgd(&model_snapshot, sample, &cfg).example)
                }
                _ => None,
            };
            sample_gradient(
                shape,
                &opt.params,
                sample,
                adversarial.as_deref(),
                epsilon,
                lambda,
                config.mode,
            )
        });

        let mut grad = vec![0.0; opt.params.len()];
        let mut batch_comb = 0.0;
        for result in results {
            let (g, breakdown) = result?;
            for i in 0..grad.len() {
                grad[i] += g[i];
            }
            sum_std += breakdown.standard;
            sum_rob += breakdown.robust;
            sum_comb += breakdown.combined;
            batch_comb += breakdown.combined;
        }
        if !batch_comb.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: batch_idx,
            });
        }
        let scale = 1.0 / batch.len() as f64;
        for g in &mut grad {
            *g *= scale;
        }
        opt.step(&grad, config.learning_rate);
    }

    let n = dataset.len() as f64;
    Ok(EpochMetrics {
        epoch,
        standard_loss: sum_std / n,
        robust_loss: sum_rob / n,
        combined_loss: sum_comb / n,
        epsilon_used: epsilon,
        lambda_used: lambda,
    })
}

fn derive_seed(seed: u64, epoch: usize, sample: usize) -> u64 {
    seed.wrapping_mul(0x100000001b3)
        .wrapping_add(epoch as u64)
        .wrapping_mul(0x100000001b3)
        .wrapping_add(sample as u64)
}

/// Trains a fresh copy of the model for the configured number of epochs.
pub fn train(
    model: &Model<f64>,
    dataset: &[Sample],
    config: &TrainConfig,
) -> Result<(Model<f64>, Vec<EpochMetrics>), TrainError> {
    let mut opt = Optimizer::new(model);
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        metrics.push(train_epoch(model, &mut opt, dataset, config, epoch)?);
    }
    Ok((model.from_flat(&opt.params), metrics))
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// The worst parameters: (flat index, reverse-mode, finite-difference).
    pub worst: Vec<(usize, f64, f64)>,
    pub pass: bool,
}

/// Compares reverse-mode gradients of the combined loss against central
/// finite differences for every weight of a small model.
pub fn grad_check(
    model: &Model<f64>,
    sample: &Sample,
    epsilon: f64,
    lambda: f64,
    tol: f64,
) -> Result<GradCheckReport, TrainError> {
    let params = model.flatten();
    let (ad_grad, _) = sample_gradient(
        model,
        &params,
        sample,
        None,
        epsilon,
        lambda,
        TrainMode::Certified,
    )?;

    let loss_at = |p: &[f64]| -> Result<f64, TrainError> {
        let m = model.from_flat(p);
        let (loss, _) = sample_loss(&m, sample, None, epsilon, lambda, TrainMode::Certified)?;
        Ok(loss)
    };

    let h = 1e-5;
    let mut worst: Vec<(usize, f64, f64, f64)> = Vec::new();
    let mut max_rel = 0.0f64;
    let mut scratch = params.clone();
    for i in 0..params.len() {
        scratch[i] = params[i] + h;
        let up = loss_at(&scratch)?;
        scratch[i] = params[i] - h;
        let down = loss_at(&scratch)?;
        scratch[i] = params[i];
        let fd = (up - down) / (2.0 * h);
        let ad = ad_grad[i];
        let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1.0);
        if rel > max_rel {
            max_rel = rel;
        }
        worst.push((i, ad, fd, rel));
    }
    worst.sort_by(|a, b| b.3.partial_cmp(&a.3).unwrap());
    worst.truncate(5);
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst: worst.into_iter().map(|(i, a, f, _)| (i, a, f)).collect(),
        pass: max_rel <= tol,
    })
}
