//! Adam, the mini-batch training loop, and evaluation metrics.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::dataset::{NormStats, NormalizedSample, HORIZON};
use crate::error::{contract, Result};
use crate::lstm::{batch_gradients, forecast, init_params, mse, Gradients, ModelParams, DEFAULT_HIDDEN};
use crate::numerics::Rng;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Global L2-norm gradient clip; off when `None`.
    pub clip_threshold: Option<f64>,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            batch_size: 30,
            epochs: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            clip_threshold: None,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(contract("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(contract("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(contract("epochs must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(contract("hidden must be at least 1"));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(contract(alloc::format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(contract("adam_eps must be positive"));
        }
        if let Some(c) = self.clip_threshold {
            if !(c > 0.0) {
                return Err(contract("clip_threshold must be positive when set"));
            }
        }
        Ok(())
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of a flat tensor. `step` is the already
/// incremented step count (1 on the first update).
pub fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    cfg: &TrainConfig,
) {
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - libm::pow(b1, step as f64);
    let c2 = 1.0 - libm::pow(b2, step as f64);
    for k in 0..theta.len() {
        let g = grad[k];
        m[k] = b1 * m[k] + (1.0 - b1) * g;
        v[k] = b2 * v[k] + (1.0 - b2) * g * g;
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        theta[k] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.adam_eps);
    }
}

/// Applies one Adam step to every trainable tensor.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let shapes = params.slices().map(|s| s.len());
    if grads.shapes() != shapes || state.m.shapes() != shapes || state.v.shapes() != shapes {
        return Err(contract("adam_step: gradient or moment shapes differ from parameters"));
    }
    state.t += 1;
    let step = state.t;
    let g = grads.slices();
    let m = state.m.slices_mut();
    let v = state.v.slices_mut();
    for (((theta, g), m), v) in params.slices_mut().into_iter().zip(g).zip(m).zip(v) {
        adam_update(theta, g, m, v, step, cfg);
    }
    Ok(())
}

/// Per-epoch losses in normalized units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    /// Mean of the per-sample training losses seen during each epoch, each
    /// computed with the weights in place before its batch's update.
    pub train_mse: Vec<f64>,
    /// Mean loss over the held-out pairs at the end of each epoch, if any.
    pub test_mse: Vec<Option<f64>>,
}

/// Progress passed to a training observer once per epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochReport {
    pub epoch: usize,
    pub steps: u64,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

/// Mean per-sample loss, summed in slice order.
pub fn mean_loss(params: &ModelParams, samples: &[NormalizedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(contract("mean_loss over an empty set"));
    }
    let mut total = 0.0;
    for s in samples {
        total += mse(&forecast(&s.x, params)?, &s.y);
    }
    Ok(total / samples.len() as f64)
}

/// Shuffled batches for one epoch. Samples are grouped by exact sequence
/// length so every batch holds equal-length windows; within each group the
/// order is shuffled, groups are cut into `batch_size` chunks (the last may
/// be short), and the chunk order is shuffled again. Depends only on the
/// sample lengths, `seed` and `epoch`.
pub fn epoch_batches(lengths: &[usize], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &len) in lengths.iter().enumerate() {
        buckets.entry(len).or_default().push(i);
    }
    let mut rng = Rng::derive(seed, epoch as u64 + 1);
    let mut batches = Vec::new();
    for (_, mut ids) in buckets {
        rng.shuffle(&mut ids);
        for chunk in ids.chunks(batch_size) {
            batches.push(chunk.to_vec());
        }
    }
    rng.shuffle(&mut batches);
    batches
}

fn check_samples(samples: &[NormalizedSample], what: &str) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        if s.y.len() != HORIZON || s.steps() == 0 || s.x.len() % crate::dataset::WRENCH_CHANNELS != 0 {
            return Err(contract(alloc::format!("{what} sample {i} has malformed x or y")));
        }
    }
    Ok(())
}

/// Trains a fresh model; see [`train_with_observer`].
pub fn train(
    train_samples: &[NormalizedSample],
    test_samples: &[NormalizedSample],
    norm: &NormStats,
    cfg: &TrainConfig,
) -> Result<(ModelParams, LossHistory)> {
    train_with_observer(train_samples, test_samples, norm, cfg, |_| {})
}

/// Initializes parameters from `cfg.seed`, then for each epoch runs one Adam
/// step per batch from [`epoch_batches`] on the batch-mean gradient. Losses
/// are measured on the full train and test sets after every epoch.
pub fn train_with_observer(
    train_samples: &[NormalizedSample],
    test_samples: &[NormalizedSample],
    norm: &NormStats,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochReport),
) -> Result<(ModelParams, LossHistory)> {
    cfg.validate()?;
    norm.validate()?;
    if train_samples.is_empty() {
        return Err(contract("training set is empty"));
    }
    check_samples(train_samples, "train")?;
    check_samples(test_samples, "test")?;

    let mut params = init_params(cfg.seed, cfg.hidden)?;
    params.norm = norm.clone();
    let mut state = AdamState::new(&params);
    let lengths: Vec<usize> = train_samples.iter().map(|s| s.steps()).collect();
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for batch in epoch_batches(&lengths, cfg.batch_size, cfg.seed, epoch) {
            let (batch_loss, mut grads) = batch_gradients(
                batch
                    .iter()
                    .map(|&i| (train_samples[i].x.as_slice(), train_samples[i].y.as_slice())),
                &params,
            )?;
            if let Some(limit) = cfg.clip_threshold {
                let norm = grads.l2_norm();
                if norm > limit {
                    grads.scale(limit / norm);
                }
            }
            loss_sum += batch_loss * batch.len() as f64;
            adam_step(&mut params, &grads, &mut state, cfg)?;
        }
        let train_mse = loss_sum / train_samples.len() as f64;
        let test_mse = if test_samples.is_empty() {
            None
        } else {
            Some(mean_loss(&params, test_samples)?)
        };
        if !train_mse.is_finite() {
            return Err(contract(alloc::format!("training diverged at epoch {epoch}")));
        }
        history.train_mse.push(train_mse);
        history.test_mse.push(test_mse);
        observer(&EpochReport {
            epoch,
            steps: state.t,
            train_mse,
            test_mse,
        });
    }
    Ok((params, history))
}

/// Predicted and actual grip for one sample, in newtons.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub predicted_n: Vec<f64>,
    pub actual_n: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Mean squared error in normalized grip units.
    pub mse_norm: f64,
    /// Mean squared error in N².
    pub mse_n2: f64,
    /// Mean absolute error of the last horizon step, in newtons.
    pub final_step_mae_n: f64,
    pub n_samples: usize,
    pub residuals: Vec<Residual>,
}

/// Metrics of `params` over `samples`.
pub fn evaluate(params: &ModelParams, samples: &[NormalizedSample]) -> Result<Metrics> {
    evaluate_with(&params.norm, samples, |s| forecast(&s.x, params))
}

/// Metrics of an arbitrary forecaster returning normalized grip values.
pub fn evaluate_with<F>(norm: &NormStats, samples: &[NormalizedSample], mut predict: F) -> Result<Metrics>
where
    F: FnMut(&NormalizedSample) -> Result<Vec<f64>>,
{
    if samples.is_empty() {
        return Err(contract("evaluate needs at least one sample"));
    }
    let mut mse_norm = 0.0;
    let mut mse_n2 = 0.0;
    let mut final_mae = 0.0;
    let mut residuals = Vec::with_capacity(samples.len());
    for s in samples {
        let y_hat = predict(s)?;
        if y_hat.len() != s.y.len() || s.y.is_empty() {
            return Err(contract("forecast length differs from target length"));
        }
        mse_norm += mse(&y_hat, &s.y);
        let predicted_n: Vec<f64> = y_hat.iter().map(|&z| norm.denormalize_grip(z)).collect();
        let actual_n: Vec<f64> = s.y.iter().map(|&z| norm.denormalize_grip(z)).collect();
        mse_n2 += mse(&predicted_n, &actual_n);
        let last = actual_n.len() - 1;
        final_mae += libm::fabs(predicted_n[last] - actual_n[last]);
        residuals.push(Residual { predicted_n, actual_n });
    }
    let n = samples.len() as f64;
    Ok(Metrics {
        mse_norm: mse_norm / n,
        mse_n2: mse_n2 / n,
        final_step_mae_n: final_mae / n,
        n_samples: samples.len(),
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::WRENCH_CHANNELS;
    use alloc::vec;

    #[test]
    fn adam_scalar_closed_form() {
        let cfg = TrainConfig::default();
        let (mut th, mut m, mut v) = ([0.0], [0.0], [0.0]);
        adam_update(&mut th, &[1.0], &mut m, &mut v, 1, &cfg);
        assert!((m[0] - 0.1).abs() < 1e-15);
        assert!((v[0] - 0.001).abs() < 1e-15);
        assert!((th[0] - (-5e-4 / (1.0 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn adam_zero_gradient_is_noop_and_pure() {
        let cfg = TrainConfig::default();
        let p0 = init_params(1, 3).unwrap();
        let mut p = p0.clone();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &Gradients::zeros_like(&p0), &mut st, &cfg).unwrap();
        assert_eq!(p, p0);
        assert_eq!(st.t, 1);

        let mut g = Gradients::zeros_like(&p0);
        g.head_b[3] = 0.7;
        g.layer1.w_hh.set(2, 1, -0.2);
        let (mut a, mut b) = (p0.clone(), p0.clone());
        let (mut sa, mut sb) = (AdamState::new(&p0), AdamState::new(&p0));
        adam_step(&mut a, &g, &mut sa, &cfg).unwrap();
        adam_step(&mut b, &g, &mut sb, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_ne!(a, p0);

        let wrong = Gradients::zeros_like(&init_params(1, 4).unwrap());
        assert!(adam_step(&mut a, &wrong, &mut sa, &cfg).is_err());
    }

    fn toy_samples(n: usize, steps: usize, seed: u64) -> Vec<NormalizedSample> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|_| NormalizedSample {
                x: (0..steps * WRENCH_CHANNELS).map(|_| rng.uniform(-1.0, 1.0)).collect(),
                y: (0..HORIZON).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn batches_cover_every_sample_once() {
        let lengths = [3, 5, 3, 3, 5, 7, 3, 3];
        let batches = epoch_batches(&lengths, 2, 9, 0);
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        for b in &batches {
            assert!(b.len() <= 2);
            assert!(b.iter().all(|&i| lengths[i] == lengths[b[0]]));
        }
        assert_eq!(batches, epoch_batches(&lengths, 2, 9, 0));
        assert_ne!(epoch_batches(&lengths, 1, 9, 0), epoch_batches(&lengths, 1, 9, 1));
    }

    #[test]
    fn one_epoch_full_batch_is_one_step() {
        let data = toy_samples(4, 3, 1);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            hidden: 3,
            ..TrainConfig::default()
        };
        let mut steps = 0;
        let (params, hist) =
            train_with_observer(&data, &[], &NormStats::identity(), &cfg, |r| steps = r.steps).unwrap();
        assert_eq!(steps, 1);
        assert_eq!(hist.train_mse.len(), 1);
        assert_eq!(hist.test_mse, vec![None]);

        // the same single step by hand
        let mut manual = init_params(cfg.seed, 3).unwrap();
        let (loss0, g) = batch_gradients(data.iter().map(|s| (s.x.as_slice(), s.y.as_slice())), &manual).unwrap();
        // the reported loss is the one seen before the update
        assert!((hist.train_mse[0] - loss0).abs() < 1e-12);
        assert!((loss0 - mean_loss(&manual, &data).unwrap()).abs() < 1e-12);
        let mut st = AdamState::new(&manual);
        // batch order inside the step only changes summation order
        adam_step(&mut manual, &g, &mut st, &cfg).unwrap();
        for (a, b) in params.slices().iter().zip(manual.slices()) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn train_rejects_bad_input() {
        let data = toy_samples(2, 3, 1);
        let norm = NormStats::identity();
        let zero_epochs = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(&data, &[], &norm, &zero_epochs).is_err());
        assert!(train(&[], &[], &norm, &TrainConfig::default()).is_err());
        let bad_lr = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad_lr.validate().is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_samples(6, 4, 2);
        let test = toy_samples(2, 4, 3);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            hidden: 4,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train(&data, &test, &NormStats::identity(), &cfg).unwrap();
        let b = train(&data, &test, &NormStats::identity(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.1.test_mse.iter().all(|v| v.is_some()));
    }

    #[test]
    fn clipping_bounds_the_update() {
        let data = toy_samples(3, 3, 4);
        let cfg = TrainConfig {
            epochs: 2,
            hidden: 3,
            clip_threshold: Some(1e-3),
            ..TrainConfig::default()
        };
        let (p, h) = train(&data, &[], &NormStats::identity(), &cfg).unwrap();
        p.validate().unwrap();
        assert_eq!(h.train_mse.len(), 2);
    }

    #[test]
    fn perfect_forecaster_scores_zero() {
        let data = toy_samples(5, 3, 6);
        let mut norm = NormStats::identity();
        norm.mean[6] = 4.0;
        norm.std[6] = 2.5;
        let m = evaluate_with(&norm, &data, |s| Ok(s.y.clone())).unwrap();
        assert_eq!((m.mse_norm, m.mse_n2, m.final_step_mae_n), (0.0, 0.0, 0.0));
        assert_eq!(m.n_samples, 5);
        assert!(evaluate_with(&norm, &[], |s| Ok(s.y.clone())).is_err());
    }

    #[test]
    fn metrics_recompute_from_residuals() {
        let data = toy_samples(7, 5, 8);
        let mut p = init_params(2, 4).unwrap();
        p.norm.mean[6] = 3.0;
        p.norm.std[6] = 2.0;
        let m = evaluate(&p, &data).unwrap();
        let n = m.residuals.len() as f64;
        let mut sq = 0.0;
        let mut last = 0.0;
        for r in &m.residuals {
            let k = r.actual_n.len();
            sq += r.predicted_n.iter().zip(&r.actual_n).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / k as f64;
            last += (r.predicted_n[k - 1] - r.actual_n[k - 1]).abs();
        }
        assert!((m.mse_n2 - sq / n).abs() < 1e-12);
        assert!((m.final_step_mae_n - last / n).abs() < 1e-12);
        // grip scale 2 ⇒ N² error is 4× the normalized one
        assert!((m.mse_n2 - 4.0 * m.mse_norm).abs() < 1e-9);
        assert_eq!(m.mse_norm, mean_loss(&p, &data).unwrap());
    }
}
