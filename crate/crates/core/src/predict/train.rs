use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gru::{GruModel, Scratch};
use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const INIT_SCHEME: &str = "uniform(-1/sqrt(hidden), 1/sqrt(hidden))";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Hidden size 200, up to 100 epochs.
    Paper,
    /// Hidden size 16, up to 30 epochs.
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        })
    }
}

/// Training hyperparameters. Input and output widths come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruConfig {
    pub profile: Profile,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl GruConfig {
    pub fn paper(seed: u64) -> Self {
        Self {
            profile: Profile::Paper,
            hidden_size: 200,
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
            patience: 5,
            min_delta: 1e-5,
            seed,
        }
    }

    pub fn desk(seed: u64) -> Self {
        Self { profile: Profile::Desk, hidden_size: 16, epochs: 30, ..Self::paper(seed) }
    }

    pub fn for_profile(profile: Profile, seed: u64) -> Self {
        match profile {
            Profile::Paper => Self::paper(seed),
            Profile::Desk => Self::desk(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config("hidden_size, epochs, batch_size and patience must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return Err(Error::Config(format!("min_delta {} must be nonnegative", self.min_delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub init: String,
    pub seed: u64,
    pub n_params: usize,
    pub wall_time_seconds: f64,
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { lr: T::lit(lr), m: vec![T::zero(); n_params], v: vec![T::zero(); n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPS));
        self.t += 1;
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

fn check_finite<T: Scalar>(loss: T, what: &str, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} loss became {loss} in epoch {epoch}")))
    }
}

/// Fits a model to `train` by minibatch Adam on mean squared error, with
/// early stopping on `val`. The parameters with the lowest validation loss
/// are returned.
pub fn train<T: Scalar>(
    config: &GruConfig,
    train: &WindowedDataset<T>,
    val: &WindowedDataset<T>,
) -> Result<(GruModel<T>, TrainReport)> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be nonempty".into()));
    }
    if train.width() != val.width() || train.window_length() != val.window_length() {
        return Err(Error::Shape("training and validation windows differ in shape".into()));
    }
    let started = Instant::now();
    let d = train.width();
    let mut model = GruModel::init_uniform(d, config.hidden_size, d, config.seed)?;
    let mut adam = Adam::new(model.n_params(), config.learning_rate);
    let mut grad = vec![T::zero(); model.n_params()];
    let mut scratch = Scratch::default();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.n_samples()).collect();
    let val_idx: Vec<usize> = (0..val.n_samples()).collect();

    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = model.params().to_vec();
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = T::zero();
        for batch in order.chunks(config.batch_size) {
            let loss = model.loss_and_grad(train, batch, &mut grad, &mut scratch)?;
            check_finite(loss, "training", epoch)?;
            total += loss * T::from_usize_lossy(batch.len());
            adam.step(model.params_mut(), &grad);
        }
        let tl = total / T::from_usize_lossy(order.len());
        let vl = model.mse(val, &val_idx)?;
        check_finite(vl, "validation", epoch)?;
        train_loss.push(tl.as_f64());
        val_loss.push(vl.as_f64());

        if best - vl.as_f64() > config.min_delta {
            best = vl.as_f64();
            best_epoch = epoch;
            best_params.copy_from_slice(model.params());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = epoch < config.epochs;
                break;
            }
        }
    }
    model.params_mut().copy_from_slice(&best_params);

    let report = TrainReport {
        epochs_run: val_loss.len(),
        train_loss,
        val_loss,
        best_epoch,
        best_val_loss: best,
        stopped_early,
        init: INIT_SCHEME.into(),
        seed: config.seed,
        n_params: model.n_params(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(values: &[Vec<f64>], window: usize) -> WindowedDataset<f64> {
        // values: one row per time step.
        let d = values[0].len();
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for s in 0..=values.len() - window {
            for row in &values[s..s + window - 1] {
                inputs.extend_from_slice(row);
            }
            targets.extend_from_slice(&values[s + window - 1]);
        }
        WindowedDataset::from_parts(inputs, targets, window, d).unwrap()
    }

    fn sine_rows(n: usize, phase: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|t| {
                let x = (t + phase) as f64 * std::f64::consts::TAU / 12.0;
                vec![0.5 + 0.4 * x.sin(), 0.5 + 0.4 * x.cos()]
            })
            .collect()
    }

    fn tiny(seed: u64) -> GruConfig {
        GruConfig { hidden_size: 6, epochs: 15, ..GruConfig::desk(seed) }
    }

    #[test]
    fn profiles() {
        let p = GruConfig::paper(0);
        assert_eq!((p.hidden_size, p.epochs, p.batch_size, p.patience), (200, 100, 32, 5));
        assert_eq!(p.learning_rate, 1e-3);
        assert_eq!(p.min_delta, 1e-5);
        let d = GruConfig::desk(0);
        assert_eq!((d.hidden_size, d.epochs), (16, 30));
        assert_eq!("DESK".parse::<Profile>().unwrap(), Profile::Desk);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(GruConfig { hidden_size: 0, ..GruConfig::desk(0) }.validate().is_err());
        assert!(GruConfig { min_delta: -1.0, ..GruConfig::desk(0) }.validate().is_err());
        assert!(GruConfig { learning_rate: 0.0, ..GruConfig::desk(0) }.validate().is_err());
    }

    #[test]
    fn constant_target_learns_bias() {
        let rows = vec![vec![0.7]; 200];
        let ds = dataset(&rows, 11);
        let cfg = GruConfig { epochs: 100, ..GruConfig::desk(3) };
        let (model, report) = train(&cfg, &ds, &ds).unwrap();
        let idx: Vec<usize> = (0..ds.n_samples()).collect();
        assert!(model.mse(&ds, &idx).unwrap() < 1e-4, "{report:?}");
    }

    #[test]
    fn same_seed_same_curves() {
        let ds = dataset(&sine_rows(120, 0), 11);
        let val = dataset(&sine_rows(40, 3), 11);
        let (m1, r1) = train(&tiny(5), &ds, &val).unwrap();
        let (m2, r2) = train(&tiny(5), &ds, &val).unwrap();
        assert_eq!(r1.train_loss, r2.train_loss);
        assert_eq!(r1.val_loss, r2.val_loss);
        assert_eq!(m1, m2);
        let (_, r3) = train(&tiny(6), &ds, &val).unwrap();
        assert_ne!(r1.train_loss, r3.train_loss);
    }

    #[test]
    fn plateau_triggers_patience() {
        // Targets are pure noise unrelated to inputs: validation loss stops
        // improving quickly.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..150).map(|_| vec![rng.random::<f64>()]).collect();
        let train_ds = dataset(&rows[..100], 11);
        let val_ds = dataset(&rows[100..], 11);
        let cfg = GruConfig { min_delta: 0.05, ..GruConfig::desk(2) };
        let (_, report) = train(&cfg, &train_ds, &val_ds).unwrap();
        assert!(report.stopped_early);
        assert!(report.epochs_run < 100);
        assert_eq!(report.val_loss.len(), report.epochs_run);
        let after = &report.val_loss[report.best_epoch..];
        assert_eq!(after.len(), cfg.patience);
        assert!(after.iter().all(|&v| report.best_val_loss - v <= cfg.min_delta));
    }

    #[test]
    fn restored_parameters_are_best() {
        let ds = dataset(&sine_rows(150, 0), 11);
        let val = dataset(&sine_rows(40, 5), 11);
        let (model, report) = train(&tiny(8), &ds, &val).unwrap();
        let idx: Vec<usize> = (0..val.n_samples()).collect();
        let restored = model.mse(&val, &idx).unwrap();
        assert!((restored - report.best_val_loss).abs() < 1e-12);
        for &later in &report.val_loss[report.best_epoch..] {
            assert!(restored <= later + 1e-5);
        }
    }

    #[test]
    fn one_adam_step_does_not_increase_loss() {
        let ds = dataset(&sine_rows(60, 0), 11);
        let batch: Vec<usize> = (0..32).collect();
        let mut model = GruModel::<f64>::init_uniform(2, 5, 2, 11).unwrap();
        let mut grad = vec![0.0; model.n_params()];
        let mut scratch = Scratch::default();
        let before = model.loss_and_grad(&ds, &batch, &mut grad, &mut scratch).unwrap();
        let mut adam = Adam::new(model.n_params(), 1e-3);
        adam.step(model.params_mut(), &grad);
        let after = model.mse(&ds, &batch).unwrap();
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn divergence_is_numerical_error() {
        let mut rows = sine_rows(60, 0);
        rows[30] = vec![f64::MAX, f64::MAX];
        let ds = dataset(&rows, 11);
        let err = train(&tiny(1), &ds, &ds).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = dataset(&sine_rows(40, 0), 11);
        let b = dataset(&vec![vec![0.1]; 40], 11);
        assert!(matches!(train(&tiny(1), &a, &b), Err(Error::Shape(_))));
    }
}
