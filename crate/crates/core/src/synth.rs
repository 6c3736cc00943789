//! Synthetic traffic-matrix traces with planted flow groups.
//!
//! Flows are assigned to groups contiguously in flow-index order, and every
//! flow of a group is drawn from the same generator with its own random
//! phase. Noise is Gaussian with standard deviation `noise_std · amplitude`
//! and the result is truncated at zero.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::cluster::{Partition, PartitionMethod};
use crate::dataset::{TmSeries, DEFAULT_INTERVAL_SECONDS};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Sine,
    Square,
    /// Sparse Bernoulli support (rate `1/period_steps`) with i.i.d.
    /// lognormal marks scaled by the amplitude.
    BurstyLognormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub flows: usize,
    pub period_steps: usize,
    pub amplitude: f64,
    pub noise_std: f64,
    pub shape: Shape,
}

/// Named generator settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    TwoGroupPeriodic,
    TwoGroupMixedShape,
}

impl Preset {
    pub fn spec(self, seed: u64) -> SynthSpec {
        match self {
            Preset::TwoGroupPeriodic => SynthSpec::two_group_periodic(seed),
            Preset::TwoGroupMixedShape => SynthSpec::two_group_mixed_shape(seed),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "two_group_periodic" => Ok(Preset::TwoGroupPeriodic),
            "two_group_mixed_shape" => Ok(Preset::TwoGroupMixedShape),
            _ => Err(Error::Config(format!("unknown preset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_nodes: usize,
    pub steps: usize,
    #[serde(default = "default_interval")]
    pub interval_seconds: u32,
    pub groups: Vec<GroupSpec>,
    pub seed: u64,
}

fn default_interval() -> u32 {
    DEFAULT_INTERVAL_SECONDS
}

impl SynthSpec {
    /// Four nodes, two groups of eight sine flows with periods of 24 and 96
    /// steps, 5% noise, 2048 five-minute steps.
    pub fn two_group_periodic(seed: u64) -> Self {
        Self {
            n_nodes: 4,
            steps: 2048,
            interval_seconds: DEFAULT_INTERVAL_SECONDS,
            groups: vec![
                GroupSpec { flows: 8, period_steps: 24, amplitude: 1.0e6, noise_std: 0.05, shape: Shape::Sine },
                GroupSpec { flows: 8, period_steps: 96, amplitude: 4.0e6, noise_std: 0.05, shape: Shape::Sine },
            ],
            seed,
        }
    }

    /// Same periods as [`SynthSpec::two_group_periodic`], but the second
    /// group is a square wave so the value distributions differ as well.
    pub fn two_group_mixed_shape(seed: u64) -> Self {
        let mut spec = Self::two_group_periodic(seed);
        spec.groups[1].shape = Shape::Square;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.n_nodes == 0 || self.steps == 0 || self.interval_seconds == 0 {
            return bad("n_nodes, steps and interval_seconds must be positive".into());
        }
        if self.groups.is_empty() {
            return bad("at least one group is required".into());
        }
        let total: usize = self.groups.iter().map(|g| g.flows).sum();
        if total != self.n_nodes * self.n_nodes {
            return bad(format!("group flow counts sum to {total}, expected {}", self.n_nodes * self.n_nodes));
        }
        for (k, g) in self.groups.iter().enumerate() {
            if g.flows == 0 {
                return bad(format!("group {k} has no flows"));
            }
            if g.period_steps < 2 {
                return bad(format!("group {k}: period_steps must be at least 2"));
            }
            if !(g.amplitude > 0.0 && g.amplitude.is_finite()) {
                return bad(format!("group {k}: amplitude must be positive"));
            }
            if !(g.noise_std >= 0.0 && g.noise_std.is_finite()) {
                return bad(format!("group {k}: noise_std must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Draws a trace and the planted ground-truth partition (one label per group).
pub fn generate<T: Scalar>(spec: &SynthSpec) -> Result<(TmSeries<T>, Partition)> {
    spec.validate()?;
    let m = spec.n_nodes * spec.n_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut flows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    let unit_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let marks = LogNormal::new(0.0, 1.0).expect("valid lognormal");

    for (g, group) in spec.groups.iter().enumerate() {
        let period = group.period_steps as f64;
        let noise = group.noise_std * group.amplitude;
        for _ in 0..group.flows {
            let phase = rng.random_range(0.0..TAU);
            let series = (0..spec.steps)
                .map(|t| {
                    let angle = TAU * t as f64 / period + phase;
                    let base = match group.shape {
                        Shape::Sine => group.amplitude * (1.0 + angle.sin()),
                        Shape::Square => {
                            if angle.sin() >= 0.0 {
                                2.0 * group.amplitude
                            } else {
                                0.0
                            }
                        }
                        Shape::BurstyLognormal => {
                            if rng.random_bool(1.0 / period) {
                                group.amplitude * marks.sample(&mut rng)
                            } else {
                                0.0
                            }
                        }
                    };
                    let eps = if noise > 0.0 { noise * unit_normal.sample(&mut rng) } else { 0.0 };
                    (base + eps).max(0.0)
                })
                .collect();
            flows.push(series);
            labels.push(g + 1);
        }
    }

    let mut values = Vec::with_capacity(m * spec.steps);
    for t in 0..spec.steps {
        values.extend(flows.iter().map(|f| T::lit(f[t])));
    }
    let stamps = (0..spec.steps as i64).map(|t| t * i64::from(spec.interval_seconds)).collect();
    let tm = TmSeries::new(spec.n_nodes, spec.interval_seconds, values, Some(stamps))?;
    let truth = Partition::new(labels, PartitionMethod::Planted, Some(spec.seed))?;
    Ok((tm, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_group_has_k_one() {
        let spec = SynthSpec {
            n_nodes: 2,
            steps: 50,
            interval_seconds: 300,
            groups: vec![GroupSpec { flows: 4, period_steps: 10, amplitude: 1.0, noise_std: 0.1, shape: Shape::Sine }],
            seed: 1,
        };
        let (tm, truth) = generate::<f64>(&spec).unwrap();
        assert_eq!(truth.k(), 1);
        assert_eq!(tm.len(), 50);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate::<f64>(&SynthSpec::two_group_periodic(7)).unwrap();
        let b = generate::<f64>(&SynthSpec::two_group_periodic(7)).unwrap();
        let c = generate::<f64>(&SynthSpec::two_group_periodic(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn all_shapes_nonnegative() {
        let spec = SynthSpec {
            n_nodes: 2,
            steps: 400,
            interval_seconds: 900,
            groups: vec![
                GroupSpec { flows: 1, period_steps: 8, amplitude: 1.0, noise_std: 2.0, shape: Shape::Sine },
                GroupSpec { flows: 1, period_steps: 8, amplitude: 1.0, noise_std: 2.0, shape: Shape::Square },
                GroupSpec { flows: 2, period_steps: 5, amplitude: 3.0, noise_std: 0.5, shape: Shape::BurstyLognormal },
            ],
            seed: 3,
        };
        let (tm, truth) = generate::<f64>(&spec).unwrap();
        assert!(tm.values().iter().all(|&v| v >= 0.0));
        assert_eq!(truth.labels(), &[1, 2, 3, 3]);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SynthSpec::two_group_periodic(0);
        spec.groups[0].flows = 7;
        assert!(generate::<f64>(&spec).is_err());
        let mut spec = SynthSpec::two_group_periodic(0);
        spec.groups[1].period_steps = 1;
        assert!(spec.validate().is_err());
        let mut spec = SynthSpec::two_group_periodic(0);
        spec.groups[1].amplitude = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = SynthSpec::two_group_periodic(0);
        spec.groups[1].noise_std = -0.1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn noiseless_sine_is_exact() {
        let spec = SynthSpec {
            n_nodes: 1,
            steps: 8,
            interval_seconds: 300,
            groups: vec![GroupSpec { flows: 1, period_steps: 4, amplitude: 2.0, noise_std: 0.0, shape: Shape::Sine }],
            seed: 11,
        };
        let (tm, _) = generate::<f64>(&spec).unwrap();
        let v = tm.values();
        for t in 0..4 {
            assert!((v[t] - v[t + 4]).abs() < 1e-9);
        }
        let mean: f64 = v.iter().sum::<f64>() / 8.0;
        assert!((mean - 2.0).abs() < 1e-9);
    }
}
