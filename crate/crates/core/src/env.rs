//! Stochastic reward environment with deterministic, seed-reproducible
//! sampling.
//!
//! One [`Environment`] wraps an instance and a seeded RNG stream. Rewards
//! for the same instance, seed, and pull sequence are bit-exact across runs
//! and platforms: the generator is ChaCha8 (a portable, counter-based stream
//! cipher RNG) and every per-pair sampler is built once, up front, in
//! row-major order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::instance::{ProblemInstance, RewardFamily};

/// Per-pair reward sampler, specialized at construction time.
enum PairSampler {
    /// Mean exactly 0 or 1: the reward is deterministic in both families
    /// (a Bernoulli is constant, and the beta parameterization degrades).
    Constant(f64),
    /// Bernoulli with the given success probability.
    Bernoulli(f64),
    /// `Beta(mu * kappa, (1 - mu) * kappa)`.
    Beta(Beta<f64>),
}

impl PairSampler {
    fn new(mu: f64, family: RewardFamily) -> Self {
        if mu == 0.0 || mu == 1.0 {
            return PairSampler::Constant(mu);
        }
        match family {
            RewardFamily::Bernoulli => PairSampler::Bernoulli(mu),
            RewardFamily::Beta { concentration } => PairSampler::Beta(
                Beta::new(mu * concentration, (1.0 - mu) * concentration)
                    .expect("means in (0, 1) and positive concentration give valid shapes"),
            ),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            PairSampler::Constant(v) => *v,
            PairSampler::Bernoulli(p) => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            PairSampler::Beta(dist) => dist.sample(rng),
        }
    }
}

/// Seeded reward source for one instance.
pub struct Environment {
    samplers: Vec<PairSampler>,
    n_attrs: usize,
    rng: ChaCha8Rng,
    samples_drawn: u64,
}

impl Environment {
    /// Builds the environment; the seed fully determines the reward stream.
    #[must_use]
    pub fn new(inst: &ProblemInstance, seed: u64) -> Self {
        let family = inst.reward_family();
        let samplers = (0..inst.n_arms())
            .flat_map(|i| (0..inst.n_attrs()).map(move |j| (i, j)))
            .map(|(i, j)| PairSampler::new(inst.mean(i, j), family))
            .collect();
        Self {
            samplers,
            n_attrs: inst.n_attrs(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            samples_drawn: 0,
        }
    }

    /// Draws one reward for the (0-based) arm-attribute pair.
    pub fn sample(&mut self, arm: usize, attr: usize) -> f64 {
        self.samples_drawn += 1;
        self.samplers[arm * self.n_attrs + attr].sample(&mut self.rng)
    }

    /// Total rewards drawn so far.
    #[must_use]
    pub fn samples_drawn(&self) -> u64 {
        self.samples_drawn
    }
}
