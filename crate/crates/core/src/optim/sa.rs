//! Simulated annealing around the best point found so far.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AlgorithmConfig, Bounds, Objective, OptimizerConfig, RunReport, Tracker};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `t0 / ln(k + 1)`
    #[default]
    Boltzmann,
    /// `t0 · 0.95^k`
    Exponential,
    /// `t0 / k`
    Fast,
}

impl Schedule {
    pub const ALL: [Schedule; 3] = [Schedule::Boltzmann, Schedule::Exponential, Schedule::Fast];

    pub fn name(self) -> &'static str {
        match self {
            Schedule::Boltzmann => "boltzmann",
            Schedule::Exponential => "exponential",
            Schedule::Fast => "fast",
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Schedule::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::config(format!("unknown schedule {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub iterations: usize,
    pub schedule: Schedule,
    pub t0: f64,
    /// Re-evaluate the best point once at the end (counted).
    pub final_evaluation: bool,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            schedule: Schedule::Boltzmann,
            t0: 1.0,
            final_evaluation: false,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::config(format!("t0 must be positive, got {}", self.t0)));
        }
        Ok(())
    }
}

/// Temperature at step `k >= 1`.
pub fn sa_schedule(schedule: Schedule, t0: f64, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::domain("annealing step k starts at 1"));
    }
    if !(t0 > 0.0) {
        return Err(Error::domain("t0 must be positive"));
    }
    let k = k as f64;
    Ok(match schedule {
        Schedule::Boltzmann => t0 / (k + 1.0).ln(),
        Schedule::Exponential => t0 * 0.95f64.powf(k),
        Schedule::Fast => t0 / k,
    })
}

/// `1 / (1 + exp(ΔE / T))`, the chance of taking a non-improving move.
pub fn acceptance_probability(delta_e: f64, t: f64) -> f64 {
    1.0 / (1.0 + (delta_e / t).exp())
}

/// Improvements always pass; anything else passes with
/// [`acceptance_probability`].
pub fn sa_accept(delta_e: f64, t: f64, rng: &mut impl Rng) -> bool {
    if delta_e < 0.0 {
        return true;
    }
    rng.gen::<f64>() < acceptance_probability(delta_e, t)
}

/// Fold `v` into `[lo, hi]` by mirroring at the walls.
pub fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let mut t = (v - lo).rem_euclid(2.0 * w);
    if t > w {
        t = 2.0 * w - t;
    }
    (lo + t).clamp(lo, hi)
}

/// `x + N(0, T)` per dimension, reflected into the bounds.
pub fn sa_propose(x: &[f64], t: f64, bounds: &Bounds, rng: &mut impl Rng) -> Vec<f64> {
    let sd = t.sqrt();
    x.iter()
        .enumerate()
        .map(|(d, v)| {
            let z: f64 = StandardNormal.sample(rng);
            reflect(v + sd * z, bounds.lo(d), bounds.hi(d))
        })
        .collect()
}

/// Annealing that proposes from the best point; energy is negated fitness.
pub fn run_sa(config: &OptimizerConfig, objective: &dyn Objective) -> Result<RunReport> {
    config.validate()?;
    let AlgorithmConfig::Sa(cfg) = &config.algorithm else {
        return Err(Error::config(format!("{} is not an SA config", config.algorithm.name())));
    };
    let bounds = config.bounds()?;
    let mut tracker = Tracker::new(objective, config.stall_evaluations);

    let mut rng = rng::stream(config.seed, 0);
    let x0 = bounds.sample(&mut rng);
    let f0 = tracker.evaluate(std::slice::from_ref(&x0))[0];
    let mut current = (x0, f0);
    let mut accepted_worse = 0u64;
    let mut stopped = tracker.end_step();

    for k in 1..=cfg.iterations {
        if stopped {
            break;
        }
        let t = sa_schedule(cfg.schedule, cfg.t0, k)?;
        let mut rng = rng::step_stream(config.seed, k as u64, 0);
        let best_e = -tracker.best_f;
        let candidate = sa_propose(&tracker.best_x, t, bounds, &mut rng);
        let f = tracker.evaluate(std::slice::from_ref(&candidate))[0];
        let delta_e = -f - best_e;
        if delta_e < 0.0 {
            current = (candidate, f);
        } else if sa_accept(delta_e, t, &mut rng) {
            accepted_worse += 1;
            current = (candidate, f);
        }
        stopped = tracker.end_step() && k < cfg.iterations;
    }
    log::debug!("sa finished at current fitness {}", current.1);
    if cfg.final_evaluation {
        let best = tracker.best_x.clone();
        tracker.evaluate(std::slice::from_ref(&best));
    }
    Ok(tracker.finish(config, stopped, Some(accepted_worse)))
}
