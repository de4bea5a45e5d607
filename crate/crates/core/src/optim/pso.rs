//! Particle swarm with linearly decaying inertia.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AlgorithmConfig, Bounds, Objective, OptimizerConfig, RunReport, Tracker};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub inertia_start: f64,
    pub inertia_end: f64,
    /// Per-dimension speed limit as a fraction of the bound width.
    pub v_max_fraction: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            iterations: 25,
            c1: 2.0,
            c2: 2.0,
            inertia_start: 0.9,
            inertia_end: 0.0,
            v_max_fraction: 0.5,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::config("swarm_size must be at least 2"));
        }
        if self.iterations < 1 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::config("c1 and c2 must be non-negative"));
        }
        if !(self.inertia_start.is_finite() && self.inertia_end.is_finite()) {
            return Err(Error::config("inertia must be finite"));
        }
        if !(self.v_max_fraction > 0.0) {
            return Err(Error::config("v_max_fraction must be positive"));
        }
        Ok(())
    }

    /// Inertia for iteration `t` in `1..=iterations`.
    pub fn inertia(&self, t: usize) -> f64 {
        if self.iterations <= 1 {
            return self.inertia_start;
        }
        let frac = (t - 1) as f64 / (self.iterations - 1) as f64;
        self.inertia_start + (self.inertia_end - self.inertia_start) * frac
    }
}

/// Velocity and position update with pinned draws `r1`, `r2` (one per
/// dimension per term). No clamping.
#[allow(clippy::too_many_arguments)]
pub fn pso_step(
    x: &[f64],
    v: &[f64],
    personal: &[f64],
    global: &[f64],
    omega: f64,
    c1: f64,
    c2: f64,
    r1: &[f64],
    r2: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let v_new: Vec<f64> = (0..x.len())
        .map(|d| omega * v[d] + c1 * r1[d] * (personal[d] - x[d]) + c2 * r2[d] * (global[d] - x[d]))
        .collect();
    let x_new = x.iter().zip(&v_new).map(|(a, b)| a + b).collect();
    (v_new, x_new)
}

/// Full particle update: draw, step, limit speed, clamp position and stop
/// the velocity on any clamped dimension.
#[allow(clippy::too_many_arguments)]
pub fn pso_update(
    x: &[f64],
    v: &[f64],
    personal: &[f64],
    global: &[f64],
    omega: f64,
    c1: f64,
    c2: f64,
    v_max: &[f64],
    bounds: &Bounds,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = x.len();
    if [v.len(), personal.len(), global.len(), v_max.len(), bounds.dim()]
        .iter()
        .any(|&n| n != d)
    {
        return Err(Error::domain("particle vectors differ in dimension"));
    }
    let r1: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
    let r2: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
    let (mut v_new, _) = pso_step(x, v, personal, global, omega, c1, c2, &r1, &r2);
    for (vi, m) in v_new.iter_mut().zip(v_max) {
        *vi = vi.clamp(-m, *m);
    }
    let mut x_new: Vec<f64> = x.iter().zip(&v_new).map(|(a, b)| a + b).collect();
    for k in 0..d {
        let c = x_new[k].clamp(bounds.lo(k), bounds.hi(k));
        if c != x_new[k] {
            x_new[k] = c;
            v_new[k] = 0.0;
        }
    }
    Ok((v_new, x_new))
}

pub fn run_pso(config: &OptimizerConfig, objective: &dyn Objective) -> Result<RunReport> {
    run_pso_from(config, objective, None)
}

/// PSO starting from `initial` positions when given (velocities start at
/// zero either way).
pub fn run_pso_from(
    config: &OptimizerConfig,
    objective: &dyn Objective,
    initial: Option<Vec<Vec<f64>>>,
) -> Result<RunReport> {
    config.validate()?;
    let AlgorithmConfig::Pso(cfg) = &config.algorithm else {
        return Err(Error::config(format!("{} is not a PSO config", config.algorithm.name())));
    };
    let bounds = config.bounds()?;
    let dim = bounds.dim();
    let v_max: Vec<f64> = (0..dim).map(|d| cfg.v_max_fraction * bounds.width(d)).collect();

    let mut xs = match initial {
        Some(xs) => {
            if xs.len() != cfg.swarm_size || xs.iter().any(|x| !bounds.contains(x)) {
                return Err(Error::config("initial swarm must match swarm_size and lie within bounds"));
            }
            xs
        }
        None => {
            let mut rng = rng::stream(config.seed, 0);
            (0..cfg.swarm_size).map(|_| bounds.sample(&mut rng)).collect()
        }
    };
    let mut vs = vec![vec![0.0; dim]; cfg.swarm_size];

    let mut tracker = Tracker::new(objective, config.stall_evaluations);
    let fs = tracker.evaluate(&xs);
    let mut personal = xs.clone();
    let mut personal_f = fs;
    let mut stopped = tracker.end_step();

    for t in 1..=cfg.iterations {
        if stopped {
            break;
        }
        let omega = cfg.inertia(t);
        let global = tracker.best_x.clone();
        let mut rng = rng::step_stream(config.seed, t as u64, 0);
        for i in 0..cfg.swarm_size {
            let (v, x) = pso_update(
                &xs[i], &vs[i], &personal[i], &global, omega, cfg.c1, cfg.c2, &v_max, bounds, &mut rng,
            )?;
            vs[i] = v;
            xs[i] = x;
        }
        let fs = tracker.evaluate(&xs);
        for i in 0..cfg.swarm_size {
            if fs[i] > personal_f[i] {
                personal_f[i] = fs[i];
                personal[i] = xs[i].clone();
            }
        }
        stopped = tracker.end_step() && t < cfg.iterations;
    }
    Ok(tracker.finish(config, stopped, None))
}
