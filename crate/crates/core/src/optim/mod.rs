//! Metaheuristic engines over box-bounded real vectors.
//!
//! Every engine maximizes an [`Objective`]. Candidates of one generation are
//! evaluated in parallel; everything random happens on the calling thread
//! from streams keyed by `(seed, step)`, so a run is identical at any worker
//! count.

pub mod ga;
pub mod pso;
pub mod sa;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subclust::{RADIUS_MAX, RADIUS_MIN};

pub use ga::{CountingConvention, GaConfig, Selection};
pub use pso::PsoConfig;
pub use sa::{SaConfig, Schedule};

/// Something to maximize. Must be safe to call from several threads.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;

    /// Executions counted by the objective itself, if it keeps a counter.
    /// Engines prefer this over their own call count so memo hits are not
    /// billed.
    fn executions(&self) -> Option<u64> {
        None
    }
}

/// Wraps a closure and counts calls.
pub struct FnObjective<F> {
    f: F,
    calls: AtomicU64,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(x)
    }

    fn executions(&self) -> Option<u64> {
        Some(self.calls())
    }
}

/// Negated sphere, maximal (0) at the origin.
pub fn neg_sphere(x: &[f64]) -> f64 {
    -x.iter().map(|v| v * v).sum::<f64>()
}

/// Per-dimension `[lo, hi]` box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Bounds(Vec<[f64; 2]>);

impl TryFrom<Vec<[f64; 2]>> for Bounds {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Bounds::new(v)
    }
}

impl From<Bounds> for Vec<[f64; 2]> {
    fn from(b: Bounds) -> Self {
        b.0
    }
}

impl Bounds {
    pub fn new(v: Vec<[f64; 2]>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::config("bounds need at least one dimension"));
        }
        for (d, [lo, hi]) in v.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!(
                    "bounds for dimension {d} must be finite with lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Bounds(v))
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![[lo, hi]; dim])
    }

    /// The admissible cluster radius box.
    pub fn radius(dim: usize) -> Result<Self> {
        Self::uniform(dim, RADIUS_MIN, RADIUS_MAX)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn lo(&self, d: usize) -> f64 {
        self.0[d][0]
    }

    pub fn hi(&self, d: usize) -> f64 {
        self.0[d][1]
    }

    pub fn width(&self, d: usize) -> f64 {
        self.0[d][1] - self.0[d][0]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.0).all(|(v, [lo, hi])| v >= lo && v <= hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, [lo, hi]) in x.iter_mut().zip(&self.0) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.0.iter().map(|[lo, hi]| lo + (hi - lo) * rng.gen::<f64>()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmConfig {
    GaBinary(GaConfig),
    GaReal(GaConfig),
    Pso(PsoConfig),
    Sa(SaConfig),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::GaBinary(_) => "ga_binary",
            AlgorithmConfig::GaReal(_) => "ga_real",
            AlgorithmConfig::Pso(_) => "pso",
            AlgorithmConfig::Sa(_) => "sa",
        }
    }

    /// GA, PSO or SA.
    pub fn family(&self) -> &'static str {
        match self {
            AlgorithmConfig::GaBinary(_) | AlgorithmConfig::GaReal(_) => "GA",
            AlgorithmConfig::Pso(_) => "PSO",
            AlgorithmConfig::Sa(_) => "SA",
        }
    }

    /// Generations or iterations.
    pub fn budget(&self) -> usize {
        match self {
            AlgorithmConfig::GaBinary(c) | AlgorithmConfig::GaReal(c) => c.generations,
            AlgorithmConfig::Pso(c) => c.iterations,
            AlgorithmConfig::Sa(c) => c.iterations,
        }
    }

    /// Short human-readable parameter summary.
    pub fn params_label(&self) -> String {
        match self {
            AlgorithmConfig::GaBinary(c) | AlgorithmConfig::GaReal(c) => {
                let sel = match c.selection {
                    Selection::NormalizedGeometricRanking => format!("ranking q={}", c.q),
                    Selection::Tournament => format!("tournament k={}", c.tournament_size),
                };
                format!("pop={} gens={} {}", c.population_size, c.generations, sel)
            }
            AlgorithmConfig::Pso(c) => format!(
                "swarm={} iters={} c1={} c2={}",
                c.swarm_size, c.iterations, c.c1, c.c2
            ),
            AlgorithmConfig::Sa(c) => format!(
                "{} t0={} iters={}",
                c.schedule.name(),
                c.t0,
                c.iterations
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::GaBinary(c) => c.validate(true),
            AlgorithmConfig::GaReal(c) => c.validate(false),
            AlgorithmConfig::Pso(c) => c.validate(),
            AlgorithmConfig::Sa(c) => c.validate(),
        }
    }
}

/// One optimizer run: algorithm settings, search box and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub algorithm: AlgorithmConfig,
    /// Defaults to the radius box of the problem's dimension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    #[serde(default)]
    pub seed: u64,
    /// Stop once this many evaluations pass without a best-fitness gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stall_evaluations: Option<u64>,
}

impl OptimizerConfig {
    pub fn new(algorithm: AlgorithmConfig, bounds: Bounds, seed: u64) -> Self {
        Self {
            algorithm,
            bounds: Some(bounds),
            seed,
            stall_evaluations: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.algorithm.validate()?;
        if self.algorithm.budget() < 1 {
            return Err(Error::config("budget must be at least 1"));
        }
        if self.stall_evaluations == Some(0) {
            return Err(Error::config("stall_evaluations must be at least 1"));
        }
        Ok(())
    }

    /// Fill in the radius box if no bounds were given.
    pub fn with_default_bounds(mut self, dim: usize) -> Result<Self> {
        match &self.bounds {
            Some(b) if b.dim() != dim => {
                return Err(Error::config(format!(
                    "bounds have {} dimensions, problem has {dim}",
                    b.dim()
                )))
            }
            Some(_) => {}
            None => self.bounds = Some(Bounds::radius(dim)?),
        }
        Ok(self)
    }

    pub fn bounds(&self) -> Result<&Bounds> {
        self.bounds
            .as_ref()
            .ok_or_else(|| Error::config("optimizer config has no bounds"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub config: OptimizerConfig,
    pub seed: u64,
    pub best_radii: Vec<f64>,
    pub best_fitness: f64,
    pub evaluation_executions: u64,
    /// Best-so-far fitness after the initial evaluation and each step.
    pub history: Vec<f64>,
    #[serde(default)]
    pub stopped_early: bool,
    /// SA only: worse proposals taken as the current point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted_worse: Option<u64>,
    /// Not serialized so report files stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Run whichever engine the config names.
pub fn run(config: &OptimizerConfig, objective: &dyn Objective) -> Result<RunReport> {
    config.validate()?;
    match &config.algorithm {
        AlgorithmConfig::GaBinary(_) | AlgorithmConfig::GaReal(_) => ga::run_ga(config, objective),
        AlgorithmConfig::Pso(_) => pso::run_pso(config, objective),
        AlgorithmConfig::Sa(_) => sa::run_sa(config, objective),
    }
}

/// Non-finite fitness sorts below everything.
pub(crate) fn sanitize(f: f64) -> f64 {
    if f.is_nan() {
        f64::NEG_INFINITY
    } else {
        f
    }
}

pub(crate) fn evaluate_all(objective: &dyn Objective, xs: &[Vec<f64>]) -> Vec<f64> {
    xs.par_iter().map(|x| sanitize(objective.evaluate(x))).collect()
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn best_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Shared bookkeeping: call counts, best-so-far, history, stall detection.
pub(crate) struct Tracker<'a> {
    objective: &'a dyn Objective,
    start_executions: Option<u64>,
    started: Instant,
    calls: u64,
    last_gain_at: u64,
    stall: Option<u64>,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub history: Vec<f64>,
}

impl<'a> Tracker<'a> {
    pub fn new(objective: &'a dyn Objective, stall: Option<u64>) -> Self {
        Self {
            objective,
            start_executions: objective.executions(),
            started: Instant::now(),
            calls: 0,
            last_gain_at: 0,
            stall,
            best_x: Vec::new(),
            best_f: f64::NEG_INFINITY,
            history: Vec::new(),
        }
    }

    /// Evaluate a batch and fold it into the best-so-far.
    pub fn evaluate(&mut self, xs: &[Vec<f64>]) -> Vec<f64> {
        let fs = evaluate_all(self.objective, xs);
        self.calls += xs.len() as u64;
        let i = best_index(&fs);
        if self.best_x.is_empty() || fs[i] > self.best_f {
            self.best_f = fs[i];
            self.best_x = xs[i].clone();
            self.last_gain_at = self.calls;
        }
        fs
    }

    /// Close a step: record history, report whether the stall limit is hit.
    pub fn end_step(&mut self) -> bool {
        self.history.push(self.best_f);
        matches!(self.stall, Some(s) if self.calls - self.last_gain_at >= s)
    }

    pub fn finish(
        self,
        config: &OptimizerConfig,
        stopped_early: bool,
        accepted_worse: Option<u64>,
    ) -> RunReport {
        let executions = match (self.start_executions, self.objective.executions()) {
            (Some(a), Some(b)) => b - a,
            _ => self.calls,
        };
        RunReport {
            algorithm: config.algorithm.name().to_string(),
            config: config.clone(),
            seed: config.seed,
            best_radii: self.best_x,
            best_fitness: self.best_f,
            evaluation_executions: executions,
            history: self.history,
            stopped_early,
            accepted_worse,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![]).is_err());
        assert!(Bounds::new(vec![[1.0, 1.0]]).is_err());
        assert!(Bounds::new(vec![[0.0, f64::INFINITY]]).is_err());
        let b = Bounds::radius(3).unwrap();
        assert!(b.contains(&[0.05, 1.0, 0.5]));
        assert!(!b.contains(&[0.01, 1.0, 0.5]));
        assert!(serde_json::from_str::<Bounds>("[[2.0, 1.0]]").is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{"algorithm": "pso", "c1": 2.8, "c2": 1.3, "seed": 4}"#;
        let c = OptimizerConfig::from_json(text).unwrap();
        match &c.algorithm {
            AlgorithmConfig::Pso(p) => {
                assert_eq!((p.c1, p.c2, p.swarm_size, p.iterations), (2.8, 1.3, 30, 25))
            }
            other => panic!("{other:?}"),
        }
        let c = c.with_default_bounds(18).unwrap();
        let back: OptimizerConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(OptimizerConfig::from_json(r#"{"algorithm": "tabu"}"#).is_err());
        assert!(OptimizerConfig::from_json(r#"{"algorithm": "sa", "t0": 0}"#).is_err());
    }

    #[test]
    fn best_index_prefers_first() {
        assert_eq!(best_index(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(best_index(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
    }
}
