//! Binary- and real-coded genetic algorithms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{best_index, AlgorithmConfig, Bounds, Objective, OptimizerConfig, RunReport, Tracker};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    NormalizedGeometricRanking,
    Tournament,
}

/// How `generations` relates to the number of evaluated populations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingConvention {
    /// Initial population, then `generations` bred populations:
    /// `P·(generations + 1)` evaluations.
    #[default]
    InitialSeparate,
    /// The initial population is generation 1: `P·generations` evaluations.
    InitialIsFirstGeneration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub selection: Selection,
    /// Probability of picking the best individual under ranking.
    pub q: f64,
    pub tournament_size: usize,
    /// Per-bit flip probability (binary) or per-child probability of one
    /// non-uniform mutation (real). Defaults to 0.05 / 0.1 when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_mutation: Option<f64>,
    pub p_crossover: f64,
    pub bits_per_gene: u32,
    /// Shape of the non-uniform mutation decay.
    pub shape_b: f64,
    pub elitism: bool,
    pub counting: CountingConvention,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 30,
            generations: 25,
            selection: Selection::default(),
            q: 0.08,
            tournament_size: 3,
            p_mutation: None,
            p_crossover: 0.7,
            bits_per_gene: 8,
            shape_b: 3.0,
            elitism: true,
            counting: CountingConvention::default(),
        }
    }
}

pub const DEFAULT_BINARY_MUTATION: f64 = 0.05;
pub const DEFAULT_REAL_MUTATION: f64 = 0.1;

impl GaConfig {
    pub fn mutation_rate(&self, binary: bool) -> f64 {
        self.p_mutation.unwrap_or(if binary {
            DEFAULT_BINARY_MUTATION
        } else {
            DEFAULT_REAL_MUTATION
        })
    }

    pub fn validate(&self, binary: bool) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::config("population_size must be at least 2"));
        }
        if self.generations < 1 {
            return Err(Error::config("generations must be at least 1"));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::config(format!("q must be in (0, 1), got {}", self.q)));
        }
        if self.tournament_size < 2 {
            return Err(Error::config("tournament_size must be at least 2"));
        }
        let pm = self.mutation_rate(binary);
        if !(0.0..=1.0).contains(&pm) || !(0.0..=1.0).contains(&self.p_crossover) {
            return Err(Error::config("mutation and crossover probabilities must be in [0, 1]"));
        }
        if binary && !(1..=32).contains(&self.bits_per_gene) {
            return Err(Error::config("bits_per_gene must be in 1..=32"));
        }
        if !(self.shape_b > 0.0) || !self.shape_b.is_finite() {
            return Err(Error::config("shape_b must be a positive number"));
        }
        Ok(())
    }

    /// Bred generations after the initial population.
    fn breeding_steps(&self) -> usize {
        match self.counting {
            CountingConvention::InitialSeparate => self.generations,
            CountingConvention::InitialIsFirstGeneration => self.generations - 1,
        }
    }
}

/// Selection probabilities by rank (best first), normalized geometric form.
pub fn geometric_ranking_probabilities(q: f64, population: usize) -> Result<Vec<f64>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q must be in (0, 1), got {q}")));
    }
    if population == 0 {
        return Err(Error::domain("population must be at least 1"));
    }
    // 1 − (1 − q)^P without cancellation for small q.
    let qn = q / -(population as f64 * (-q).ln_1p()).exp_m1();
    Ok((0..population)
        .map(|r| qn * (1.0 - q).powi(r as i32))
        .collect())
}

/// Ranks population by fitness then samples `count` parents by rank.
fn ranking_select(fitness: &[f64], q: f64, count: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let probs = geometric_ranking_probabilities(q, fitness.len())?;
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    // Stable: equal fitness keeps the lower index ahead.
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    Ok((0..count)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            let r = cumulative.partition_point(|c| *c <= u).min(order.len() - 1);
            order[r]
        })
        .collect())
}

/// Index of the fittest of `size` uniform draws with replacement.
/// Ties go to the lowest index.
pub fn tournament_select(fitness: &[f64], size: usize, rng: &mut impl Rng) -> Result<usize> {
    if fitness.is_empty() {
        return Err(Error::domain("tournament over an empty population"));
    }
    if size == 0 {
        return Err(Error::domain("tournament size must be at least 1"));
    }
    let mut winner = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c] > fitness[winner] || (fitness[c] == fitness[winner] && c < winner) {
            winner = c;
        }
    }
    Ok(winner)
}

/// Flip every bit independently with probability `p_m`.
pub fn binary_mutation(bits: &[bool], p_m: f64, rng: &mut impl Rng) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&p_m) {
        return Err(Error::domain(format!("mutation probability {p_m} outside [0, 1]")));
    }
    Ok(bits.iter().map(|&b| b ^ (rng.gen::<f64>() < p_m)).collect())
}

/// Single-point crossover at a fixed 1-based cut `r`: positions `i < r`
/// keep their parent, the rest swap.
pub fn simple_crossover_at(x: &[bool], y: &[bool], r: usize) -> Result<(Vec<bool>, Vec<bool>)> {
    if x.len() != y.len() {
        return Err(Error::domain("crossover parents differ in length"));
    }
    if r < 1 || r > x.len() {
        return Err(Error::domain(format!("cut {r} outside 1..={}", x.len())));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    // Positions are 1-based: index i (0-based) is position i + 1.
    for i in (r - 1)..x.len() {
        a[i] = y[i];
        b[i] = x[i];
    }
    Ok((a, b))
}

/// Single-point crossover with the cut uniform on `1..=m`.
pub fn simple_crossover(x: &[bool], y: &[bool], rng: &mut impl Rng) -> Result<(Vec<bool>, Vec<bool>)> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::domain("crossover parents must be non-empty and equal length"));
    }
    let r = rng.gen_range(1..=x.len());
    simple_crossover_at(x, y, r)
}

/// `X' = rX + (1−r)Y`, `Y' = (1−r)X + rY` for a given `r`.
pub fn arithmetic_crossover_with(x: &[f64], y: &[f64], r: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::domain("crossover parents differ in dimension"));
    }
    let a = x.iter().zip(y).map(|(a, b)| r * a + (1.0 - r) * b).collect();
    let b = x.iter().zip(y).map(|(a, b)| (1.0 - r) * a + r * b).collect();
    Ok((a, b))
}

pub fn arithmetic_crossover(x: &[f64], y: &[f64], rng: &mut impl Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    arithmetic_crossover_with(x, y, rng.gen::<f64>())
}

/// `f(G) = (r2 · (1 − G/G_max))^b`.
pub fn nonuniform_decay(r2: f64, generation: usize, max_generation: usize, b: f64) -> f64 {
    (r2 * (1.0 - generation as f64 / max_generation as f64)).powf(b)
}

/// Non-uniform mutation of gene `j` with pinned draws `r1`, `r2`.
pub fn nonuniform_mutation_with(
    x: &[f64],
    bounds: &Bounds,
    j: usize,
    r1: f64,
    r2: f64,
    generation: usize,
    max_generation: usize,
    b: f64,
) -> Result<Vec<f64>> {
    if generation > max_generation || max_generation == 0 {
        return Err(Error::domain(format!(
            "generation {generation} beyond maximum {max_generation}"
        )));
    }
    if x.len() != bounds.dim() || j >= x.len() {
        return Err(Error::domain("gene index or dimension does not match bounds"));
    }
    let f = nonuniform_decay(r2, generation, max_generation, b);
    let mut out = x.to_vec();
    out[j] = if r1 < 0.5 {
        x[j] + (bounds.hi(j) - x[j]) * f
    } else {
        x[j] - (x[j] - bounds.lo(j)) * f
    };
    out[j] = out[j].clamp(bounds.lo(j), bounds.hi(j));
    Ok(out)
}

/// Perturb one uniformly chosen gene toward a random end of its range.
pub fn nonuniform_mutation(
    x: &[f64],
    bounds: &Bounds,
    generation: usize,
    max_generation: usize,
    b: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::domain("cannot mutate an empty chromosome"));
    }
    let j = rng.gen_range(0..x.len());
    let r1 = rng.gen::<f64>();
    let r2 = rng.gen::<f64>();
    nonuniform_mutation_with(x, bounds, j, r1, r2, generation, max_generation, b)
}

/// Bits per gene, most significant first, over each dimension's range.
pub struct BinaryCoding {
    bits: u32,
    bounds: Bounds,
}

impl BinaryCoding {
    pub fn new(bounds: Bounds, bits: u32) -> Result<Self> {
        if !(1..=32).contains(&bits) {
            return Err(Error::domain("bits per gene must be in 1..=32"));
        }
        Ok(Self { bits, bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.dim() * self.bits as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn levels(&self) -> f64 {
        ((1u64 << self.bits) - 1) as f64
    }

    pub fn decode(&self, bits: &[bool]) -> Vec<f64> {
        bits.chunks(self.bits as usize)
            .enumerate()
            .map(|(d, gene)| {
                let v = gene.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
                self.bounds.lo(d) + self.bounds.width(d) * v as f64 / self.levels()
            })
            .collect()
    }

    /// Nearest code for each value.
    pub fn encode(&self, x: &[f64]) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.len());
        for (d, v) in x.iter().enumerate() {
            let t = ((v - self.bounds.lo(d)) / self.bounds.width(d)).clamp(0.0, 1.0);
            let code = (t * self.levels()).round() as u64;
            for k in (0..self.bits).rev() {
                out.push((code >> k) & 1 == 1);
            }
        }
        out
    }
}

#[derive(Clone)]
enum Genome {
    Bits(Vec<bool>),
    Real(Vec<f64>),
}

struct Engine<'a> {
    cfg: &'a GaConfig,
    bounds: &'a Bounds,
    coding: Option<BinaryCoding>,
    p_mutation: f64,
}

impl Engine<'_> {
    fn phenotype(&self, g: &Genome) -> Vec<f64> {
        match (g, &self.coding) {
            (Genome::Bits(b), Some(c)) => c.decode(b),
            (Genome::Real(x), _) => x.clone(),
            (Genome::Bits(_), None) => unreachable!("bit genome without a coding"),
        }
    }

    fn random(&self, rng: &mut impl Rng) -> Genome {
        match &self.coding {
            Some(c) => Genome::Bits((0..c.len()).map(|_| rng.gen::<bool>()).collect()),
            None => Genome::Real(self.bounds.sample(rng)),
        }
    }

    fn select(&self, fitness: &[f64], rng: &mut impl Rng) -> Result<Vec<usize>> {
        let n = fitness.len();
        match self.cfg.selection {
            Selection::NormalizedGeometricRanking => ranking_select(fitness, self.cfg.q, n, rng),
            Selection::Tournament => (0..n)
                .map(|_| tournament_select(fitness, self.cfg.tournament_size, rng))
                .collect(),
        }
    }

    fn cross(&self, a: &Genome, b: &Genome, rng: &mut impl Rng) -> Result<(Genome, Genome)> {
        Ok(match (a, b) {
            (Genome::Bits(x), Genome::Bits(y)) => {
                let (p, q) = simple_crossover(x, y, rng)?;
                (Genome::Bits(p), Genome::Bits(q))
            }
            (Genome::Real(x), Genome::Real(y)) => {
                let (p, q) = arithmetic_crossover(x, y, rng)?;
                (Genome::Real(p), Genome::Real(q))
            }
            _ => return Err(Error::Internal("mixed genome kinds".into())),
        })
    }

    fn mutate(&self, g: Genome, generation: usize, max_generation: usize, rng: &mut impl Rng) -> Result<Genome> {
        Ok(match g {
            Genome::Bits(b) => Genome::Bits(binary_mutation(&b, self.p_mutation, rng)?),
            Genome::Real(x) => {
                if rng.gen::<f64>() < self.p_mutation {
                    Genome::Real(nonuniform_mutation(
                        &x,
                        self.bounds,
                        generation,
                        max_generation,
                        self.cfg.shape_b,
                        rng,
                    )?)
                } else {
                    Genome::Real(x)
                }
            }
        })
    }

    fn breed(
        &self,
        population: &[Genome],
        fitness: &[f64],
        elite: &Genome,
        generation: usize,
        max_generation: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<Genome>> {
        let parents = self.select(fitness, rng)?;
        let mut next = Vec::with_capacity(population.len());
        for pair in parents.chunks(2) {
            match pair {
                [i, j] => {
                    let (a, b) = (&population[*i], &population[*j]);
                    if rng.gen::<f64>() < self.cfg.p_crossover {
                        let (c, d) = self.cross(a, b, rng)?;
                        next.push(c);
                        next.push(d);
                    } else {
                        next.push(a.clone());
                        next.push(b.clone());
                    }
                }
                [i] => next.push(population[*i].clone()),
                _ => unreachable!(),
            }
        }
        let mut next = next
            .into_iter()
            .map(|g| self.mutate(g, generation, max_generation, rng))
            .collect::<Result<Vec<_>>>()?;
        if self.cfg.elitism {
            next[0] = elite.clone();
        }
        Ok(next)
    }
}

/// Elitist generational GA; binary or real coding per the config.
pub fn run_ga(config: &OptimizerConfig, objective: &dyn Objective) -> Result<RunReport> {
    config.validate()?;
    let (cfg, binary) = match &config.algorithm {
        AlgorithmConfig::GaBinary(c) => (c, true),
        AlgorithmConfig::GaReal(c) => (c, false),
        other => return Err(Error::config(format!("{} is not a GA config", other.name()))),
    };
    let bounds = config.bounds()?;
    let engine = Engine {
        cfg,
        bounds,
        coding: if binary {
            Some(BinaryCoding::new(bounds.clone(), cfg.bits_per_gene)?)
        } else {
            None
        },
        p_mutation: cfg.mutation_rate(binary),
    };

    let mut tracker = Tracker::new(objective, config.stall_evaluations);
    let mut init_rng = rng::stream(config.seed, 0);
    let mut population: Vec<Genome> = (0..cfg.population_size)
        .map(|_| engine.random(&mut init_rng))
        .collect();
    let xs: Vec<Vec<f64>> = population.iter().map(|g| engine.phenotype(g)).collect();
    let mut fitness = tracker.evaluate(&xs);
    let mut elite = population[best_index(&fitness)].clone();
    let mut stopped = tracker.end_step();

    let steps = cfg.breeding_steps();
    for generation in 1..=steps {
        if stopped {
            break;
        }
        let mut rng = rng::step_stream(config.seed, generation as u64, 0);
        population = engine.breed(&population, &fitness, &elite, generation, steps, &mut rng)?;
        let xs: Vec<Vec<f64>> = population.iter().map(|g| engine.phenotype(g)).collect();
        let before = tracker.best_f;
        fitness = tracker.evaluate(&xs);
        let i = best_index(&fitness);
        if fitness[i] > before {
            elite = population[i].clone();
        }
        stopped = tracker.end_step() && generation < steps;
    }
    Ok(tracker.finish(config, stopped, None))
}
