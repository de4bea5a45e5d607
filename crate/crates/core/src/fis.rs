//! First-order Sugeno inference systems seeded by subtractive clustering.
//!
//! Each cluster center becomes one rule with Gaussian antecedents of width
//! `σ_d = r_d / √8` (the clustering kernel `exp(-4 (Δ/r)²)` rewritten as
//! `exp(-Δ² / 2σ²)` on the unit input domain). All rules share one linear
//! least-squares fit per output bit over firing-strength-weighted
//! regressors.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::{EncodedSample, InteractionLabels, TargetLayout};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::subclust::{subclust_with, ClusterParams, RadiusVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub center: Vec<f64>,
    pub sigma: Vec<f64>,
    /// One row per output bit: `D` input weights followed by the bias.
    pub consequent: Vec<Vec<f64>>,
}

impl FuzzyRule {
    fn log_strength(&self, x: &[f64]) -> f64 {
        -x.iter()
            .zip(&self.center)
            .zip(&self.sigma)
            .map(|((xi, c), s)| {
                let t = (xi - c) / s;
                0.5 * t * t
            })
            .sum::<f64>()
    }

    /// Firing strength `Π_d exp(-(x_d - c_d)² / 2σ_d²)`.
    pub fn strength(&self, x: &[f64]) -> f64 {
        self.log_strength(x).exp()
    }

    /// Linear consequent of output `bit` at `x`.
    pub fn consequent_at(&self, bit: usize, x: &[f64]) -> f64 {
        let row = &self.consequent[bit];
        let (weights, bias) = row.split_at(x.len());
        weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + bias[0]
    }
}

pub const FIS_FORMAT: &str = "fisopt-fis/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SugenoFis {
    pub format: String,
    pub input_dim: usize,
    pub layout: TargetLayout,
    pub rules: Vec<FuzzyRule>,
}

/// What happened while fitting consequents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildLog {
    pub rules: usize,
    /// Non-zero regressor columns passed to the solver.
    pub regressors: usize,
    pub rank: usize,
    /// Set when the minimum-norm solution was needed.
    pub rank_deficient: bool,
    /// Training rows where every rule's strength underflowed.
    pub underflow_rows: usize,
}

/// Normalized firing strengths, or `None` when every strength underflows.
fn normalized_strengths(rules: &[FuzzyRule], x: &[f64]) -> (Vec<f64>, bool) {
    let logs: Vec<f64> = rules.iter().map(|r| r.log_strength(x)).collect();
    let (nearest, top) = logs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &l)| if l > best.1 { (k, l) } else { best });
    if top.exp() == 0.0 {
        let mut w = vec![0.0; rules.len()];
        w[nearest] = 1.0;
        return (w, true);
    }
    // w_k / Σ w, evaluated relative to the strongest rule.
    let mut w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (w, false)
}

impl SugenoFis {
    pub fn output_bits(&self) -> usize {
        self.layout.width()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::domain(format!(
                "input has {} values, system expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Raw defuzzified output per target bit.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (w, underflow) = normalized_strengths(&self.rules, x);
        if underflow {
            log::debug!("all firing strengths underflowed; using the nearest rule");
        }
        let mut out = vec![0.0; self.output_bits()];
        for (rule, wk) in self.rules.iter().zip(&w) {
            if *wk == 0.0 {
                continue;
            }
            for (bit, o) in out.iter_mut().enumerate() {
                *o += wk * rule.consequent_at(bit, x);
            }
        }
        Ok(out)
    }

    /// Argmax class per output group.
    pub fn classify_indices(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.layout.decode_argmax(&self.infer(x)?)
    }

    /// Decode into the standard interaction labels.
    pub fn classify(&self, x: &[f64]) -> Result<InteractionLabels> {
        if self.layout != TargetLayout::standard() {
            return Err(Error::data("classify needs the standard target layout"));
        }
        InteractionLabels::from_class_indices(&self.classify_indices(x)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != FIS_FORMAT {
            return Err(Error::data(format!("unsupported FIS format '{}'", self.format)));
        }
        if self.rules.is_empty() {
            return Err(Error::data("a FIS needs at least one rule"));
        }
        for rule in &self.rules {
            if rule.center.len() != self.input_dim || rule.sigma.len() != self.input_dim {
                return Err(Error::data("rule dimension does not match the FIS"));
            }
            if rule.sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::data("rule widths must be > 0"));
            }
            if rule.consequent.len() != self.output_bits()
                || rule.consequent.iter().any(|c| c.len() != self.input_dim + 1)
            {
                return Err(Error::data("rule consequent shape does not match the layout"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let fis: SugenoFis =
            serde_json::from_str(text).map_err(|e| Error::data(format!("FIS json: {e}")))?;
        fis.validate()?;
        Ok(fis)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json()?)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }
}

/// Build with the default clustering parameters.
pub fn build_fis(
    train: &[EncodedSample],
    layout: &TargetLayout,
    radii: &RadiusVector,
) -> Result<SugenoFis> {
    build_fis_with(train, layout, radii, ClusterParams::default()).map(|(fis, _)| fis)
}

pub fn build_fis_with(
    train: &[EncodedSample],
    layout: &TargetLayout,
    radii: &RadiusVector,
    params: ClusterParams,
) -> Result<(SugenoFis, BuildLog)> {
    if train.len() < 2 {
        return Err(Error::domain("building a FIS needs at least 2 training samples"));
    }
    let dim = radii.dim();
    let bits = layout.width();
    for s in train {
        if s.inputs.len() != dim {
            return Err(Error::data(format!(
                "sample has {} inputs but {dim} radii were given",
                s.inputs.len()
            )));
        }
        if s.targets.len() != bits {
            return Err(Error::data("sample targets do not match the layout"));
        }
    }

    let points: Vec<&[f64]> = train.iter().map(|s| s.inputs.as_slice()).collect();
    let clusters = subclust_with(&points, radii, params)?;
    let sigma: Vec<f64> = radii
        .as_slice()
        .iter()
        .map(|r| r / 8f64.sqrt())
        .collect();
    let mut rules: Vec<FuzzyRule> = clusters
        .centers
        .into_iter()
        .map(|center| FuzzyRule {
            center,
            sigma: sigma.clone(),
            consequent: Vec::new(),
        })
        .collect();

    let (coefficients, mut log) = fit_consequents(&rules, train, dim, bits)?;
    let stride = dim + 1;
    for (k, rule) in rules.iter_mut().enumerate() {
        rule.consequent = (0..bits)
            .map(|b| (0..stride).map(|j| coefficients[(k * stride + j, b)]).collect())
            .collect();
    }
    log.rules = rules.len();
    if log.rank_deficient {
        log::debug!(
            "rank-deficient consequent fit ({} of {} regressors); using the minimum-norm solution",
            log.rank,
            log.regressors
        );
    }
    Ok((
        SugenoFis {
            format: FIS_FORMAT.to_string(),
            input_dim: dim,
            layout: layout.clone(),
            rules,
        },
        log,
    ))
}

/// Minimum-norm least squares for all consequent coefficients at once.
///
/// Columns that are identically zero carry no information and get a zero
/// coefficient in the minimum-norm solution, so they are dropped before the
/// SVD to keep the factorization small.
fn fit_consequents(
    rules: &[FuzzyRule],
    train: &[EncodedSample],
    dim: usize,
    bits: usize,
) -> Result<(DMatrix<f64>, BuildLog)> {
    let n = train.len();
    let stride = dim + 1;
    let p = rules.len() * stride;
    let mut log = BuildLog::default();

    let mut design = vec![0.0; n * p];
    for (i, s) in train.iter().enumerate() {
        let (w, underflow) = normalized_strengths(rules, &s.inputs);
        if underflow {
            log.underflow_rows += 1;
        }
        let row = &mut design[i * p..(i + 1) * p];
        for (k, wk) in w.iter().enumerate() {
            if *wk == 0.0 {
                continue;
            }
            let block = &mut row[k * stride..(k + 1) * stride];
            for (b, x) in block.iter_mut().zip(&s.inputs) {
                *b = wk * x;
            }
            block[dim] = *wk;
        }
    }

    let live: Vec<usize> = (0..p)
        .filter(|&j| (0..n).any(|i| design[i * p + j] != 0.0))
        .collect();
    log.regressors = live.len();
    let a = DMatrix::from_fn(n, live.len(), |i, j| design[i * p + live[j]]);
    let y = DMatrix::from_fn(n, bits, |i, b| train[i].targets[b]);

    let m = live.len();
    let solved = min_norm_solve(&a, &y, &mut log)?;
    debug_assert_eq!(solved.nrows(), m);

    let mut coefficients = DMatrix::zeros(p, bits);
    for (j, &col) in live.iter().enumerate() {
        for b in 0..bits {
            coefficients[(col, b)] = solved[(j, b)];
        }
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Internal("least squares produced non-finite coefficients".into()));
    }
    Ok((coefficients, log))
}

/// Minimum-norm least squares through the normal equations of the
/// column-equilibrated system and a symmetric eigendecomposition.
/// Eigenvalues below `λ_max · max(n, p) · ε` are treated as zero.
fn min_norm_solve(a: &DMatrix<f64>, y: &DMatrix<f64>, log: &mut BuildLog) -> Result<DMatrix<f64>> {
    let (n, p) = a.shape();
    // Columns too small to square without underflow carry no signal.
    let scale: Vec<f64> = a
        .column_iter()
        .map(|c| {
            let norm = c.norm();
            if norm > 1e-150 {
                1.0 / norm
            } else {
                0.0
            }
        })
        .collect();
    let mut a = a.clone();
    for (mut c, s) in a.column_iter_mut().zip(&scale) {
        c *= *s;
    }
    let ata = a.tr_mul(&a);
    let aty = a.tr_mul(y);
    let eig = SymmetricEigen::new(ata);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = max * (n.max(p) as f64) * f64::EPSILON;
    let inv: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > tol { 1.0 / l } else { 0.0 })
        .collect();
    log.rank = inv.iter().filter(|v| **v != 0.0).count();
    log.rank_deficient = log.rank < p;
    let v = &eig.eigenvectors;
    let mut proj = v.tr_mul(&aty);
    for (mut row, s) in proj.row_iter_mut().zip(&inv) {
        row *= *s;
    }
    let mut x = v * proj;
    for (mut row, s) in x.row_iter_mut().zip(&scale) {
        row *= *s;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample(inputs: Vec<f64>, targets: Vec<f64>) -> EncodedSample {
        EncodedSample { inputs, targets }
    }

    fn random_rule<R: Rng>(rng: &mut R, dim: usize, bits: usize) -> FuzzyRule {
        FuzzyRule {
            center: (0..dim).map(|_| rng.gen()).collect(),
            sigma: (0..dim).map(|_| rng.gen_range(0.05..0.5)).collect(),
            consequent: (0..bits)
                .map(|_| (0..=dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect(),
        }
    }

    fn fis_of(rules: Vec<FuzzyRule>, dim: usize, layout: TargetLayout) -> SugenoFis {
        SugenoFis {
            format: FIS_FORMAT.into(),
            input_dim: dim,
            layout,
            rules,
        }
    }

    #[test]
    fn constant_targets_fit_as_bias() {
        let mut rng = crate::rng::stream(1, 0);
        let train: Vec<EncodedSample> = (0..30)
            .map(|_| sample(vec![rng.gen(), rng.gen()], vec![0.7]))
            .collect();
        let layout = TargetLayout::from_sizes(&[1]);
        let (fis, log) =
            build_fis_with(&train, &layout, &RadiusVector::uniform(2, 1e3).unwrap(), ClusterParams::default())
                .unwrap();
        assert_eq!(log.rules, 1);
        let c = &fis.rules[0].consequent[0];
        assert!((c[2] - 0.7).abs() < 1e-8);
        assert!(c[0].abs() < 1e-8 && c[1].abs() < 1e-8);
        for s in &train {
            assert!((fis.infer(&s.inputs).unwrap()[0] - 0.7).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_targets_recovered_exactly() {
        let mut rng = crate::rng::stream(2, 0);
        let train: Vec<EncodedSample> = (0..40)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
                let t = vec![0.3 + 2.0 * x[0] - x[1] + 0.5 * x[2], -1.0 + x[2]];
                sample(x, t)
            })
            .collect();
        let layout = TargetLayout::from_sizes(&[2]);
        let fis = build_fis(&train, &layout, &RadiusVector::uniform(3, 50.0).unwrap()).unwrap();
        assert_eq!(fis.rules.len(), 1);
        for s in &train {
            let out = fis.infer(&s.inputs).unwrap();
            for (o, t) in out.iter().zip(&s.targets) {
                assert!((o - t).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn blobs_get_their_own_rules() {
        let mut rng = crate::rng::stream(3, 0);
        let train: Vec<EncodedSample> = (0..60)
            .map(|i| {
                let (c, t) = if i % 2 == 0 { (0.2, vec![1.0, 0.0]) } else { (0.8, vec![0.0, 1.0]) };
                sample(
                    vec![c + rng.gen_range(-0.05..0.05), c + rng.gen_range(-0.05..0.05)],
                    t,
                )
            })
            .collect();
        let layout = TargetLayout::from_sizes(&[2]);
        let fis = build_fis(&train, &layout, &RadiusVector::uniform(2, 0.3).unwrap()).unwrap();
        assert_eq!(fis.rules.len(), 2);
        for s in &train {
            let want = layout.decode_one_hot(&s.targets).unwrap();
            assert_eq!(fis.classify_indices(&s.inputs).unwrap(), want);
        }
    }

    #[test]
    fn center_of_single_rule_returns_its_consequent() {
        let mut rng = crate::rng::stream(4, 0);
        let rule = random_rule(&mut rng, 3, 2);
        let center = rule.center.clone();
        let want: Vec<f64> = (0..2).map(|b| rule.consequent_at(b, &center)).collect();
        let fis = fis_of(vec![rule], 3, TargetLayout::from_sizes(&[2]));
        assert_eq!(fis.infer(&center).unwrap(), want);
    }

    #[test]
    fn symmetric_rules_average() {
        let mk = |c: f64, v: f64| FuzzyRule {
            center: vec![c],
            sigma: vec![0.2],
            consequent: vec![vec![0.0, v]],
        };
        let fis = fis_of(vec![mk(0.3, 1.0), mk(0.7, 4.0)], 1, TargetLayout::from_sizes(&[1]));
        let out = fis.infer(&[0.5]).unwrap()[0];
        assert!((out - 2.5).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_weighted_average() {
        let mut rng = crate::rng::stream(5, 0);
        let dim = 4;
        let rules: Vec<FuzzyRule> = (0..3).map(|_| random_rule(&mut rng, dim, 3)).collect();
        let fis = fis_of(rules.clone(), dim, TargetLayout::from_sizes(&[3]));
        for _ in 0..20 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
            let got = fis.infer(&x).unwrap();
            // Σ_k w_k f_k(x) / Σ_k w_k written out longhand.
            for b in 0..3 {
                let mut num = 0.0;
                let mut den = 0.0;
                for r in &rules {
                    let mut w = 1.0;
                    for d in 0..dim {
                        w *= (-(x[d] - r.center[d]).powi(2) / (2.0 * r.sigma[d].powi(2))).exp();
                    }
                    let mut f = r.consequent[b][dim];
                    for d in 0..dim {
                        f += r.consequent[b][d] * x[d];
                    }
                    num += w * f;
                    den += w;
                }
                assert!((got[b] - num / den).abs() < 1e-9 * (1.0 + (num / den).abs()));
            }
        }
    }

    #[test]
    fn underflow_falls_back_to_nearest_rule() {
        let mk = |c: f64, v: f64| FuzzyRule {
            center: vec![c],
            sigma: vec![1e-3],
            consequent: vec![vec![0.0, v]],
        };
        let fis = fis_of(vec![mk(0.0, -1.0), mk(1.0, 5.0)], 1, TargetLayout::from_sizes(&[1]));
        assert_eq!(fis.rules[0].strength(&[0.6]), 0.0);
        assert_eq!(fis.infer(&[0.6]).unwrap(), vec![5.0]);
        assert_eq!(fis.infer(&[0.4]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = crate::rng::stream(6, 0);
        let rules: Vec<FuzzyRule> = (0..4).map(|_| random_rule(&mut rng, 5, 3)).collect();
        let fis = fis_of(rules, 5, TargetLayout::from_sizes(&[3]));
        let back = SugenoFis::from_json(&fis.to_json().unwrap()).unwrap();
        assert_eq!(back, fis);
        assert_eq!(back.to_json().unwrap(), fis.to_json().unwrap());
    }

    #[test]
    fn dimension_errors() {
        let fis = fis_of(
            vec![FuzzyRule {
                center: vec![0.0],
                sigma: vec![1.0],
                consequent: vec![vec![0.0, 0.0]],
            }],
            1,
            TargetLayout::from_sizes(&[1]),
        );
        assert!(fis.infer(&[0.0, 1.0]).is_err());
        let one = vec![sample(vec![0.0], vec![1.0])];
        assert!(build_fis(&one, &TargetLayout::from_sizes(&[1]), &RadiusVector::uniform(1, 0.5).unwrap()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn output_is_a_convex_combination(seed in 0u64..1000, xs in proptest::collection::vec(0.0..=1.0f64, 3)) {
                let mut rng = crate::rng::stream(seed, 0);
                let rules: Vec<FuzzyRule> = (0..3).map(|_| random_rule(&mut rng, 3, 2)).collect();
                let fis = fis_of(rules.clone(), 3, TargetLayout::from_sizes(&[2]));
                let out = fis.infer(&xs).unwrap();
                for (b, o) in out.iter().enumerate() {
                    prop_assert!(o.is_finite());
                    let vals: Vec<f64> = rules.iter().map(|r| r.consequent_at(b, &xs)).collect();
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(*o >= lo - 1e-9 && *o <= hi + 1e-9);
                }
            }

            #[test]
            fn argmax_ignores_positive_scaling(raw in proptest::collection::vec(-5.0..5.0f64, 7), scale in 0.01..100.0f64) {
                let layout = TargetLayout::from_sizes(&[4, 3]);
                let scaled: Vec<f64> = raw.iter().map(|v| v * scale).collect();
                prop_assert_eq!(layout.decode_argmax(&raw).unwrap(), layout.decode_argmax(&scaled).unwrap());
            }
        }
    }
}
