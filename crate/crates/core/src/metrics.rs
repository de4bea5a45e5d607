//! Confusion counts, the geometric accuracy score and the radius fitness.
//!
//! Counts are micro-aggregated over every one-hot bit of every group of
//! every sample.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::dataset::{EncodedSample, TargetLayout};
use crate::error::{Error, Result};
use crate::fis::{build_fis_with, SugenoFis};
use crate::optim::Objective;
use crate::subclust::{ClusterParams, RadiusVector, RADIUS_MAX, RADIUS_MIN};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    fn add_bit(&mut self, predicted: bool, target: bool) {
        match (predicted, target) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// A ratio that is defined as 0 (and flagged) when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Score {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Score {
                value: num as f64 / den as f64,
                degenerate: false,
            }
        }
    }
}

/// Confusion over per-group class indices under `layout`.
pub fn confusion(
    predicted: &[Vec<usize>],
    target: &[Vec<usize>],
    layout: &TargetLayout,
) -> Result<ConfusionCounts> {
    if predicted.is_empty() {
        return Err(Error::domain("confusion needs at least one prediction"));
    }
    if predicted.len() != target.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} targets",
            predicted.len(),
            target.len()
        )));
    }
    let sizes: Vec<usize> = layout.groups.iter().map(|g| g.classes.len()).collect();
    let mut c = ConfusionCounts::default();
    for (p, t) in predicted.iter().zip(target) {
        if p.len() != sizes.len() || t.len() != sizes.len() {
            return Err(Error::domain("prediction does not match the target layout"));
        }
        for ((&pc, &tc), &size) in p.iter().zip(t).zip(&sizes) {
            if pc >= size || tc >= size {
                return Err(Error::domain("class index outside its group"));
            }
            for class in 0..size {
                c.add_bit(pc == class, tc == class);
            }
        }
    }
    Ok(c)
}

/// `sqrt(TP·TN / ((TP + FN)(FP + TN)))`.
pub fn accuracy(c: &ConfusionCounts) -> Score {
    let pos = c.tp + c.fn_;
    let neg = c.fp + c.tn;
    if pos == 0 || neg == 0 {
        return Score {
            value: 0.0,
            degenerate: true,
        };
    }
    // Product of the two ratios; identical to √(sensitivity · specificity).
    let value = ((c.tp as f64 / pos as f64) * (c.tn as f64 / neg as f64)).sqrt();
    Score {
        value,
        degenerate: false,
    }
}

/// `TP / (TP + FN)`.
pub fn sensitivity(c: &ConfusionCounts) -> Score {
    Score::ratio(c.tp, c.tp + c.fn_)
}

/// `TN / (TN + FP)`.
pub fn specificity(c: &ConfusionCounts) -> Score {
    Score::ratio(c.tn, c.tn + c.fp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub counts: ConfusionCounts,
}

impl ClassifierMetrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        Self {
            accuracy: accuracy(&counts).value,
            sensitivity: sensitivity(&counts).value,
            specificity: specificity(&counts).value,
            counts,
        }
    }
}

/// Accuracy, sensitivity and specificity of `fis` on `samples`.
pub fn evaluate_classifier(fis: &SugenoFis, samples: &[EncodedSample]) -> Result<ClassifierMetrics> {
    if samples.is_empty() {
        return Err(Error::domain("cannot evaluate on an empty split"));
    }
    let mut predicted = Vec::with_capacity(samples.len());
    let mut target = Vec::with_capacity(samples.len());
    for s in samples {
        predicted.push(fis.classify_indices(&s.inputs)?);
        target.push(fis.layout.decode_one_hot(&s.targets)?);
    }
    Ok(ClassifierMetrics::from_counts(confusion(
        &predicted,
        &target,
        &fis.layout,
    )?))
}

/// Which held-out splits feed the fitness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    /// `min(validation accuracy, test accuracy)`.
    #[default]
    MinValidationTest,
    ValidationOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessOptions {
    pub mode: FitnessMode,
    /// Reuse results for radii equal to 12 decimal places.
    pub memoize: bool,
    pub cluster: ClusterParams,
    pub radius_min: f64,
    pub radius_max: f64,
}

impl Default for FitnessOptions {
    fn default() -> Self {
        Self {
            mode: FitnessMode::default(),
            memoize: false,
            cluster: ClusterParams::default(),
            radius_min: RADIUS_MIN,
            radius_max: RADIUS_MAX,
        }
    }
}

/// Fitness of one radius vector with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    pub fitness: f64,
    pub validation: ClassifierMetrics,
    pub test: ClassifierMetrics,
    pub rules: usize,
}

type MemoKey = Vec<i64>;

/// Train/validation/test views plus the evaluation counter.
///
/// Safe to share across threads. With memoization on, concurrent calls for
/// the same radii compute once and count once.
pub struct FitnessContext {
    train: Vec<EncodedSample>,
    validation: Vec<EncodedSample>,
    test: Vec<EncodedSample>,
    layout: TargetLayout,
    options: FitnessOptions,
    executions: AtomicU64,
    memo: Mutex<HashMap<MemoKey, Arc<OnceLock<f64>>>>,
}

impl FitnessContext {
    pub fn new(
        train: Vec<EncodedSample>,
        validation: Vec<EncodedSample>,
        test: Vec<EncodedSample>,
        layout: TargetLayout,
        options: FitnessOptions,
    ) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::domain("fitness needs at least 2 training samples"));
        }
        if validation.is_empty() {
            return Err(Error::domain("fitness needs a non-empty validation split"));
        }
        if options.mode == FitnessMode::MinValidationTest && test.is_empty() {
            return Err(Error::domain("fitness needs a non-empty test split"));
        }
        options.cluster.validate()?;
        Ok(Self {
            train,
            validation,
            test,
            layout,
            options,
            executions: AtomicU64::new(0),
            memo: Mutex::new(HashMap::new()),
        })
    }

    /// Context over the standard-layout splits of a dataset.
    pub fn from_dataset(dataset: &crate::dataset::Dataset, options: FitnessOptions) -> Result<Self> {
        use crate::dataset::Split;
        Self::new(
            dataset.samples(Split::Train),
            dataset.samples(Split::Validation),
            dataset.samples(Split::Test),
            TargetLayout::standard(),
            options,
        )
    }

    pub fn input_dim(&self) -> usize {
        self.train[0].inputs.len()
    }

    pub fn options(&self) -> &FitnessOptions {
        &self.options
    }

    pub fn train(&self) -> &[EncodedSample] {
        &self.train
    }

    pub fn validation(&self) -> &[EncodedSample] {
        &self.validation
    }

    pub fn test(&self) -> &[EncodedSample] {
        &self.test
    }

    /// Fitness evaluations actually executed so far.
    pub fn evaluation_executions(&self) -> u64 {
        self.executions.load(Ordering::SeqCst)
    }

    fn check_radii(&self, radii: &[f64]) -> Result<RadiusVector> {
        if radii.len() != self.input_dim() {
            return Err(Error::domain(format!(
                "{} radii for {} inputs",
                radii.len(),
                self.input_dim()
            )));
        }
        let r = RadiusVector::new(radii.to_vec())?;
        if !r.within(self.options.radius_min, self.options.radius_max) {
            return Err(Error::domain(format!(
                "radii outside [{}, {}]",
                self.options.radius_min, self.options.radius_max
            )));
        }
        Ok(r)
    }

    /// Build on the training split and score both held-out splits.
    /// Does not touch the evaluation counter.
    pub fn breakdown(&self, radii: &[f64]) -> Result<(FitnessBreakdown, SugenoFis)> {
        let r = self.check_radii(radii)?;
        let (fis, log) = build_fis_with(&self.train, &self.layout, &r, self.options.cluster)?;
        let validation = evaluate_classifier(&fis, &self.validation)?;
        let (test, fitness) = match self.options.mode {
            FitnessMode::MinValidationTest => {
                let test = evaluate_classifier(&fis, &self.test)?;
                let f = validation.accuracy.min(test.accuracy);
                (test, f)
            }
            FitnessMode::ValidationOnly => {
                let test = if self.test.is_empty() {
                    ClassifierMetrics::from_counts(ConfusionCounts::default())
                } else {
                    evaluate_classifier(&fis, &self.test)?
                };
                (test, validation.accuracy)
            }
        };
        Ok((
            FitnessBreakdown {
                fitness,
                validation,
                test,
                rules: log.rules,
            },
            fis,
        ))
    }

    fn execute(&self, radii: &[f64]) -> f64 {
        self.executions.fetch_add(1, Ordering::SeqCst);
        match self.breakdown(radii) {
            Ok((b, _)) => b.fitness,
            Err(e) => {
                log::warn!("fitness evaluation failed, scoring 0: {e}");
                0.0
            }
        }
    }

    /// Fitness in `[0, 1]`; failures score 0 and still count.
    pub fn fitness(&self, radii: &[f64]) -> f64 {
        if !self.options.memoize {
            return self.execute(radii);
        }
        let key: MemoKey = radii.iter().map(|r| (r * 1e12).round() as i64).collect();
        let cell = {
            let mut memo = self.memo.lock().expect("memo lock poisoned");
            Arc::clone(memo.entry(key).or_default())
        };
        *cell.get_or_init(|| self.execute(radii))
    }
}

impl Objective for FitnessContext {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.fitness(x)
    }

    fn executions(&self) -> Option<u64> {
        Some(self.evaluation_executions())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn perfect_predictions() {
        let layout = TargetLayout::from_sizes(&[4, 3]);
        let labels: Vec<Vec<usize>> = (0..6).map(|i| vec![i % 4, i % 3]).collect();
        let c = confusion(&labels, &labels, &layout).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 12, tn: 30, fp: 0, fn_: 0 });
        assert_eq!(accuracy(&c).value, 1.0);
    }

    #[test]
    fn shifted_predictions_brute_force() {
        let layout = TargetLayout::from_sizes(&[4]);
        let target: Vec<Vec<usize>> = [0, 1, 2, 3, 1].iter().map(|&c| vec![c]).collect();
        let predicted: Vec<Vec<usize>> = target.iter().map(|t| vec![(t[0] + 1) % 4]).collect();
        // Bit-by-bit enumeration over the one-hot rows.
        let mut want = ConfusionCounts::default();
        for (p, t) in predicted.iter().zip(&target) {
            for bit in 0..4 {
                want.add_bit(p[0] == bit, t[0] == bit);
            }
        }
        let got = confusion(&predicted, &target, &layout).unwrap();
        assert_eq!(got, want);
        assert_eq!(got, ConfusionCounts { tp: 0, tn: 10, fp: 5, fn_: 5 });
    }

    #[test]
    fn confusion_preconditions() {
        let layout = TargetLayout::from_sizes(&[2]);
        assert!(confusion(&[], &[], &layout).is_err());
        assert!(confusion(&[vec![0]], &[vec![0], vec![1]], &layout).is_err());
        assert!(confusion(&[vec![2]], &[vec![0]], &layout).is_err());
        assert!(confusion(&[vec![0, 1]], &[vec![0, 1]], &layout).is_err());
    }

    #[test]
    fn accuracy_values() {
        let c = ConfusionCounts { tp: 10, tn: 10, fp: 0, fn_: 0 };
        assert_eq!(accuracy(&c).value, 1.0);
        let c = ConfusionCounts { tp: 9, tn: 8, fp: 2, fn_: 1 };
        assert!((accuracy(&c).value - 0.72f64.sqrt()).abs() < 1e-15);
        assert!((accuracy(&c).value - 0.848528).abs() < 1e-6);
        let d = accuracy(&ConfusionCounts { tp: 0, tn: 5, fp: 1, fn_: 0 });
        assert!(d.degenerate && d.value == 0.0);
    }

    #[test]
    fn sensitivity_and_specificity() {
        assert_eq!(sensitivity(&ConfusionCounts { tp: 3, tn: 1, fp: 1, fn_: 0 }).value, 1.0);
        assert_eq!(sensitivity(&ConfusionCounts { tp: 94, tn: 0, fp: 0, fn_: 6 }).value, 0.94);
        let s = specificity(&ConfusionCounts { tp: 5, tn: 0, fp: 0, fn_: 2 });
        assert!(s.degenerate && s.value == 0.0);
    }

    proptest! {
        #[test]
        fn accuracy_is_geometric_mean(tp in 1u64..10_000, tn in 1u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000) {
            let c = ConfusionCounts { tp, tn, fp, fn_ };
            let direct = ((tp as f64 * tn as f64) / ((tp + fn_) as f64 * (fp + tn) as f64)).sqrt();
            let gm = (sensitivity(&c).value * specificity(&c).value).sqrt();
            prop_assert!((accuracy(&c).value - gm).abs() < 1e-12);
            prop_assert!((accuracy(&c).value - direct).abs() < 1e-12);
        }
    }

    fn two_class(x: f64, class: usize) -> EncodedSample {
        EncodedSample {
            inputs: vec![x],
            targets: if class == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
        }
    }

    fn blob_ctx(options: FitnessOptions) -> FitnessContext {
        let mut rng = crate::rng::stream(21, 0);
        let mut split = |n: usize| -> Vec<EncodedSample> {
            (0..n)
                .map(|i| {
                    let class = i % 2;
                    let c = if class == 0 { 0.2 } else { 0.8 };
                    two_class(c + rng.gen_range(-0.05..0.05), class)
                })
                .collect()
        };
        let (train, val, test) = (split(60), split(20), split(20));
        FitnessContext::new(train, val, test, TargetLayout::from_sizes(&[2]), options).unwrap()
    }

    #[test]
    fn constant_inputs_sit_at_the_floor() {
        // One input carrying no information on balanced labels.
        let rows = |n: usize| (0..n).map(|i| two_class(0.5, i % 2)).collect::<Vec<_>>();
        let ctx = FitnessContext::new(
            rows(60),
            rows(20),
            rows(20),
            TargetLayout::from_sizes(&[2]),
            FitnessOptions::default(),
        )
        .unwrap();
        let f = ctx.fitness(&[0.3]);
        assert!((f - 0.5).abs() < 1e-9, "fitness {f}");
    }

    #[test]
    fn counter_contract() {
        let ctx = blob_ctx(FitnessOptions {
            memoize: true,
            ..Default::default()
        });
        let a = ctx.fitness(&[0.3]);
        let b = ctx.fitness(&[0.3]);
        assert_eq!(a, b);
        assert_eq!(ctx.evaluation_executions(), 1);

        let ctx = blob_ctx(FitnessOptions::default());
        ctx.fitness(&[0.3]);
        ctx.fitness(&[0.3]);
        assert_eq!(ctx.evaluation_executions(), 2);
    }

    #[test]
    fn separable_blobs_score_high() {
        let ctx = blob_ctx(FitnessOptions::default());
        let f = ctx.fitness(&[0.3]);
        assert!(f > 0.95, "fitness {f}");
        // Deterministic.
        assert_eq!(f.to_bits(), ctx.fitness(&[0.3]).to_bits());
    }

    #[test]
    fn out_of_bounds_radii_score_zero_and_count() {
        let ctx = blob_ctx(FitnessOptions::default());
        assert_eq!(ctx.fitness(&[0.01]), 0.0);
        assert_eq!(ctx.fitness(&[0.3, 0.3]), 0.0);
        assert_eq!(ctx.evaluation_executions(), 2);
    }

    #[test]
    fn concurrent_memo_counts_once_per_key() {
        use rayon::prelude::*;
        let ctx = blob_ctx(FitnessOptions {
            memoize: true,
            ..Default::default()
        });
        let radii: Vec<f64> = (0..64).map(|i| 0.2 + 0.1 * (i % 4) as f64).collect();
        radii.par_iter().for_each(|r| {
            ctx.fitness(&[*r]);
        });
        assert_eq!(ctx.evaluation_executions(), 4);

        let ctx = blob_ctx(FitnessOptions::default());
        radii.par_iter().for_each(|r| {
            ctx.fitness(&[*r]);
        });
        assert_eq!(ctx.evaluation_executions(), 64);
    }

    #[test]
    fn evaluation_of_a_perfect_classifier() {
        let ctx = blob_ctx(FitnessOptions::default());
        let (b, fis) = ctx.breakdown(&[0.3]).unwrap();
        let m = evaluate_classifier(&fis, ctx.train()).unwrap();
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (1.0, 1.0, 1.0));
        assert_eq!(b.validation, evaluate_classifier(&fis, ctx.validation()).unwrap());
        assert!(evaluate_classifier(&fis, &[]).is_err());
    }
}
