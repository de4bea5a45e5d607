//! Experiment runner: single optimizations, comparison grids and their
//! CSV / Markdown / JSON reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitFractions};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::fis::SugenoFis;
use crate::metrics::{ClassifierMetrics, FitnessContext, FitnessOptions};
use crate::optim::{
    self, AlgorithmConfig, GaConfig, OptimizerConfig, PsoConfig, RunReport, SaConfig, Schedule,
    Selection,
};
use crate::synthgen::{generate_dataset_with, FieldName, FieldProfile, LabelRuleSet};

/// Where the experiment's dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Synthesize with the field's shipped profile unless paths are given.
    Generate {
        n: usize,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        profile: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rules: Option<PathBuf>,
    },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub field: FieldName,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub fitness: FitnessOptions,
    /// Each config runs once per replicate seed; the config's own seed is
    /// replaced.
    pub configs: Vec<OptimizerConfig>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(Error::config("experiment has no optimizer configs"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("experiment has no replicate seeds"));
        }
        for (i, c) in self.configs.iter().enumerate() {
            c.validate()
                .map_err(|e| Error::config(format!("config {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Configs crossed with seeds, config-major.
    pub fn entries(&self) -> Vec<OptimizerConfig> {
        self.configs
            .iter()
            .flat_map(|c| {
                self.seeds.iter().map(move |&seed| OptimizerConfig {
                    seed,
                    ..c.clone()
                })
            })
            .collect()
    }

    /// Load or synthesize the dataset; relative paths resolve against `base`.
    pub fn load_dataset(&self, base: &Path) -> Result<Dataset> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        match &self.dataset {
            DatasetSource::Generate {
                n,
                seed,
                profile,
                rules,
            } => {
                let profile = match profile {
                    Some(p) => FieldProfile::load(&resolve(p))?,
                    None => self.field.default_profile(),
                };
                let rules = match rules {
                    Some(p) => LabelRuleSet::load(&resolve(p))?,
                    None => LabelRuleSet::default_rules(),
                };
                generate_dataset_with(&profile, &rules, *n, *seed, SplitFractions::DEFAULT)
            }
            DatasetSource::File { path } => Dataset::load_json(&resolve(path)),
        }
    }
}

/// Which preset grid a template carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPreset {
    /// Every GA population and selection, PSO acceleration pair and SA
    /// schedule/budget combination ([`full_grid`]).
    Full,
    /// One config per engine, for smoke runs.
    Small,
}

/// 65 configs: 24 GA, 17 PSO, 24 SA.
pub fn full_grid() -> Vec<OptimizerConfig> {
    let mut out = Vec::new();
    let cfg = |a| OptimizerConfig {
        algorithm: a,
        bounds: None,
        seed: 1,
        stall_evaluations: None,
    };
    for selection in [Selection::NormalizedGeometricRanking, Selection::Tournament] {
        for pop in [30, 100, 200, 300, 400, 500] {
            let ga = GaConfig {
                population_size: pop,
                selection,
                ..Default::default()
            };
            out.push(cfg(AlgorithmConfig::GaBinary(ga.clone())));
            out.push(cfg(AlgorithmConfig::GaReal(ga)));
        }
    }
    let steps = [0.5, 1.0, 1.5, 2.0];
    let mut pairs: Vec<(f64, f64)> = steps
        .iter()
        .flat_map(|&a| steps.iter().map(move |&b| (a, b)))
        .collect();
    pairs.push((2.8, 1.3));
    for (c1, c2) in pairs {
        out.push(cfg(AlgorithmConfig::Pso(PsoConfig {
            c1,
            c2,
            ..Default::default()
        })));
    }
    for schedule in Schedule::ALL {
        for t0 in [1.0, 100.0] {
            for iterations in [1, 25, 50, 100] {
                out.push(cfg(AlgorithmConfig::Sa(SaConfig {
                    schedule,
                    t0,
                    iterations,
                    ..Default::default()
                })));
            }
        }
    }
    out
}

/// One config per engine at modest budgets.
pub fn small_grid() -> Vec<OptimizerConfig> {
    let cfg = |a| OptimizerConfig {
        algorithm: a,
        bounds: None,
        seed: 1,
        stall_evaluations: None,
    };
    let ga = GaConfig {
        population_size: 10,
        generations: 5,
        ..Default::default()
    };
    vec![
        cfg(AlgorithmConfig::GaBinary(ga.clone())),
        cfg(AlgorithmConfig::GaReal(GaConfig {
            selection: Selection::Tournament,
            ..ga
        })),
        cfg(AlgorithmConfig::Pso(PsoConfig {
            swarm_size: 10,
            iterations: 5,
            ..Default::default()
        })),
        cfg(AlgorithmConfig::Sa(SaConfig {
            iterations: 25,
            ..Default::default()
        })),
    ]
}

pub fn spec_template(field: FieldName, preset: GridPreset) -> ExperimentSpec {
    ExperimentSpec {
        field,
        dataset: DatasetSource::Generate {
            n: 2000,
            seed: 7,
            profile: None,
            rules: None,
        },
        fitness: FitnessOptions::default(),
        configs: match preset {
            GridPreset::Full => full_grid(),
            GridPreset::Small => small_grid(),
        },
        seeds: default_seeds(),
    }
}

/// Result of a single optimization with the best radii scored on both
/// held-out splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub dataset: String,
    pub run: RunReport,
    pub validation: ClassifierMetrics,
    pub test: ClassifierMetrics,
    pub rules: usize,
}

/// Optimize radii on `dataset` and rebuild the winning classifier.
pub fn optimize(
    dataset: &Dataset,
    config: &OptimizerConfig,
    options: FitnessOptions,
) -> Result<(OptimizeReport, SugenoFis)> {
    let ctx = FitnessContext::from_dataset(dataset, options)?;
    let config = config.clone().with_default_bounds(ctx.input_dim())?;
    let run = optim::run(&config, &ctx)?;
    let (b, fis) = ctx.breakdown(&run.best_radii)?;
    Ok((
        OptimizeReport {
            dataset: dataset.name.clone(),
            run,
            validation: b.validation,
            test: b.test,
            rules: b.rules,
        },
        fis,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub index: usize,
    pub classifier: String,
    pub algorithm: String,
    pub family: String,
    pub params: String,
    pub seed: u64,
    pub accuracy_validation: Option<f64>,
    pub accuracy_test: Option<f64>,
    pub accuracy_min: Option<f64>,
    pub sensitivity_validation: Option<f64>,
    pub specificity_validation: Option<f64>,
    pub sensitivity_test: Option<f64>,
    pub specificity_test: Option<f64>,
    pub rules: Option<usize>,
    pub evaluation_executions: Option<u64>,
    #[serde(skip)]
    pub wall_time_secs: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyBest {
    pub family: String,
    /// Index into the detail rows.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub classifier: String,
    pub rows: Vec<ComparisonRow>,
    pub best: Vec<FamilyBest>,
    /// Full run per row; `None` where the run failed.
    pub runs: Vec<Option<OptimizeReport>>,
}

const FAMILIES: [&str; 3] = ["GA", "PSO", "SA"];

/// Best row per family: highest `accuracy_min`, then fewer executions,
/// then the earlier row.
pub fn family_best(rows: &[ComparisonRow]) -> Vec<FamilyBest> {
    FAMILIES
        .iter()
        .filter_map(|fam| {
            rows.iter()
                .filter(|r| r.family == *fam && r.accuracy_min.is_some())
                .fold(None::<&ComparisonRow>, |best, r| match best {
                    None => Some(r),
                    Some(b) => {
                        let (ra, ba) = (r.accuracy_min.unwrap(), b.accuracy_min.unwrap());
                        let better = ra > ba
                            || (ra == ba && r.evaluation_executions < b.evaluation_executions);
                        Some(if better { r } else { b })
                    }
                })
                .map(|r| FamilyBest {
                    family: fam.to_string(),
                    row: r.index,
                })
        })
        .collect()
}

fn row_for(
    index: usize,
    classifier: &str,
    config: &OptimizerConfig,
    outcome: &Result<OptimizeReport>,
    wall: f64,
) -> ComparisonRow {
    let mut row = ComparisonRow {
        index,
        classifier: classifier.to_string(),
        algorithm: config.algorithm.name().to_string(),
        family: config.algorithm.family().to_string(),
        params: config.algorithm.params_label(),
        seed: config.seed,
        accuracy_validation: None,
        accuracy_test: None,
        accuracy_min: None,
        sensitivity_validation: None,
        specificity_validation: None,
        sensitivity_test: None,
        specificity_test: None,
        rules: None,
        evaluation_executions: None,
        wall_time_secs: wall,
        status: "ok".into(),
    };
    match outcome {
        Ok(r) => {
            row.accuracy_validation = Some(r.validation.accuracy);
            row.accuracy_test = Some(r.test.accuracy);
            row.accuracy_min = Some(r.run.best_fitness);
            row.sensitivity_validation = Some(r.validation.sensitivity);
            row.specificity_validation = Some(r.validation.specificity);
            row.sensitivity_test = Some(r.test.sensitivity);
            row.specificity_test = Some(r.test.specificity);
            row.rules = Some(r.rules);
            row.evaluation_executions = Some(r.run.evaluation_executions);
        }
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

/// Run every (config, seed) entry on `dataset` using `workers` threads.
/// Failed entries become failed rows; the rest still run.
pub fn run_comparison(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    workers: usize,
) -> Result<ComparisonReport> {
    spec.validate()?;
    let entries = spec.entries();
    let classifier = spec.field.display().to_string();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let outcomes: Vec<(Result<OptimizeReport>, f64)> = pool.install(|| {
        entries
            .par_iter()
            .map(|config| {
                let started = Instant::now();
                let out = optimize(dataset, config, spec.fitness).map(|(r, _)| r);
                if let Err(e) = &out {
                    log::warn!("{} failed: {e}", config.algorithm.name());
                }
                (out, started.elapsed().as_secs_f64())
            })
            .collect()
    });
    let rows: Vec<ComparisonRow> = entries
        .iter()
        .zip(&outcomes)
        .enumerate()
        .map(|(i, (c, (o, wall)))| row_for(i, &classifier, c, o, *wall))
        .collect();
    let best = family_best(&rows);
    Ok(ComparisonReport {
        classifier,
        rows,
        best,
        runs: outcomes.into_iter().map(|(o, _)| o.ok()).collect(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

const CSV_HEADER: &str = "index,classifier,algorithm,family,params,seed,accuracy_validation,accuracy_test,accuracy_min,sensitivity_validation,specificity_validation,sensitivity_test,specificity_test,rules,evaluation_executions,status";

fn csv_line(r: &ComparisonRow) -> String {
    [
        r.index.to_string(),
        csv_field(&r.classifier),
        r.algorithm.clone(),
        r.family.clone(),
        csv_field(&r.params),
        r.seed.to_string(),
        opt(r.accuracy_validation),
        opt(r.accuracy_test),
        opt(r.accuracy_min),
        opt(r.sensitivity_validation),
        opt(r.specificity_validation),
        opt(r.sensitivity_test),
        opt(r.specificity_test),
        opt(r.rules),
        opt(r.evaluation_executions),
        csv_field(&r.status),
    ]
    .join(",")
}

/// Every detail row. Wall time is left out so reruns compare equal.
pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

/// One line per family best.
pub fn summary_csv(report: &ComparisonReport) -> String {
    let mut out = format!("best_of,{CSV_HEADER}\n");
    for b in &report.best {
        out.push_str(&b.family);
        out.push(',');
        out.push_str(&csv_line(&report.rows[b.row]));
        out.push('\n');
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{:.3}%", 100.0 * v)).unwrap_or_else(|| "n/a".into())
}

fn algorithm_title(name: &str) -> &'static str {
    match name {
        "ga_binary" => "GA (binary coding)",
        "ga_real" => "GA (real coding)",
        "pso" => "PSO",
        "sa" => "SA",
        _ => "other",
    }
}

/// Per-algorithm tables, the best-per-family comparison and the held-out
/// metrics of each family best.
pub fn comparison_markdown(report: &ComparisonReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Optimizer comparison: {}\n", report.classifier);
    for alg in ["ga_binary", "ga_real", "pso", "sa"] {
        let rows: Vec<&ComparisonRow> = report.rows.iter().filter(|r| r.algorithm == alg).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(md, "## {}\n", algorithm_title(alg));
        md.push_str("| Classifier | Parameters | Seed | Accuracy | Evaluation function executions | Wall time (s) | Status |\n");
        md.push_str("|---|---|---|---|---|---|---|\n");
        for r in rows {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {:.2} | {} |",
                r.classifier,
                r.params,
                r.seed,
                pct(r.accuracy_min),
                opt(r.evaluation_executions),
                r.wall_time_secs,
                r.status
            );
        }
        md.push('\n');
    }

    md.push_str("## Comparison of optimization algorithms\n\n");
    md.push_str("| Classifier | Algorithm | Params | Accuracy | Evaluation function executions |\n");
    md.push_str("|---|---|---|---|---|\n");
    for b in &report.best {
        let r = &report.rows[b.row];
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            r.classifier,
            b.family,
            r.params,
            pct(r.accuracy_min),
            opt(r.evaluation_executions)
        );
    }
    md.push('\n');

    md.push_str("## Performance measures\n\n");
    md.push_str("| Classifier | Algorithm | Validation accuracy | Validation sensitivity | Validation specificity | Test accuracy | Test sensitivity | Test specificity |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    for b in &report.best {
        let r = &report.rows[b.row];
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            r.classifier,
            b.family,
            pct(r.accuracy_validation),
            pct(r.sensitivity_validation),
            pct(r.specificity_validation),
            pct(r.accuracy_test),
            pct(r.sensitivity_test),
            pct(r.specificity_test)
        );
    }
    md
}

/// Write `comparison.csv`, `summary.csv`, `comparison.md` and
/// `runs/<index>.json` under `dir`.
pub fn write_outputs(report: &ComparisonReport, dir: &Path) -> Result<()> {
    write_file(&dir.join("comparison.csv"), &comparison_csv(report))?;
    write_file(&dir.join("summary.csv"), &summary_csv(report))?;
    write_file(&dir.join("comparison.md"), &comparison_markdown(report))?;
    for (i, run) in report.runs.iter().enumerate() {
        if let Some(run) = run {
            write_file(
                &dir.join("runs").join(format!("{i}.json")),
                &serde_json::to_string_pretty(run)?,
            )?;
        }
    }
    Ok(())
}
