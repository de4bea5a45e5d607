//! `fisopt`: generate synthetic field data, optimize cluster radii, run
//! comparison grids and score saved classifiers.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fisopt_core::dataset::{Split, SplitFractions};
use fisopt_core::harness::{self, GridPreset};
use fisopt_core::metrics::{evaluate_classifier, FitnessMode, FitnessOptions};
use fisopt_core::optim::{
    AlgorithmConfig, GaConfig, OptimizerConfig, PsoConfig, SaConfig, Schedule, Selection,
};
use fisopt_core::synthgen::{generate_dataset_with, FieldName, FieldProfile, LabelRuleSet};
use fisopt_core::{Dataset, Error, ExperimentSpec, Result, SugenoFis, TargetLayout};

/// Default directory for outputs when no explicit path is given.
const OUT_DIR_ENV: &str = "FISOPT_OUT_DIR";

#[derive(Parser)]
#[command(name = "fisopt", version, about = "Fuzzy classifier radius optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labelled field dataset (JSON + CSV).
    Generate(GenerateArgs),
    /// Optimize the cluster radii of one dataset with one algorithm.
    Optimize(OptimizeArgs),
    /// Run an experiment spec and write comparison tables.
    Compare(CompareArgs),
    /// Score a saved classifier on one split of a dataset.
    Evaluate(EvaluateArgs),
    /// Print an experiment spec to start from.
    SpecTemplate(TemplateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    field: FieldName,
    /// Field profile JSON; defaults to the shipped profile for the field.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Label rule table JSON; defaults to the shipped rules.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Train,validation,test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    fractions: Option<Vec<f64>>,
    /// Dataset JSON path; the CSV goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    #[value(name = "ga-binary", alias = "ga_binary")]
    GaBinary,
    #[value(name = "ga-real", alias = "ga_real")]
    GaReal,
    Pso,
    Sa,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Ranking,
    Tournament,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Boltzmann,
    Exponential,
    Fast,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, required_unless_present = "config")]
    algorithm: Option<Algorithm>,
    /// Optimizer config JSON, used instead of the inline flags.
    #[arg(long, conflicts_with = "algorithm")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    selection: Option<SelectionArg>,
    #[arg(long)]
    swarm: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    schedule: Option<ScheduleArg>,
    #[arg(long)]
    t0: Option<f64>,
    /// Stop after this many evaluations without improvement.
    #[arg(long)]
    stall: Option<u64>,
    /// Score on validation only instead of min(validation, test).
    #[arg(long)]
    validation_only: bool,
    #[arg(long)]
    memoize: bool,
    /// Report JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the optimized classifier here.
    #[arg(long)]
    save_fis: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    fis: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "validation")]
    split: Split,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Full,
    Small,
}

#[derive(Args)]
struct TemplateArgs {
    #[arg(long)]
    field: FieldName,
    #[arg(long, value_enum, default_value_t = GridArg::Small)]
    grid: GridArg,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn out_path(explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(default_name)
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn generate(a: GenerateArgs) -> Result<()> {
    let profile = match &a.profile {
        Some(p) => FieldProfile::load(p)?,
        None => a.field.default_profile(),
    };
    let rules = match &a.rules {
        Some(p) => LabelRuleSet::load(p)?,
        None => LabelRuleSet::default_rules(),
    };
    let fractions = match a.fractions.as_deref() {
        Some([t, v, s]) => SplitFractions::new(*t, *v, *s)?,
        Some(_) => return Err(Error::Config("--fractions takes three values".into())),
        None => SplitFractions::DEFAULT,
    };
    let ds = generate_dataset_with(&profile, &rules, a.n, a.seed, fractions)?;
    let json_path = out_path(a.out, &format!("{}.json", a.field.key()));
    ds.save_json(&json_path)?;
    let csv_path = json_path.with_extension("csv");
    write(&csv_path, &ds.to_csv())?;

    let [train, val, test] = ds.split_sizes();
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    println!("samples: {} (train {train}, validation {val}, test {test})", ds.len());
    let counts = ds.performance_counts();
    let names = ["good", "acceptable", "investigate", "bad"];
    let balance: Vec<String> = names
        .iter()
        .zip(counts)
        .map(|(n, c)| format!("{n} {c} ({:.1}%)", 100.0 * c as f64 / ds.len() as f64))
        .collect();
    println!("field performance: {}", balance.join(", "));
    Ok(())
}

fn inline_config(a: &OptimizeArgs, algorithm: Algorithm) -> AlgorithmConfig {
    let ga = || {
        let mut c = GaConfig::default();
        if let Some(p) = a.population {
            c.population_size = p;
        }
        if let Some(g) = a.generations {
            c.generations = g;
        }
        if let Some(s) = a.selection {
            c.selection = match s {
                SelectionArg::Ranking => Selection::NormalizedGeometricRanking,
                SelectionArg::Tournament => Selection::Tournament,
            };
        }
        c
    };
    match algorithm {
        Algorithm::GaBinary => AlgorithmConfig::GaBinary(ga()),
        Algorithm::GaReal => AlgorithmConfig::GaReal(ga()),
        Algorithm::Pso => {
            let mut c = PsoConfig::default();
            if let Some(s) = a.swarm.or(a.population) {
                c.swarm_size = s;
            }
            if let Some(i) = a.iterations.or(a.generations) {
                c.iterations = i;
            }
            if let Some(v) = a.c1 {
                c.c1 = v;
            }
            if let Some(v) = a.c2 {
                c.c2 = v;
            }
            AlgorithmConfig::Pso(c)
        }
        Algorithm::Sa => {
            let mut c = SaConfig::default();
            if let Some(i) = a.iterations {
                c.iterations = i;
            }
            if let Some(t) = a.t0 {
                c.t0 = t;
            }
            if let Some(s) = a.schedule {
                c.schedule = match s {
                    ScheduleArg::Boltzmann => Schedule::Boltzmann,
                    ScheduleArg::Exponential => Schedule::Exponential,
                    ScheduleArg::Fast => Schedule::Fast,
                };
            }
            AlgorithmConfig::Sa(c)
        }
    }
}

fn optimize(a: OptimizeArgs) -> Result<()> {
    let ds = Dataset::load_json(&a.data)?;
    let mut config = match (&a.config, a.algorithm) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            OptimizerConfig::from_json(&text)?
        }
        (None, Some(alg)) => OptimizerConfig {
            algorithm: inline_config(&a, alg),
            bounds: None,
            seed: 1,
            stall_evaluations: None,
        },
        (None, None) => return Err(Error::Config("give --algorithm or --config".into())),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if a.stall.is_some() {
        config.stall_evaluations = a.stall;
    }
    config.validate()?;
    let options = FitnessOptions {
        mode: if a.validation_only {
            FitnessMode::ValidationOnly
        } else {
            FitnessMode::MinValidationTest
        },
        memoize: a.memoize,
        ..Default::default()
    };

    let started = Instant::now();
    let (report, fis) = harness::optimize(&ds, &config, options)?;
    let elapsed = started.elapsed().as_secs_f64();

    let path = out_path(a.out, "run.json");
    write(&path, &serde_json::to_string_pretty(&report)?)?;
    if let Some(fis_path) = &a.save_fis {
        fis.save_json(fis_path)?;
    }
    println!("algorithm: {} ({})", report.run.algorithm, config.algorithm.params_label());
    println!("best fitness: {:.6}", report.run.best_fitness);
    println!(
        "validation accuracy: {:.6}, test accuracy: {:.6}, rules: {}",
        report.validation.accuracy, report.test.accuracy, report.rules
    );
    println!("evaluation function executions: {}", report.run.evaluation_executions);
    println!("runtime: {elapsed:.3} s");
    println!("report: {}", path.display());
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let spec = ExperimentSpec::load(&a.spec)?;
    let base = a.spec.parent().unwrap_or(Path::new("."));
    let ds = spec.load_dataset(base)?;
    let started = Instant::now();
    let report = harness::run_comparison(&spec, &ds, a.workers)?;
    let dir = out_path(a.out, "compare");
    harness::write_outputs(&report, &dir)?;
    let failed = report.rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "{} runs ({failed} failed) in {:.1} s",
        report.rows.len(),
        started.elapsed().as_secs_f64()
    );
    for b in &report.best {
        let r = &report.rows[b.row];
        println!(
            "best {}: {} accuracy {:.3}% with {} executions",
            b.family,
            r.params,
            100.0 * r.accuracy_min.unwrap_or(0.0),
            r.evaluation_executions.unwrap_or(0)
        );
    }
    println!("tables: {}", dir.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let fis = SugenoFis::load_json(&a.fis)?;
    let ds = Dataset::load_json(&a.data)?;
    let samples = ds.samples(a.split);
    let dim = samples.first().map(|s| s.inputs.len());
    if fis.layout != TargetLayout::standard() || dim.is_some_and(|d| d != fis.input_dim) {
        return Err(Error::Data("classifier and dataset layouts differ".into()));
    }
    let m = evaluate_classifier(&fis, &samples)?;
    println!("split: {}", a.split.name());
    println!("accuracy: {}", m.accuracy);
    println!("sensitivity: {}", m.sensitivity);
    println!("specificity: {}", m.specificity);
    Ok(())
}

fn template(a: TemplateArgs) -> Result<()> {
    let preset = match a.grid {
        GridArg::Full => GridPreset::Full,
        GridArg::Small => GridPreset::Small,
    };
    let text = harness::spec_template(a.field, preset).to_json()?;
    match a.out {
        Some(p) => write(&p, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Config(_) => 2,
        Error::Data(_) | Error::Io { .. } | Error::Json(_) => 3,
        Error::Internal(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Optimize(a) => optimize(a),
        Command::Compare(a) => compare(a),
        Command::Evaluate(a) => evaluate(a),
        Command::SpecTemplate(a) => template(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
