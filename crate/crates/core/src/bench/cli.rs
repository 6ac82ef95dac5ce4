//! Command-line front end. Exit codes: 0 success, 1 config or usage error,
//! 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nalgebra::DVector;

use super::config::{DataSource, ExperimentConfig, GraphSpec, Method};
use super::emit::{aggregate, emit_results, write_tuning_csv};
use super::sweep::{method_moments, run_sweep, tune_all, SweepOutcome};
use crate::baselines::{observed_column_means, CompletionConfig};
use crate::dataio::{
    alzheimer_like, l2_normalize, load_task_csv, prediction_nmse, read_task_csv, rmse, synth_generate, weibull_fit,
    weibull_pdf, write_task_csv, CohortSpec, DatasetBundle, SynthSpec,
};
use crate::error::{Error, Result};
use crate::solver::{fit, objective_value, predict, Hyperparams, ModelMatrix};

#[derive(Debug, Parser)]
#[command(name = "rlgr", version, about = "Graph-regularized multi-task LASSO with missing features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic or cohort-style dataset as per-task CSV files.
    Generate(GenerateArgs),
    /// Fit one model on per-task CSV files and print its metrics.
    Fit(FitArgs),
    /// Run an experiment config: tune, evaluate, write result tables.
    Sweep(RunArgs),
    /// Run only the grid search of an experiment config.
    Tune(RunArgs),
    /// Fit a Weibull distribution to each file's target column.
    Weibull(WeibullArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenerateKind {
    Synthetic,
    Cohort,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Experiment config whose `data` table describes the dataset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in dataset used without `--config`.
    #[arg(long, value_enum, default_value = "synthetic")]
    pub kind: GenerateKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// One CSV file per task.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Supplies graph, solver, threshold and completion settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "rlgr1")]
    pub method: String,
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Completion rank for mf-lgr.
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    /// Scale feature columns to unit l2 norm before fitting.
    #[arg(long)]
    pub normalize: bool,
    /// Write the coefficient matrix to `<out>/model.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Restrict the run to one method.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Args)]
pub struct WeibullArgs {
    /// One CSV file per task.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, default_value = "weibull")]
    pub out: PathBuf,
    /// Points on each density curve.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit_command(a),
        Command::Sweep(a) => sweep_command(a, false),
        Command::Tune(a) => sweep_command(a, true),
        Command::Weibull(a) => weibull_command(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let (data, graph_spec) = match &a.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            (cfg.data, cfg.graph)
        }
        None => match a.kind {
            GenerateKind::Synthetic => (
                DataSource::Synthetic {
                    spec: SynthSpec::default(),
                    test_samples: None,
                },
                GraphSpec::Chain,
            ),
            GenerateKind::Cohort => (
                DataSource::Cohort {
                    spec: CohortSpec::default(),
                    dataset_seed: a.seed,
                },
                GraphSpec::Chain,
            ),
        },
    };
    let (bundle, truth, prefix) = match &data {
        DataSource::Synthetic { spec, .. } => {
            let graph = graph_spec.build(spec.tasks)?;
            let (b, t) = synth_generate(spec, &graph, a.seed)?;
            (b, t, "synthetic")
        }
        DataSource::Cohort { spec, .. } => {
            let graph = graph_spec.build(spec.tasks)?;
            let (b, t) = alzheimer_like(spec, &graph, a.seed)?;
            (b, t, "cohort")
        }
        DataSource::Csv { .. } => return Err(Error::Config("generate needs a synthetic or cohort data source".into())),
    };
    let paths = write_task_csv(&bundle, &a.out, prefix)?;
    let model_path = a.out.join(format!("{prefix}_model.csv"));
    write_model(&truth.true_model, &model_path)?;
    for p in &paths {
        println!("{}", p.display());
    }
    println!("{}", model_path.display());
    Ok(())
}

fn write_model(model: &ModelMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (1..=model.task_count()).map(|i| format!("task{i}")).collect();
    w.write_record(&header)?;
    for row in model.coefficients().row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn fit_command(a: FitArgs) -> Result<()> {
    let method = Method::parse(&a.method)?;
    let cfg = a.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let mut bundle = load_task_csv(&a.files)?;
    if let Some(cfg) = &cfg {
        let graph = cfg.graph.build(bundle.task_count())?;
        bundle = bundle.with_graph(graph)?;
    }
    if a.normalize {
        bundle = l2_normalize(&bundle)?;
    }
    let hyper = Hyperparams::new(a.mu, a.lambda, a.delta).map_err(|e| Error::Config(e.to_string()))?;
    let solver = cfg.as_ref().map(|c| c.solver).unwrap_or_default();
    let variant = cfg.as_ref().map(|c| c.threshold_variant).unwrap_or_default();
    let c = cfg.as_ref().map(|c| c.completion).unwrap_or_default();
    let completion = CompletionConfig {
        rank: a.rank,
        max_iters: c.max_iters,
        tol: c.tol,
        ridge: c.ridge,
    };
    let moments = method_moments(method, &bundle.tasks, a.delta, variant, &completion)?;
    let r = bundle.graph.incidence();
    let report = fit(&moments, &hyper, &r, &solver)?;
    let objective = objective_value(&report.model, &moments, &hyper, &r)?;

    let (preds, actuals) = in_sample(&bundle, &report.model)?;
    println!("method          {}", method.label());
    println!("tasks           {}", bundle.task_count());
    println!("features        {}", bundle.n_features());
    println!("missing rate    {:.4}", bundle.overall_missing_rate());
    println!("objective       {objective:.6e}");
    println!("iterations      {}", report.iterations);
    println!("converged       {}", report.converged);
    let nnz: Vec<String> = (0..report.model.task_count())
        .map(|i| report.model.nonzero_count(i).to_string())
        .collect();
    println!("nonzeros        {}", nnz.join(" "));
    println!("train pred NMSE {:.6}", prediction_nmse(&preds, &actuals)?);
    println!("train RMSE      {:.6}", rmse(&preds, &actuals)?);
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("model.csv");
        write_model(&report.model, &path)?;
        println!("model           {}", path.display());
    }
    Ok(())
}

/// Training predictions with missing features replaced by column means.
fn in_sample(bundle: &DatasetBundle, model: &ModelMatrix) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let mut preds = Vec::new();
    let mut actuals = Vec::new();
    for (i, t) in bundle.tasks.iter().enumerate() {
        let means = observed_column_means(t);
        let x = nalgebra::DMatrix::from_fn(t.n_samples(), t.n_features(), |r, c| {
            if t.is_observed(r, c) {
                t.values()[(r, c)]
            } else {
                means[c].unwrap_or(0.0)
            }
        });
        preds.push(predict(&x, &model.column(i))?);
        actuals.push(t.response().clone());
    }
    Ok((preds, actuals))
}

fn sweep_command(a: RunArgs, tune_only: bool) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = a.out {
        cfg.output.dir = out;
    }
    if let Some(m) = &a.method {
        cfg.methods = vec![Method::parse(m)?];
    }
    if let Some(n) = a.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    info!("config hash {}", cfg.hash());
    if tune_only {
        let choices = tune_all(&cfg)?;
        fs::create_dir_all(&cfg.output.dir).map_err(|e| Error::io(&cfg.output.dir, e))?;
        let stem = if cfg.name.is_empty() { "sweep" } else { cfg.name.as_str() };
        let path = cfg.output.dir.join(format!("{stem}-{}-tuning.csv", cfg.hash()));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_tuning_csv(&choices, file)?;
        let mut stdout = Vec::new();
        write_tuning_csv(&choices, &mut stdout)?;
        print!("{}", String::from_utf8_lossy(&stdout));
        println!("wrote {}", path.display());
        return Ok(());
    }
    let outcome = run_sweep(&cfg)?;
    let files = emit_results(&outcome, &cfg, &cfg.output.dir)?;
    print_table(&outcome);
    println!("wrote {}", files.results.display());
    println!("wrote {}", files.aggregate.display());
    Ok(())
}

fn print_table(outcome: &SweepOutcome) {
    println!(
        "{:<12} {:>8} {:>12} {:>12} {:>12} {:>12} {:>5}",
        "method", "missing", "nmse_w", "nmse_gamma", "pred_nmse", "rmse", "n"
    );
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
    for a in aggregate(&outcome.rows) {
        println!(
            "{:<12} {:>8.3} {:>12} {:>12} {:>12} {:>12} {:>5}",
            a.method.label(),
            a.missing_fraction,
            cell(a.nmse_w.mean),
            cell(a.nmse_gamma.mean),
            cell(a.prediction_nmse.mean),
            cell(a.rmse.mean),
            a.replications
        );
    }
}

fn weibull_command(a: WeibullArgs) -> Result<()> {
    if a.points < 2 {
        return Err(Error::Config("--points must be at least 2".into()));
    }
    let mut fits = Vec::new();
    for path in &a.files {
        let (_, task) = read_task_csv(path)?;
        let fit = weibull_fit(task.response().as_slice()).map_err(|e| Error::InvalidData {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let max = task.response().max();
        fits.push((path, fit, max));
    }
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;

    let fits_path = a.out.join("weibull_fits.csv");
    let mut w = csv::Writer::from_path(&fits_path)?;
    w.write_record(["task", "file", "shape", "scale", "iterations", "capped"])?;
    for (i, (path, f, _)) in fits.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            path.display().to_string(),
            f.shape.to_string(),
            f.scale.to_string(),
            f.iterations.to_string(),
            f.capped.to_string(),
        ])?;
        println!("task {}: shape {:.4} scale {:.4}", i + 1, f.shape, f.scale);
    }
    w.flush().map_err(|e| Error::io(&fits_path, e))?;

    let x_max = 1.2 * fits.iter().map(|(_, _, m)| *m).fold(0.0, f64::max);
    let pdf_path = a.out.join("weibull_pdf.csv");
    let mut w = csv::Writer::from_path(&pdf_path)?;
    let mut header = vec!["x".to_string()];
    header.extend((1..=fits.len()).map(|i| format!("task{i}")));
    w.write_record(&header)?;
    for j in 0..a.points {
        let x = x_max * j as f64 / (a.points - 1) as f64;
        let mut rec = vec![x.to_string()];
        rec.extend(fits.iter().map(|(_, f, _)| weibull_pdf(x, f.shape, f.scale).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&pdf_path, e))?;
    println!("wrote {}", fits_path.display());
    println!("wrote {}", pdf_path.display());
    Ok(())
}

