//! Command-line front end: one subcommand per workflow.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::control::RunControl;
use crate::dataset::{
    encode_csv, load_dataset, load_mask, save_dataset_as, save_mask, Dataset, EncodeOptions, GradeRange, LabelSchema,
    MaskSource, NoiseMask, Schema, Task,
};
use crate::error::Error;
use crate::fastrecov::{fastrecov_loop, memory_cutoff, FastRecovConfig, Threshold};
use crate::learners::{ExternalSpec, FitConfig, LearnerSpec, Solver};
use crate::noise::{flip_events, inject_noise, NoiseModel};
use crate::recov::{
    clean_retrain, heldout_metric, random_removal_retrain, recov_run_loop, separation_threshold_for, RecovConfig,
    SeparationRule,
};
use crate::report::{load_report, save_report, write_occurrence_histogram, write_per_sample, write_report_histogram};
use crate::report::{InputInfo, ReportConfig, RunReport, Timings};
use crate::theory::{
    build_occurrence_model, plan_at_runs, plan_for_probabilities, plan_runs, simulate_occurrences, OccurrenceModel,
    OccurrencePlan, OverlapTarget,
};

#[derive(Debug, Parser)]
#[command(name = "recov", version, about = "Label noise detection by repeated cross-validation")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "RECOV_JOBS")]
    pub jobs: Option<usize>,
    /// Suppress progress lines on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-hot encode the non-numeric columns of a CSV.
    Encode(EncodeArgs),
    /// Flip labels (or survival events) and write the ground-truth mask.
    InjectNoise(InjectArgs),
    /// Repeated cross-validation with worst-fold occurrence counting.
    Recov(RecovArgs),
    /// Memory-guided repeated cross-validation.
    Fastrecov(FastArgs),
    /// Monte Carlo occurrence counts for pure-chance fold splits.
    Simulate(SimulateArgs),
    /// Runs needed to separate clean and noisy occurrence counts.
    PlanRuns(PlanArgs),
    /// Retrain without the flagged samples and score a held-out set.
    CleanRetrain(RetrainArgs),
    /// Summarize a run report and export plot-ready CSVs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    #[value(alias = "classification")]
    Clf,
    #[value(alias = "survival")]
    Surv,
    #[value(alias = "ordinal")]
    Ord,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Clf => Task::Classification,
            TaskArg::Surv => Task::Survival,
            TaskArg::Ord => Task::Ordinal,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset CSV with a header row.
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Clf)]
    pub task: TaskArg,
    /// Label column; `label` for classification and `grade` for ordinal by default.
    #[arg(long)]
    pub label_col: Option<String>,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "event")]
    pub event_col: String,
    /// Sample id column; row numbers are used when absent.
    #[arg(long)]
    pub id_col: Option<String>,
    /// Feature columns; by default every numeric column not named above.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Class labels in order, fixing the label set.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Declared ordinal grade range, MIN:MAX.
    #[arg(long)]
    pub grades: Option<GradeRange>,
}

impl DataArgs {
    pub fn schema(&self) -> Schema {
        let labels = match self.task {
            TaskArg::Clf => LabelSchema::Classification {
                label_col: self.label_col.clone().unwrap_or_else(|| "label".into()),
                classes: self.classes.clone(),
            },
            TaskArg::Surv => LabelSchema::Survival {
                time_col: self.time_col.clone(),
                event_col: self.event_col.clone(),
            },
            TaskArg::Ord => LabelSchema::Ordinal {
                label_col: self.label_col.clone().unwrap_or_else(|| "grade".into()),
                range: self.grades,
            },
        };
        Schema {
            id_col: self.id_col.clone(),
            labels,
            feature_cols: self.features.clone(),
        }
    }
}

/// Learner selection shared by the run commands.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Base learner; defaults to the built-in model of the task.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Fold metric; must be the one of the task.
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Executable for `--model external`.
    #[arg(long)]
    pub program: Option<String>,
    /// Argument passed to the external program before the protocol flags (repeatable).
    #[arg(long = "program-arg", allow_hyphen_values = true)]
    pub program_args: Vec<String>,
    /// Do not z-score continuous (non 0/1) feature columns.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Logreg,
    Linear,
    Cox,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Accuracy,
    Cindex,
    Qwk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Auto,
    Newton,
    Lbfgs,
    Gd,
}

impl ModelArgs {
    pub fn spec(&self, task: Task) -> Result<LearnerSpec, CliError> {
        if let Some(m) = self.metric {
            let want = match m {
                MetricArg::Accuracy => Task::Classification,
                MetricArg::Cindex => Task::Survival,
                MetricArg::Qwk => Task::Ordinal,
            };
            if want != task {
                return Err(CliError::Usage(format!("metric {m:?} does not apply to {task} data")));
            }
        }
        let mut fit = FitConfig::default();
        if let Some(l2) = self.l2 {
            fit.l2_penalty = l2;
        }
        if let Some(it) = self.max_iter {
            fit.max_iterations = it;
        }
        if let Some(s) = self.solver {
            fit.solver = match s {
                SolverArg::Auto => Solver::Auto,
                SolverArg::Newton => Solver::Newton,
                SolverArg::Lbfgs => Solver::Lbfgs,
                SolverArg::Gd => Solver::GradientDescent,
            };
        }
        let model = self.model.unwrap_or(match task {
            Task::Classification => ModelArg::Logreg,
            Task::Survival => ModelArg::Cox,
            Task::Ordinal => ModelArg::Linear,
        });
        let spec = match model {
            ModelArg::Logreg => LearnerSpec::Logistic(fit),
            ModelArg::Linear => LearnerSpec::Linear(fit),
            ModelArg::Cox => LearnerSpec::Cox(fit),
            ModelArg::External => LearnerSpec::External(ExternalSpec {
                program: self
                    .program
                    .clone()
                    .ok_or_else(|| CliError::Usage("--model external needs --program".into()))?,
                args: self.program_args.clone(),
                task,
            }),
        };
        if spec.task() != task {
            return Err(CliError::Usage(format!("model {model:?} does not fit {task} data")));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Columns copied unchanged (ids, labels, times, events).
    #[arg(long, value_delimiter = ',')]
    pub keep: Vec<String>,
    /// The input has no header row; columns are named c0, c1, ...
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InjectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Noise ratio.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Row-stochastic transition matrix CSV without header; row j holds
    /// p(observed = i | true = j).
    #[arg(long, conflicts_with = "eps")]
    pub transition: Option<PathBuf>,
    /// Flip each sample independently instead of flipping an exact count.
    #[arg(long)]
    pub bernoulli: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
}

/// A fixed run count or `plan`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunsArg {
    Count(usize),
    Plan,
}

impl std::str::FromStr for RunsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("plan") {
            return Ok(RunsArg::Plan);
        }
        s.parse().map(RunsArg::Count).map_err(|_| format!("`{s}` is neither a run count nor `plan`"))
    }
}

/// Occurrence-model settings for planning and theoretical thresholds.
#[derive(Debug, Clone, Args)]
pub struct TheoryArgs {
    /// Assumed noise ratio.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Separation target: 2sigma, 3sigma or a number of sigmas.
    #[arg(long, default_value = "3sigma")]
    pub target: OverlapTarget,
    /// Monte Carlo trials for the expected noisy count of the most noisy fold.
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub plan_seed: u64,
}

impl TheoryArgs {
    fn model(&self, n: usize, k: usize) -> Result<OccurrenceModel, CliError> {
        let eps = self
            .eps
            .ok_or_else(|| CliError::Usage("--eps is needed to plan runs or derive the theoretical threshold".into()))?;
        Ok(build_occurrence_model(n, eps, k, self.trials, self.plan_seed)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Checkpoint to resume from and keep. Without it a temporary checkpoint
    /// next to the report is used and removed on success.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    pub no_timings: bool,
    /// Ground-truth mask (`id,noisy`) to score the detection against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RecovArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Number of runs, or `plan` for the count planned for --target.
    #[arg(long)]
    pub runs: RunsArg,
    #[command(flatten)]
    pub theory: TheoryArgs,
    /// Count threshold: `theory`, `gmm` or a number.
    #[arg(long, default_value = "theory")]
    pub separation: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write the occurrence histogram CSV here.
    #[arg(long)]
    pub hist: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FastArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `abs:V`, `pct:P` or `gmm`.
    #[arg(long)]
    pub threshold: Option<Threshold>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Number of runs, or `plan` for the count planned for --target.
    #[arg(long)]
    pub runs: RunsArg,
    #[command(flatten)]
    pub theory: TheoryArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Histogram CSV (`count,clean_freq,noisy_freq`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[command(flatten)]
    pub theory: TheoryArgs,
    /// Print the model and plan as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RetrainArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// Held-out CSV with the same columns as the training data.
    #[arg(long)]
    pub heldout: PathBuf,
    /// Training data; defaults to the path recorded in the report.
    #[arg(long = "in", value_name = "CSV")]
    pub input: Option<PathBuf>,
    /// Also retrain after removing as many randomly chosen samples.
    #[arg(long)]
    pub random_baseline: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long = "in", value_name = "JSON")]
    pub input: PathBuf,
    /// Histogram CSV; defaults to the report path with extension `hist.csv`.
    #[arg(long)]
    pub hist: Option<PathBuf>,
    /// Per-sample table (`id,count|memory,flagged`).
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(m) => CliError::Usage(m),
            e => CliError::Run(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(e) => {
                write!(f, "{e}")?;
                let mut source = std::error::Error::source(e);
                while let Some(s) = source {
                    write!(f, ": {s}")?;
                    source = s.source();
                }
                Ok(())
            }
        }
    }
}

/// Parses `args` and runs the command.
pub fn main_with_args<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let progress = !cli.quiet;
    match cli.command {
        Command::Encode(a) => encode(a),
        Command::InjectNoise(a) => inject(a),
        Command::Recov(a) => recov(a, progress),
        Command::Fastrecov(a) => fastrecov(a, progress),
        Command::Simulate(a) => simulate(a),
        Command::PlanRuns(a) => plan(a),
        Command::CleanRetrain(a) => retrain(a),
        Command::Report(a) => report(a),
    }
}

fn encode(a: EncodeArgs) -> Result<(), CliError> {
    let s = encode_csv(
        &a.input,
        &a.out,
        !a.no_header,
        &EncodeOptions {
            passthrough: a.keep.clone(),
        },
    )?;
    println!(
        "encoded {} categorical columns into {} dummies; {} numeric columns kept",
        s.categorical_columns, s.dummy_columns, s.numeric_columns
    );
    Ok(())
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(Error::from)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let row = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| Error::MalformedRow {
                line: i as u64 + 1,
                message: "transition entries must be numbers".into(),
            })?;
        rows.push(row);
    }
    Ok(rows)
}

fn inject(a: InjectArgs) -> Result<(), CliError> {
    let data: Dataset<f64> = load_dataset(&a.data.input, &a.data.schema())?;
    let (noisy, mask) = match (data.task(), &a.transition, a.eps) {
        (Task::Classification, Some(path), _) => {
            let model = NoiseModel::Transition {
                matrix: read_matrix(path)?,
            };
            inject_noise(&data, &model, !a.bernoulli, a.seed)?
        }
        (Task::Classification, None, Some(eps)) => inject_noise(&data, &NoiseModel::Uniform { eps }, !a.bernoulli, a.seed)?,
        (Task::Survival, None, Some(eps)) if !a.bernoulli => flip_events(&data, eps, a.seed)?,
        (Task::Survival, _, _) => {
            return Err(CliError::Usage("survival data take --eps with exact event flips only".into()))
        }
        (Task::Ordinal, _, _) => return Err(CliError::Usage("noise injection needs classification or survival labels".into())),
        (_, None, None) => return Err(CliError::Usage("give --eps or --transition".into())),
    };
    // Same column names as the input; row-index ids get an `id` column.
    save_dataset_as(&noisy, &a.out, &a.data.schema())?;
    save_mask(&mask, &a.mask)?;
    println!("flipped {} of {} samples", mask.noisy_count(), mask.len());
    Ok(())
}

fn load_for_run(d: &DataArgs, m: &ModelArgs) -> Result<(Dataset<f64>, InputInfo), CliError> {
    let schema = d.schema();
    let mut data: Dataset<f64> = load_dataset(&d.input, &schema)?;
    let standardize = !m.no_standardize;
    if standardize {
        let cols = data.continuous_columns();
        data.standardize_columns(&cols);
    }
    let mut info = InputInfo::describe(&data);
    info.path = Some(d.input.display().to_string());
    info.schema = Some(schema);
    info.standardize = standardize;
    Ok((data, info))
}

/// Stop flag raised by SIGINT or SIGTERM.
fn stop_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    #[cfg(unix)]
    for sig in [libc::SIGINT, libc::SIGTERM] {
        let f = Arc::clone(&flag);
        // SAFETY: the handler only stores to an atomic, which is async-signal-safe.
        let _ = unsafe { signal_hook_registry::register(sig, move || f.store(true, Ordering::SeqCst)) };
    }
    flag
}

struct Checkpointing {
    control: RunControl,
    temporary: bool,
}

impl Checkpointing {
    fn new(out: &OutputArgs, progress: bool) -> Self {
        let (path, temporary) = match &out.checkpoint {
            Some(p) => (p.clone(), false),
            None => (out.out.with_extension("checkpoint.json"), true),
        };
        Self {
            control: RunControl {
                stop: Some(stop_flag()),
                checkpoint: Some(path),
                progress,
            },
            temporary,
        }
    }

    fn finish(&self) {
        if self.temporary {
            if let Some(p) = &self.control.checkpoint {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn timings(start: Instant, runs: usize, enabled: bool) -> Option<Timings> {
    enabled.then(|| {
        let total = start.elapsed().as_secs_f64();
        Timings {
            total_seconds: total,
            seconds_per_run: total / runs.max(1) as f64,
        }
    })
}

fn score_truth(report: &RunReport, truth: &Option<PathBuf>) -> Result<(), CliError> {
    let Some(path) = truth else { return Ok(()) };
    let truth = load_mask(path, MaskSource::GroundTruth)?;
    let detected = NoiseMask::new(report.ids(), report.flags(), MaskSource::Detected)?;
    let s = detected.scores(&truth)?;
    println!(
        "against {}: accuracy {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
        path.display(),
        s.accuracy(),
        s.precision(),
        s.recall(),
        s.f1()
    );
    Ok(())
}

fn recov(a: RecovArgs, progress: bool) -> Result<(), CliError> {
    let (data, info) = load_for_run(&a.data, &a.model)?;
    let learner = a.model.spec(data.task())?;
    let theory_plan = |runs: Option<usize>| -> Result<OccurrencePlan, CliError> {
        let plan = plan_runs(&a.theory.model(data.len(), a.k)?, a.theory.target)?;
        Ok(match runs {
            Some(r) => plan_at_runs(&plan, r)?,
            None => plan,
        })
    };
    let (n_runs, planned) = match a.runs {
        RunsArg::Count(r) => (r, None),
        RunsArg::Plan => {
            let plan = theory_plan(None)?;
            eprintln!("planned {} runs for {} sigma", plan.n_runs, plan.target.sigmas);
            (plan.n_runs, Some(plan))
        }
    };
    let config = RecovConfig {
        k: a.k,
        n_runs,
        seed: a.seed,
        learner,
    };
    config.validate()?;
    let rule = match a.separation.as_str() {
        "theory" => SeparationRule::Theory {
            plan: match planned {
                Some(p) => p,
                None => theory_plan(Some(n_runs))?,
            },
        },
        "gmm" => SeparationRule::Gmm,
        s => SeparationRule::Explicit {
            threshold: s
                .parse()
                .map_err(|_| CliError::Usage(format!("--separation `{s}`; expected theory, gmm or a number")))?,
        },
    };
    let ck = Checkpointing::new(&a.output, progress);
    let start = Instant::now();
    let outcome = recov_run_loop(&data, &config, &ck.control)?;
    let threshold = separation_threshold_for(&outcome.pool, &rule)?;
    let report = RunReport::from_recov(
        &data,
        info,
        config,
        rule,
        outcome,
        threshold,
        timings(start, n_runs, !a.output.no_timings),
    )?;
    save_report(&report, &a.output.out)?;
    ck.finish();
    if let Some(h) = &a.hist {
        write_report_histogram(&report, h)?;
    }
    println!(
        "{} runs; threshold {:.3}; flagged {} of {}",
        n_runs,
        threshold,
        report.detected_ids.len(),
        report.per_sample.len()
    );
    score_truth(&report, &a.output.truth)
}

fn fastrecov(a: FastArgs, progress: bool) -> Result<(), CliError> {
    let (data, info) = load_for_run(&a.data, &a.model)?;
    let task = data.task();
    let d = FastRecovConfig::defaults(task);
    let config = FastRecovConfig {
        n_runs: a.runs.unwrap_or(d.n_runs),
        k: a.k,
        tau: a.tau.unwrap_or(d.tau),
        alpha: a.alpha.unwrap_or(d.alpha),
        beta: a.beta.unwrap_or(d.beta),
        threshold: a.threshold.unwrap_or(d.threshold),
        seed: a.seed,
        learner: a.model.spec(task)?,
    };
    config.validate()?;
    let ck = Checkpointing::new(&a.output, progress);
    let start = Instant::now();
    let outcome = fastrecov_loop(&data, &config, &ck.control)?;
    let cutoff = memory_cutoff(&outcome.memory.values, config.threshold);
    let n_runs = config.n_runs;
    let report = RunReport::from_fastrecov(
        &data,
        info,
        config,
        outcome,
        cutoff,
        timings(start, n_runs, !a.output.no_timings),
    )?;
    save_report(&report, &a.output.out)?;
    ck.finish();
    println!(
        "{} runs; flagged {} of {}",
        n_runs,
        report.detected_ids.len(),
        report.per_sample.len()
    );
    score_truth(&report, &a.output.truth)
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let eps = a
        .theory
        .eps
        .ok_or_else(|| CliError::Usage("simulate needs --eps".into()))?;
    let runs = match a.runs {
        RunsArg::Count(r) => r,
        RunsArg::Plan => plan_runs(&a.theory.model(a.n, a.k)?, a.theory.target)?.n_runs,
    };
    let sim = simulate_occurrences(a.n, eps, a.k, runs, a.seed)?;
    write_occurrence_histogram(&sim.counts, &sim.noisy, &a.out)?;
    let mean = |want: bool| {
        let v: Vec<f64> = sim
            .counts
            .iter()
            .zip(&sim.noisy)
            .filter(|(_, &f)| f == want)
            .map(|(&c, _)| c as f64)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    println!(
        "{runs} runs; mean count clean {:.3}, noisy {:.3}",
        mean(false),
        mean(true)
    );
    Ok(())
}

fn plan(a: PlanArgs) -> Result<(), CliError> {
    let model = a.theory.model(a.n, a.k)?;
    let plan = plan_runs(&model, a.theory.target)?;
    // Same planning with the single-fold hypergeometric mode in place of the
    // expected maximum, for comparison.
    let mode_plan = plan_for_probabilities(
        model.e_most_mode / model.n_noisy.max(1) as f64,
        (model.n_fold - model.e_most_mode) / (model.n - model.n_noisy) as f64,
        a.theory.target,
    );
    if a.json {
        let v = serde_json::json!({
            "model": model,
            "plan": plan,
            "mode_plan": mode_plan.as_ref().ok(),
        });
        println!("{}", serde_json::to_string_pretty(&v).map_err(Error::from)?);
        return Ok(());
    }
    println!("N {}, eps {}, k {}: {} noisy samples, fold size {:.2}", model.n, model.eps, model.k, model.n_noisy, model.n_fold);
    println!("E(n_mean) {:.4}", model.e_mean);
    println!("E(n_most) {:.4} (se {:.4}, {} trials)", model.e_most, model.e_most_se, model.trials);
    println!("E(n_diff) {:.4}", model.e_diff);
    println!("p_noisy {:.6}, p_clean {:.6}", model.p_noisy, model.p_clean);
    println!("q_noisy {:.6}, q_clean {:.6}", plan.q_noisy, plan.q_clean);
    println!(
        "target {} sigma (nominal overlap {:.3}%)",
        plan.target.sigmas,
        100.0 * plan.nominal_overlap
    );
    println!("runs {}", plan.n_runs);
    println!(
        "threshold {:.3}{}",
        plan.threshold,
        if plan.midpoint_fallback { " (midpoint of means)" } else { "" }
    );
    match mode_plan {
        Ok(p) => println!("with the hypergeometric mode {} instead: runs {}, threshold {:.3}", model.e_most_mode, p.n_runs, p.threshold),
        Err(e) => println!("with the hypergeometric mode {} instead: {e}", model.e_most_mode),
    }
    Ok(())
}

fn retrain(a: RetrainArgs) -> Result<(), CliError> {
    let report = load_report(&a.report)?;
    let schema = report
        .input
        .schema
        .clone()
        .ok_or_else(|| CliError::Usage("the report does not record how its data were read".into()))?;
    let path = match (&a.input, &report.input.path) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(CliError::Usage("give the training data with --in".into())),
    };
    let mut train: Dataset<f64> = load_dataset(&path, &schema)?;
    let mut heldout: Dataset<f64> = load_dataset(&a.heldout, &schema)?;
    if report.input.standardize {
        let cols = train.continuous_columns();
        let stats = train.column_stats(&cols);
        train.apply_standardization(&cols, &stats);
        heldout.apply_standardization(&cols, &stats);
    }
    if crate::control::dataset_fingerprint(&train) != report.input.fingerprint {
        eprintln!("warning: training data differ from the data the report was made from");
    }
    let spec = match &report.config {
        ReportConfig::Recov { recov, .. } => recov.learner.clone(),
        ReportConfig::Fastrecov { fastrecov } => fastrecov.learner.clone(),
    };
    let learner = spec.build::<f64>()?;
    let detected = NoiseMask::from_noisy_ids(train.ids(), &report.detected_ids, MaskSource::Detected)?;
    let all: Vec<usize> = (0..train.len()).collect();
    let baseline = heldout_metric(learner.as_ref(), &train, &all, &heldout, a.seed)?;
    let cleaned = clean_retrain(&train, &detected, learner.as_ref(), &heldout, a.seed)?;
    println!("baseline (all {} samples): {baseline:.6}", train.len());
    println!("cleaned ({} removed): {cleaned:.6}", detected.noisy_count());
    if a.random_baseline {
        let random = random_removal_retrain(&train, detected.noisy_count(), learner.as_ref(), &heldout, a.seed)?;
        println!("random removal ({} removed): {random:.6}", detected.noisy_count());
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let report = load_report(&a.input)?;
    print!("{}", report.summary());
    let hist = a.hist.clone().unwrap_or_else(|| a.input.with_extension("hist.csv"));
    write_report_histogram(&report, &hist)?;
    println!("histogram: {}", hist.display());
    if let Some(s) = &a.samples {
        write_per_sample(&report, s)?;
        println!("per-sample table: {}", s.display());
    }
    Ok(())
}
