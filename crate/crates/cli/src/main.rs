//! `rulecraft` command-line interface.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rulecraft::io::{self, GenParams, ModelMetadata};
use rulecraft::oracle::{self, BoundStudyConfig};
use rulecraft::{
    BoostConfig, BoostRun, Dataset, Error, LambdaChoice, LossKind, ObjectiveKind, OffsetMode, RuleEnsemble, Task,
    WeightUpdate,
};

const THREADS_VAR: &str = "RULECRAFT_THREADS";

/// Learns small additive rule ensembles by gradient boosting.
///
/// Exit codes: 0 success, 1 runtime failure, 2 configuration error,
/// 3 data error. RULECRAFT_THREADS caps the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "rulecraft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a rule ensemble and write it as a JSON model file.
    Train(TrainArgs),
    /// Write raw outputs and mean predictions of a model for every row.
    Predict(PredictArgs),
    /// Report risk, complexity and rule coverage of a model on labelled data.
    Evaluate(EvaluateArgs),
    /// Normalized train/test risk for every ensemble size of one or more methods.
    Tradeoff(TradeoffArgs),
    /// Coverage of the rules chosen by a base objective next to the orthogonal objective's choices.
    Coverage(CoverageArgs),
    /// Quality of the prefix-greedy bound against exact subset maximization.
    BoundStudy(BoundStudyArgs),
    /// Write a synthetic dataset as CSV.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Reg,
    Binary,
    Count,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Reg => Task::Regression,
            TaskArg::Binary => Task::BinaryClassification,
            TaskArg::Count => Task::CountRegression,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Squared,
    Logistic,
    Poisson,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Squared => LossKind::Squared,
            LossArg::Logistic => LossKind::Logistic,
            LossArg::Poisson => LossKind::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Gb,
    Gs,
    Xgb,
    Ogb,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Gb => ObjectiveKind::Gb,
            ObjectiveArg::Gs => ObjectiveKind::Gs,
            ObjectiveArg::Xgb => ObjectiveKind::Xgb,
            ObjectiveArg::Ogb => ObjectiveKind::Ogb,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UpdateArg {
    Stagewise,
    Xgb,
    Corrective,
}

impl From<UpdateArg> for WeightUpdate {
    fn from(u: UpdateArg) -> Self {
        match u {
            UpdateArg::Stagewise => WeightUpdate::Stagewise,
            UpdateArg::Xgb => WeightUpdate::XgbClosedForm,
            UpdateArg::Corrective => WeightUpdate::Corrective,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OffsetArg {
    Fit,
    Zero,
}

/// Base learner search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SearchArg {
    Greedy,
    Beam(usize),
    BranchAndBound,
}

impl FromStr for SearchArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(SearchArg::Greedy),
            "bnb" => Ok(SearchArg::BranchAndBound),
            _ => match s.strip_prefix("beam:").map(str::parse::<usize>) {
                Some(Ok(w)) if w > 0 => Ok(SearchArg::Beam(w)),
                _ => Err(format!("expected greedy, beam:W with W >= 1, or bnb; got `{s}`")),
            },
        }
    }
}

impl std::fmt::Display for SearchArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchArg::Greedy => f.write_str("greedy"),
            SearchArg::Beam(w) => write!(f, "beam:{w}"),
            SearchArg::BranchAndBound => f.write_str("bnb"),
        }
    }
}

/// Labelled input data: a CSV file or a synthetic generator.
#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV file with a header row.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    data: Option<PathBuf>,
    /// Use a built-in synthetic dataset instead of --data (friedman1, friedman2, friedman3, prop2, fig2).
    #[arg(long)]
    synthetic: Option<String>,
    /// Name of the target column.
    #[arg(long, default_value = "y")]
    target: String,
    /// Kind of target; selects the default loss.
    #[arg(long, value_enum, default_value = "reg")]
    task: TaskArg,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<Dataset, CliError> {
        match (&self.data, &self.synthetic) {
            (Some(path), _) => io::load_csv(path, &self.target, self.task.into()).map_err(|e| CliError::input(path, e)),
            (None, Some(name)) => io::gen_synthetic(name, &GenParams::default(), seed).map_err(CliError::config),
            (None, None) => Err(CliError::config("either --data or --synthetic is required")),
        }
    }
}

/// Learner settings shared by training and the sweeps.
#[derive(Debug, Args)]
struct LearnArgs {
    /// Loss function; defaults to squared, logistic or Poisson by --task.
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Ridge penalty on rule weights.
    #[arg(long, conflicts_with = "cv", allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Choose the ridge penalty by five-fold cross-validation over 0.01, 0.1, 1, 10, 100.
    #[arg(long)]
    cv: bool,
    /// Base learner: greedy, beam:W or bnb (unbounded branch-and-bound).
    #[arg(long, default_value = "greedy")]
    search: SearchArg,
    /// Stabilizer added to the orthogonal objective's denominator.
    #[arg(long, default_value_t = rulecraft::DEFAULT_EPSILON, allow_negative_numbers = true)]
    epsilon: f64,
    /// Maximum number of rules; unbounded unless set.
    #[arg(long)]
    rules: Option<usize>,
    /// Stop before the ensemble complexity (rules plus literals) would exceed this.
    #[arg(long, default_value_t = 50)]
    max_complexity: usize,
    /// Maximum number of propositions per rule.
    #[arg(long)]
    max_propositions: Option<usize>,
    /// Offset handling: fit the loss-optimal constant, or fix it at zero.
    #[arg(long, value_enum, default_value = "fit")]
    offset: OffsetArg,
    /// Seed for cross-validation folds, splits and synthetic data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl LearnArgs {
    fn config(&self, objective: ObjectiveKind, update: WeightUpdate) -> BoostConfig {
        let mut cfg = BoostConfig::new(objective, update);
        cfg.epsilon = self.epsilon;
        cfg.loss = self.loss.map(Into::into);
        cfg.lambda = if self.cv {
            LambdaChoice::Cv
        } else {
            LambdaChoice::Fixed(self.lambda.unwrap_or(0.0))
        };
        cfg.width = match self.search {
            SearchArg::Greedy => Some(1),
            SearchArg::Beam(w) => Some(w),
            SearchArg::BranchAndBound => None,
        };
        cfg.bounding = true;
        cfg.max_rules = self.rules;
        cfg.max_complexity = self.max_complexity;
        cfg.max_propositions = self.max_propositions;
        cfg.offset = match self.offset {
            OffsetArg::Fit => OffsetMode::Fit,
            OffsetArg::Zero => OffsetMode::Zero,
        };
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    learn: LearnArgs,
    /// Rule selection objective.
    #[arg(long, value_enum, default_value = "ogb")]
    objective: ObjectiveArg,
    /// Weight update after each new rule.
    #[arg(long, value_enum, default_value = "corrective")]
    update: UpdateArg,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-round log as CSV to this file.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV file with the model's feature columns.
    #[arg(long)]
    data: PathBuf,
    /// Column to ignore if present.
    #[arg(long, default_value = "y")]
    target: String,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Labelled CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long, default_value = "y")]
    target: String,
    /// Output file for the report; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TradeoffArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Separate test CSV; otherwise the data is split by --split.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Training fraction of a seeded random split.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[command(flatten)]
    learn: LearnArgs,
    /// Comma-separated objective:update pairs.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "gb:stagewise,gs:stagewise,xgb:xgb,ogb:corrective"
    )]
    methods: Vec<String>,
    /// Record wall-clock seconds; without it the column is 0 so output is reproducible.
    #[arg(long)]
    timing: bool,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    learn: LearnArgs,
    /// Base objective whose stagewise run is followed.
    #[arg(long, value_enum, default_value = "gb")]
    objective: ObjectiveArg,
    /// Number of rounds.
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundStudyArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 2000)]
    instances: usize,
    /// Data points per instance (at most 20).
    #[arg(long, default_value_t = 15)]
    points: usize,
    /// Random existing rules spanning the basis.
    #[arg(long, default_value_t = 5)]
    existing_rules: usize,
    /// Comma-separated stabilizer values, one output column each.
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.1,1", allow_negative_numbers = true)]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Generator: friedman1, friedman2, friedman3, prop2 or fig2.
    #[arg(long)]
    name: String,
    /// Number of rows; each generator has its own default.
    #[arg(long)]
    n: Option<usize>,
    /// Scale parameter of prop2.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Perturbation parameter of prop2.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Name of the target column.
    #[arg(long, default_value = "y")]
    target: String,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Self {
            code: 3,
            message: e.to_string(),
        }
    }

    /// Data error that names the input file unless the message already does.
    fn input(path: &Path, e: Error) -> Self {
        match e {
            Error::Io(_)
            | Error::Csv(_)
            | Error::InvalidDataset(_)
            | Error::InvalidTarget { .. }
            | Error::MalformedModel { .. }
            | Error::VersionMismatch { .. } => {
                Self::data(format!("{}: {e}", path.display()))
            }
            Error::Config(_) => Self::config(e),
            _ => Self::data(e),
        }
    }
}

/// Exit code by error kind for library failures outside input loading.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Explosion { .. } | Error::UnknownGenerator(_) => 2,
            Error::InvalidDataset(_)
            | Error::InvalidTarget { .. }
            | Error::MissingColumn { .. }
            | Error::ParseCell { .. }
            | Error::EmptyFile { .. }
            | Error::VersionMismatch { .. }
            | Error::MalformedModel { .. }
            | Error::FeatureMismatch { .. }
            | Error::Csv(_) => 3,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes()).map_err(|e| CliError {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<(RuleEnsemble, ModelMetadata), CliError> {
    io::load_model(path).map_err(|e| CliError::input(path, e))
}

fn train(args: &TrainArgs) -> Result<(), CliError> {
    let objective: ObjectiveKind = args.objective.into();
    let update: WeightUpdate = args.update.into();
    let cfg = args.learn.config(objective, update);
    cfg.validate()?;
    let ds = args.data.load(args.learn.seed)?;
    let run = rulecraft::boost(&ds, &cfg)?;
    print!("{}", round_log_text(&run, &ds)?);
    println!("stopped: {}", run.stop.describe());
    if let Some(path) = &args.log {
        emit(Some(path), &round_log_csv(&run))?;
    }
    let meta = ModelMetadata {
        objective: Some(objective.name().into()),
        update: Some(update.name().into()),
        lambda: Some(run.lambda),
        epsilon: Some(cfg.epsilon),
        seed: Some(cfg.seed),
        search: Some(args.learn.search.to_string()),
    };
    let text = io::serialize_model(run.final_ensemble(), &meta)?;
    emit(Some(&args.out), &text)
}

fn round_log_text(run: &BoostRun, ds: &Dataset) -> Result<String, CliError> {
    let base = &run.ensembles[0];
    let mut s = format!(
        "round 0\tcomplexity 0\ttrain_risk {}\toffset {:+}\n",
        base.risk(ds)?,
        base.offset
    );
    for (i, log) in run.rounds.iter().enumerate() {
        let at_round = &run.ensembles[i + 1];
        let _ = writeln!(
            s,
            "round {}\tcomplexity {}\ttrain_risk {}\t{}",
            log.k,
            log.complexity,
            log.train_risk,
            at_round.describe_rule(i)
        );
    }
    Ok(s)
}

fn round_log_csv(run: &BoostRun) -> String {
    let mut s = String::from("k,complexity,train_risk,objective_value,coverage,rule\n");
    for (i, log) in run.rounds.iter().enumerate() {
        let rule = run.ensembles[i + 1].describe_rule(i).replace('"', "\"\"");
        let _ = writeln!(
            s,
            "{},{},{},{},{},\"{}\"",
            log.k, log.complexity, log.train_risk, log.objective_value, log.coverage, rule
        );
    }
    s
}

fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let (model, _) = load_model(&args.model)?;
    let ds = io::load_features(&args.data, Some(&args.target)).map_err(|e| CliError::input(&args.data, e))?;
    let f = model.predict(&ds).map_err(CliError::data)?;
    let mut s = String::from("f,prediction\n");
    for v in f {
        let _ = writeln!(s, "{v},{}", rulecraft::losses::predict_mean(model.loss, v));
    }
    emit(args.out.as_deref(), &s)
}

fn task_for(loss: LossKind) -> Task {
    match loss {
        LossKind::Squared => Task::Regression,
        LossKind::Logistic => Task::BinaryClassification,
        LossKind::Poisson => Task::CountRegression,
    }
}

fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let (model, _) = load_model(&args.model)?;
    let ds = io::load_csv(&args.data, &args.target, task_for(model.loss)).map_err(|e| CliError::input(&args.data, e))?;
    let risk = model.risk(&ds).map_err(CliError::data)?;
    let base = RuleEnsemble::offset_only(model.offset, model.loss, model.feature_names.clone())
        .risk(&ds)
        .map_err(CliError::data)?;
    let norm = if base > 0.0 { risk / base } else { 1.0 };
    let mut s = format!(
        "risk {risk}\nnormalized_risk {norm}\ncomplexity {}\nrules {}\n",
        model.complexity(),
        model.len()
    );
    let sels = model.selections(&ds).map_err(CliError::data)?;
    for (i, sel) in sels.iter().enumerate() {
        let _ = writeln!(
            s,
            "rule {}\tcoverage {}\t{}",
            i + 1,
            sel.len() as f64 / ds.n() as f64,
            model.describe_rule(i)
        );
    }
    emit(args.out.as_deref(), &s)
}

fn parse_method(m: &str) -> Result<(ObjectiveKind, WeightUpdate), CliError> {
    let (o, u) = m
        .split_once(':')
        .ok_or_else(|| CliError::config(format!("method `{m}` is not objective:update")))?;
    let objective = ObjectiveKind::from_str(o)?;
    let update = match u {
        "stagewise" => WeightUpdate::Stagewise,
        "xgb" => WeightUpdate::XgbClosedForm,
        "corrective" => WeightUpdate::Corrective,
        _ => return Err(CliError::config(format!("unknown weight update `{u}`"))),
    };
    Ok((objective, update))
}

fn tradeoff(args: &TradeoffArgs) -> Result<(), CliError> {
    let methods = args
        .methods
        .iter()
        .map(|m| parse_method(m.trim()).map(|p| (m.trim().to_string(), p)))
        .collect::<Result<Vec<_>, _>>()?;
    for (_, (o, u)) in &methods {
        args.learn.config(*o, *u).validate()?;
    }
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(CliError::config(format!("--split must be in (0, 1), got {}", args.split)));
    }
    let all = args.data.load(args.learn.seed)?;
    let (train, test) = match &args.test {
        Some(path) => {
            let test =
                io::load_csv(path, &args.data.target, args.data.task.into()).map_err(|e| CliError::input(path, e))?;
            (all, test)
        }
        None => io::split(&all, args.split, args.learn.seed).map_err(CliError::data)?,
    };
    let mut s = String::from("method,k,complexity,lambda,train_risk_norm,test_risk_norm,seconds\n");
    for (label, (o, u)) in &methods {
        let points = rulecraft::sweep_tradeoff(&train, &test, &args.learn.config(*o, *u))?;
        for p in points {
            let secs = if args.timing { p.seconds } else { 0.0 };
            let _ = writeln!(
                s,
                "{label},{},{},{},{},{},{secs}",
                p.k, p.complexity, p.lambda, p.train_risk_norm, p.test_risk_norm
            );
        }
    }
    emit(args.out.as_deref(), &s)
}

fn coverage(args: &CoverageArgs) -> Result<(), CliError> {
    let cfg = args.learn.config(args.objective.into(), WeightUpdate::Stagewise);
    cfg.validate()?;
    let ds = args.data.load(args.learn.seed)?;
    let pairs = rulecraft::coverage_compare(&ds, &cfg, args.rounds)?;
    let mut s = String::from("round,base_coverage,ogb_coverage\n");
    for p in pairs {
        let ogb = p.ogb.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{ogb}", p.round, p.base);
    }
    emit(args.out.as_deref(), &s)
}

fn bound_study(args: &BoundStudyArgs) -> Result<(), CliError> {
    let cfg = BoundStudyConfig {
        instances: args.instances,
        points: args.points,
        existing_rules: args.existing_rules,
        epsilons: args.epsilons.clone(),
        seed: args.seed,
    };
    cfg.validate()?;
    let table = oracle::run_bound_study(&cfg)?;
    emit(args.out.as_deref(), &table.to_csv())
}

fn gen_data(args: &GenDataArgs) -> Result<(), CliError> {
    let params = GenParams {
        n: args.n,
        alpha: args.alpha,
        epsilon: args.epsilon,
    };
    let ds = io::gen_synthetic(&args.name, &params, args.seed)?;
    io::save_csv(&ds, &args.out, &args.target).map_err(|e| CliError {
        code: 1,
        message: format!("{}: {e}", args.out.display()),
    })
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError {
            code: 1,
            message: e.to_string(),
        })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads()?;
    match &cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Tradeoff(a) => tradeoff(a),
        Command::Coverage(a) => coverage(a),
        Command::BoundStudy(a) => bound_study(a),
        Command::GenData(a) => gen_data(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
