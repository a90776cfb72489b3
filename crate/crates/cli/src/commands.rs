use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use prefxfer_core::anticipate::value_iteration;
use prefxfer_core::eval::{evaluate_users, simulate_users, ExperimentConfig};
use prefxfer_core::formats::{
    parse_ratings, parse_task, parse_trace, parse_weights, serialize_ratings, serialize_report,
    serialize_results, serialize_trace, serialize_weights, RatingsRecord, ReportRecord,
    ResultsFile, RunConfig, TraceRecord, UserSource, WeightsRecord,
};
use prefxfer_core::irl::{learn_weights, Direction, Init, LearnConfig};
use prefxfer_core::sim::sample_population;
use prefxfer_core::{enumerate_states, shipped, Error, TaskSpec, WeightVector};
use prefxfer_service::{write_atomic, ServiceConfig};

use crate::render;
use crate::{
    EvaluateArgs, Format, LearnArgs, OptimizerArgs, PopulationArgs, PredictArgs, ServeArgs,
    SimulateArgs, StepDirection,
};

#[derive(Debug)]
pub enum CliError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Input(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Io { .. } => 3,
            CliError::Input(_) => 4,
        }
    }

    fn in_file(path: &Path, e: Error) -> Self {
        match CliError::from(e) {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Input(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

fn is_failure(e: &Error) -> bool {
    match e {
        Error::Divergence { .. } => true,
        Error::User { source, .. } | Error::InfeasibleStep { source, .. } => is_failure(source),
        _ => false,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if is_failure(&e) {
            CliError::Failed(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_task(path: Option<&Path>, default: fn() -> TaskSpec) -> Result<TaskSpec> {
    match path {
        Some(p) => parse_task(&read(p)?).map_err(|e| CliError::in_file(p, e)),
        None => Ok(default()),
    }
}

fn load_ratings(path: &Path, spec: &TaskSpec) -> Result<RatingsRecord> {
    let rec = parse_ratings(&read(path)?).map_err(|e| CliError::in_file(path, e))?;
    check_task(path, &rec.task_id, spec)?;
    Ok(rec)
}

fn load_trace(path: &Path, spec: &TaskSpec) -> Result<TraceRecord> {
    let rec = parse_trace(&read(path)?).map_err(|e| CliError::in_file(path, e))?;
    check_task(path, &rec.task_id, spec)?;
    Ok(rec)
}

fn check_task(path: &Path, found: &str, spec: &TaskSpec) -> Result<()> {
    if found != spec.task_id() {
        return Err(CliError::Input(format!(
            "{}: file is for task `{found}`, expected `{}`",
            path.display(),
            spec.task_id()
        )));
    }
    Ok(())
}

fn learn_config(opt: &OptimizerArgs, seed: Option<u64>) -> LearnConfig {
    let mut cfg = LearnConfig {
        direction: match opt.direction {
            StepDirection::Newton => Direction::Newton,
            StepDirection::Gradient => Direction::Gradient,
        },
        ..LearnConfig::default()
    };
    if let Some(lr) = opt.lr {
        cfg.learning_rate = lr;
    }
    if let Some(n) = opt.max_iters {
        cfg.max_iters = n;
    }
    if let Some(t) = opt.tol {
        cfg.tolerance = t;
    }
    if let Some(seed) = seed {
        cfg.init = Init::SeededUniform { seed };
    }
    cfg
}

fn emit(
    format: Format,
    text: impl FnOnce() -> String,
    csv: impl FnOnce() -> String,
    machine: &str,
) {
    match format {
        Format::Text => print!("{}", text()),
        Format::Csv => print!("{}", csv()),
        Format::Machine => print!("{machine}"),
    }
}

pub fn learn(args: LearnArgs) -> Result<()> {
    let spec = load_task(args.task.as_deref(), shipped::canonical_task)?;
    let ratings_rec = load_ratings(&args.ratings, &spec)?;
    let ratings = ratings_rec
        .to_ratings(&spec)
        .map_err(|e| CliError::in_file(&args.ratings, e))?;
    let trace_rec = load_trace(&args.trace, &spec)?;
    let trace = trace_rec
        .to_trace(&spec)
        .map_err(|e| CliError::in_file(&args.trace, e))?;
    let cfg = learn_config(&args.opt, args.seed);
    let (weights, diagnostics) = learn_weights(&spec, &ratings, &trace, &cfg)?;
    if !diagnostics.converged {
        eprintln!(
            "warning: not converged after {} iterations (gradient norm {:.3e})",
            diagnostics.iterations, diagnostics.gradient_norm
        );
    }
    let record = WeightsRecord {
        user_id: trace_rec.user_id,
        source_task: spec.task_id().to_string(),
        weights,
        diagnostics: Some(diagnostics),
    };
    let text = serialize_weights(&record);
    if let Some(out) = &args.out {
        write(out, &text)?;
    }
    emit(
        args.format,
        || render::weights_text(&record),
        || render::weights_csv(&record.weights),
        &text,
    );
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let spec = load_task(args.task.as_deref(), shipped::actual_task)?;
    let ratings = load_ratings(&args.ratings, &spec)?
        .to_ratings(&spec)
        .map_err(|e| CliError::in_file(&args.ratings, e))?;
    let weights =
        parse_weights(&read(&args.weights)?).map_err(|e| CliError::in_file(&args.weights, e))?;
    if weights.weights == WeightVector::ZERO {
        eprintln!("note: all weights are zero; every action ties and the lowest id is predicted");
    }
    let graph = std::sync::Arc::new(enumerate_states(&spec)?);
    let table = value_iteration(&graph, &ratings, &weights.weights)?;
    let Some(trace_path) = &args.trace else {
        let plan = table.greedy_sequence();
        let machine = serde_json::to_string(&plan).expect("plan serializes") + "\n";
        emit(
            args.format,
            || render::plan_text(&spec, &plan),
            || render::plan_csv(&plan),
            &machine,
        );
        return Ok(());
    };
    let trace_rec = load_trace(trace_path, &spec)?;
    let trace = trace_rec
        .to_trace(&spec)
        .map_err(|e| CliError::in_file(trace_path, e))?;
    let report = table.rollout(&trace)?;
    let record = ReportRecord {
        user_id: trace_rec.user_id,
        report,
    };
    let text = serialize_report(&record);
    if let Some(out) = &args.out {
        write(out, &text)?;
    }
    emit(
        args.format,
        || render::report_text(&record),
        || render::report_csv(&record.report),
        &text,
    );
    Ok(())
}

fn population(args: &PopulationArgs, seed: u64) -> Vec<prefxfer_core::sim::SimUserProfile> {
    let mix = args.mix.clone().unwrap_or_default();
    let mut users = sample_population(args.users, &mix, seed);
    for u in &mut users {
        u.demo_policy = args.policy;
    }
    users
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let canonical = shipped::canonical_task();
    let actual = shipped::actual_task();
    let profiles = population(&args.population, args.seed);
    let users = simulate_users(&profiles, &canonical, &actual, args.seed)?;
    let dir = &args.out;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    for u in &users {
        for (spec, ratings, trace) in [
            (&canonical, &u.canonical_ratings, &u.canonical_trace),
            (&actual, &u.actual_ratings, &u.actual_trace),
        ] {
            let task = spec.task_id();
            let rec = RatingsRecord::from_normalized(&u.user_id, task, ratings);
            write(
                &dir.join(format!("{}.{task}.ratings.toml", u.user_id)),
                &serialize_ratings(&rec),
            )?;
            let rec = TraceRecord {
                user_id: u.user_id.clone(),
                task_id: task.to_string(),
                actions: trace.actions().to_vec(),
            };
            write(
                &dir.join(format!("{}.{task}.trace.toml", u.user_id)),
                &serialize_trace(&rec),
            )?;
        }
    }
    let profiles_json = serde_json::to_string_pretty(&profiles).expect("profiles serialize") + "\n";
    write(&dir.join("profiles.json"), &profiles_json)?;
    eprintln!("wrote {} users to {}", users.len(), dir.display());
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let canonical = load_task(args.canonical_task.as_deref(), shipped::canonical_task)?;
    let actual = load_task(args.actual_task.as_deref(), shipped::actual_task)?;
    let experiment = ExperimentConfig {
        seed: args.seed,
        trials: args.trials,
        learn: learn_config(&args.opt, None),
        ..Default::default()
    };
    let (users, source) = match &args.corpus {
        Some(dir) => {
            let users = crate::corpus::load(dir, &canonical, &actual)?;
            let user_ids = users.iter().map(|u| u.user_id.clone()).collect();
            (users, UserSource::Corpus { user_ids })
        }
        None => {
            let p = &args.population;
            let profiles = population(p, args.seed);
            let users = simulate_users(&profiles, &canonical, &actual, args.seed)?;
            let source = UserSource::Simulated {
                n_users: p.users,
                mix: p.mix.clone().unwrap_or_default(),
                population_seed: args.seed,
                demo_policy: p.policy,
            };
            (users, source)
        }
    };
    let summary = evaluate_users(&users, &canonical, &actual, &experiment)?;
    let file = ResultsFile::new(
        RunConfig {
            canonical_task: canonical.task_id().to_string(),
            actual_task: actual.task_id().to_string(),
            users: source,
            experiment,
        },
        summary,
    );
    let text = serialize_results(&file);
    if let Some(out) = &args.out {
        write(out, &text)?;
    }
    emit(
        args.format,
        || render::summary_text(&file.summary),
        || prefxfer_core::formats::results_csv(&file.summary),
        &text,
    );
    Ok(())
}

pub fn serve(args: ServeArgs) -> Result<()> {
    if args.snapshot_interval == 0 {
        return Err(CliError::Input("snapshot interval must be positive".into()));
    }
    let config = ServiceConfig {
        hide_anticipation: args.hide_anticipation,
        snapshot_dir: args.snapshot_dir,
        snapshot_interval: Duration::from_secs(args.snapshot_interval),
        ..Default::default()
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Failed(format!("cannot start runtime: {e}")))?;
    runtime
        .block_on(prefxfer_service::serve(args.addr, config))
        .map_err(|e| CliError::Failed(format!("server: {e}")))
}
