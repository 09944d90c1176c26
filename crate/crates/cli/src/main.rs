use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aga_core::embedding::Embedder;
use aga_core::gateway::{
    parse_score_response, Category, Gateway, GatewayError, HttpBackend, PromptRequest,
};
use aga_core::policy::{PolicyError, PolicyStore, PolicyStoreConfig};
use aga_core::report::{
    build_evaluator_prompt, run_ablation, ActivityCurve, EvaluatorInput, EvaluatorPrompt,
    RelationshipMap, ReportError,
};
use aga_core::scenario::{ConfigError, HouseholdScenario, Scenario, TownScenario};
use aga_core::sim::{
    run_household_day, run_town, ActivityLedger, SimError, SimulationConfig, SimulationReport,
    Toggles,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

#[derive(Parser)]
#[command(
    name = "aga",
    version,
    about = "Deterministic generative-agent simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a town or household scenario and write its report.
    Run(RunArgs),
    /// Run the four ablation arms and print the token table as CSV.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Run the arms on separate threads.
        #[arg(long)]
        parallel_arms: bool,
    },
    /// Write the relationship score matrix as CSV.
    ExportRelmap {
        #[command(flatten)]
        run: RunArgs,
        /// Read a saved town report instead of running the scenario.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario repeatedly and write cumulative distinct activities as CSV.
    ExportActivity {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10)]
        runs: u32,
        /// Use seed, seed+1, ... instead of the same seed every run.
        #[arg(long)]
        vary_seed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build evaluator questionnaires for schedules and dialogues.
    EvalPrompts {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 1)]
    days: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,
    /// JSONL policy store, read if present and written back after the run.
    #[arg(long)]
    policy_store: Option<PathBuf>,
    #[arg(long)]
    no_lifestyle_policy: bool,
    #[arg(long)]
    no_social_memory: bool,
    #[arg(long)]
    mind_wandering: bool,
    /// Where to write the JSON report (stdout if omitted).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Script(GatewayError::BackendError(_))) => 3,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Policy(PolicyError::StoreFormatError { .. }) => 2,
            CliError::Gateway(_) => 3,
            CliError::Sim(e) if e.is_backend_failure() => 3,
            CliError::Sim(SimError::Config(_)) => 2,
            CliError::Sim(SimError::Gateway(_)) => 3,
            _ => 1,
        }
    }
}

impl RunArgs {
    fn config(&self) -> SimulationConfig {
        SimulationConfig {
            days: self.days,
            seed: self.seed,
            toggles: Toggles {
                lifestyle_policy: !self.no_lifestyle_policy,
                social_memory: !self.no_social_memory,
                mind_wandering: self.mind_wandering,
            },
            ..SimulationConfig::default()
        }
    }

    fn load(&self) -> Result<Scenario, CliError> {
        Ok(Scenario::load(&self.scenario)?)
    }

    fn town(&self) -> Result<TownScenario, CliError> {
        match self.load()? {
            Scenario::Town(t) => Ok(t),
            Scenario::Household(_) => Err(CliError::Usage(format!(
                "{} is a household scenario; this command needs a town",
                self.scenario.display()
            ))),
        }
    }

    fn policy_store(&self, config: &PolicyStoreConfig) -> Result<PolicyStore, CliError> {
        match &self.policy_store {
            Some(path) if path.exists() => Ok(PolicyStore::load(
                path,
                config.clone(),
                Embedder::default(),
            )?),
            _ => Ok(PolicyStore::new(config.clone(), Embedder::default())?),
        }
    }

    fn save_store(&self, store: &PolicyStore) -> Result<(), CliError> {
        if let Some(path) = &self.policy_store {
            store.save(path)?;
        }
        Ok(())
    }
}

fn gateway(backend: BackendKind, scenario: &Scenario) -> Result<Gateway, CliError> {
    Ok(match backend {
        BackendKind::Mock => Gateway::new(scenario.mock_backend()?),
        BackendKind::Http => Gateway::new(HttpBackend::from_env()?),
    })
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn run_town_once(args: &RunArgs, town: &TownScenario) -> Result<SimulationReport, CliError> {
    let config = args.config();
    let gateway = gateway(args.backend, &Scenario::Town(town.clone()))?;
    let mut store = args.policy_store(&config.policy)?;
    let report = run_town(
        town,
        &config,
        &gateway,
        &mut store,
        &mut ActivityLedger::new(Embedder::default()),
    )?;
    args.save_store(&store)?;
    Ok(report)
}

fn run_household(args: &RunArgs, household: &HouseholdScenario) -> Result<String, CliError> {
    let config = args.config();
    let gateway = gateway(args.backend, &Scenario::Household(household.clone()))?;
    let mut store = args.policy_store(&config.policy)?;
    let policy = config.toggles.lifestyle_policy.then_some(&mut store);
    let report = run_household_day(household, &gateway, policy)?;
    args.save_store(&store)?;
    Ok(report.to_json())
}

fn saved_or_fresh(args: &RunArgs, from: Option<&Path>) -> Result<SimulationReport, CliError> {
    match from {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("{} is not a town report: {e}", path.display()))
            })
        }
        None => run_town_once(args, &args.town()?),
    }
}

fn eval_prompts(report: &SimulationReport) -> Result<Vec<EvaluatorPrompt>, CliError> {
    let mut prompts = Vec::new();
    for agent in &report.agents {
        let schedule: Vec<_> = report
            .schedule
            .iter()
            .filter(|e| e.agent == agent.name && !e.activity.is_empty())
            .cloned()
            .collect();
        if !schedule.is_empty() {
            prompts.push(build_evaluator_prompt(EvaluatorInput::Schedule(&schedule))?);
        }
    }
    for dialogue in &report.dialogues {
        prompts.push(build_evaluator_prompt(EvaluatorInput::Dialogue(dialogue))?);
    }
    Ok(prompts)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let text = match args.load()? {
                Scenario::Town(town) => run_town_once(&args, &town)?.to_json(),
                Scenario::Household(household) => run_household(&args, &household)?,
            };
            write_out(args.report.as_deref(), &text)
        }
        Command::Ablate { run, parallel_arms } => {
            let town = run.town()?;
            let config = run.config();
            let warmed = match &run.policy_store {
                Some(path) if path.exists() => Some(run.policy_store(&config.policy)?),
                _ => None,
            };
            let scenario = Scenario::Town(town.clone());
            let backend = run.backend;
            let make = || match backend {
                BackendKind::Mock => Ok(Gateway::new(scenario.mock_backend()?)),
                BackendKind::Http => Ok(Gateway::new(
                    HttpBackend::from_env().map_err(ConfigError::Script)?,
                )),
            };
            let table = run_ablation(&town, &config, &make, warmed.as_ref(), parallel_arms)?;
            if table.warmed_up {
                eprintln!("note: no warmed policy store given; ran a warm-up pass first");
            }
            print!("{}", table.to_csv()?);
            if let Some(path) = &run.report {
                let text = serde_json::to_string_pretty(&table).expect("table serializes");
                write_out(Some(path), &text)?;
            }
            Ok(())
        }
        Command::ExportRelmap { run, from, out } => {
            let report = saved_or_fresh(&run, from.as_deref())?;
            let map = RelationshipMap::from_report(&report);
            write_out(out.as_deref(), &map.to_csv()?)
        }
        Command::ExportActivity {
            run,
            runs,
            vary_seed,
            out,
        } => {
            if runs == 0 {
                return Err(CliError::Usage("--runs must be at least 1".into()));
            }
            let town = run.town()?;
            let scenario = Scenario::Town(town.clone());
            let mut ledger = ActivityLedger::new(Embedder::default());
            for i in 0..runs {
                let mut config = run.config();
                if vary_seed {
                    config.seed = config.seed.wrapping_add(u64::from(i));
                }
                let gateway = gateway(run.backend, &scenario)?;
                let mut store = PolicyStore::new(config.policy.clone(), Embedder::default())?;
                run_town(&town, &config, &gateway, &mut store, &mut ledger)?;
            }
            let curve = ActivityCurve::from_history(ledger.history());
            write_out(out.as_deref(), &curve.to_csv()?)
        }
        Command::EvalPrompts { run, from, out } => {
            let report = saved_or_fresh(&run, from.as_deref())?;
            let prompts = eval_prompts(&report)?;
            let value = if run.backend == BackendKind::Http {
                let judge = Gateway::new(HttpBackend::from_env()?);
                let mut rated = Vec::new();
                for p in &prompts {
                    let reply = judge.complete(
                        &PromptRequest::new(Category::Evaluator, p.body.clone()).agent(&p.subject),
                    )?;
                    let verdict = match parse_score_response(&reply.text) {
                        Ok((score, reason)) => json!({"score": score, "reason": reason}),
                        Err(e) => json!({"error": e.to_string(), "raw": reply.text}),
                    };
                    rated.push(json!({"prompt": p, "verdict": verdict}));
                }
                json!(rated)
            } else {
                json!(prompts)
            };
            let text = serde_json::to_string_pretty(&value).expect("prompts serialize");
            write_out(out.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aga: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
