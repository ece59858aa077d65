use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use dataloop::config::ApiConfig;
use dataloop::eval::{self, AblationMode, AblationScenario, PassRateResult};
use dataloop::knowledge::KnowledgeBase;
use dataloop::llm::{ApproxTokenCounter, OpenAiClient};
use dataloop::profiler::{ingest_csv, profile, render_profile_text, IngestOptions};
use dataloop::{Error, Result};

#[derive(Parser)]
#[command(name = "dataloop", version, about = "Conversational data analysis with self-correcting code agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
    /// Profile a CSV file.
    Profile {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Seeded pass-rate ablation with and without the inspector.
    Ablation {
        #[arg(long, default_value_t = 454)]
        instructions: usize,
        #[arg(long, default_value_t = 0.6806)]
        p0: f64,
        #[arg(long, default_value_t = 0.6)]
        pr: f64,
        #[arg(long = "max-attempts", short = 't', default_value_t = 5)]
        max_attempts: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds to run.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        csv: bool,
    },
    /// Pass rate and improvement from raw counts.
    PassRate {
        passed: usize,
        total: usize,
        #[arg(long)]
        baseline: Option<f64>,
    },
    /// How many API annotations fit in a context window.
    Capacity {
        #[arg(long)]
        context: u64,
        #[arg(long, default_value_t = 0)]
        reserved: u64,
        /// Average annotation length in tokens.
        #[arg(long, conflicts_with = "corpus")]
        avg: Option<u64>,
        /// File of annotations separated by blank lines.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// API-selection accuracy over nested API buckets.
    Selection {
        /// Model endpoint configuration; required unless --dry-run.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only print bucket sizes and instruction counts.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Classification accuracy from a confusion matrix.
    Accuracy { tp: u64, tn: u64, fp: u64, fn_: u64 },
    /// Mean squared error of two comma-separated sequences.
    Mse { y: String, y_hat: String },
    /// Manage the knowledge base.
    Knowledge {
        #[arg(long, default_value = "data/knowledge")]
        dir: PathBuf,
        #[command(subcommand)]
        action: KnowledgeAction,
    },
}

#[derive(Subcommand)]
enum KnowledgeAction {
    List,
    Add {
        description: String,
        /// File holding the code; stdin when omitted.
        #[arg(long)]
        code: Option<PathBuf>,
    },
    Remove {
        id: String,
    },
    Match {
        instruction: String,
        #[arg(long, default_value_t = dataloop::knowledge::DEFAULT_THRESHOLD)]
        theta: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<ApiConfig> {
    match path {
        Some(p) => ApiConfig::load(p),
        None => Ok(ApiConfig::default()),
    }
}

fn parse_seq(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Domain(format!("{t:?}: {e}"))))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config } => {
            let config = load_config(config.as_ref())?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(dataloop::server::serve(config))?;
        }
        Command::DefaultConfig => {
            print!("{}", toml::to_string_pretty(&ApiConfig::default()).map_err(|e| Error::Config(e.to_string()))?);
        }
        Command::Profile { path, json } => {
            let table = ingest_csv(&path, &IngestOptions::default())?;
            let p = profile(&table)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&p)?);
            } else {
                print!("{}", render_profile_text(&p));
            }
        }
        Command::Ablation { instructions, p0, pr, max_attempts, seed, seeds, csv } => {
            let mut rows = Vec::new();
            for s in seed..seed + seeds.max(1) {
                let scenario = AblationScenario {
                    n_instructions: instructions,
                    first_attempt_success_rate: p0,
                    repair_success_rate: pr,
                    seed: s,
                    agents_mode: AblationMode::ProgrammerOnly,
                    max_attempts,
                };
                let (base, combined) = eval::run_ablation_pair(&scenario)?;
                rows.push((format!("seed {s} programmer_only"), base));
                rows.push((format!("seed {s} programmer_plus_inspector"), combined));
            }
            let view: Vec<(&str, &PassRateResult)> = rows.iter().map(|(n, r)| (n.as_str(), r)).collect();
            if csv {
                print!("{}", eval::ablation_csv(&view)?);
            } else {
                print!("{}", eval::ablation_markdown(&view));
            }
        }
        Command::PassRate { passed, total, baseline } => {
            let mut r = PassRateResult::from_counts(passed, total)?;
            if let Some(b) = baseline {
                r = r.with_baseline(b / 100.0)?;
            }
            print!("{}", eval::ablation_markdown(&[("counts", &r)]));
        }
        Command::Capacity { context, reserved, avg, corpus } => {
            let avg = match (avg, corpus) {
                (Some(a), _) => a,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path)?;
                    let blocks: Vec<&str> = text.split("\n\n").map(str::trim).filter(|b| !b.is_empty()).collect();
                    let a = eval::average_tokens(&blocks, &ApproxTokenCounter::default())?;
                    println!("annotations: {}  average tokens: {a}", blocks.len());
                    a
                }
                (None, None) => return Err(Error::Domain("pass --avg or --corpus".into())),
            };
            println!("capacity: {}", eval::estimate_api_capacity(context, reserved, avg)?);
        }
        Command::Selection { config, step, seed, dry_run, csv } => {
            let (apis, trials) =
                eval::synthetic_selection_fixture(&eval::DEFAULT_BUCKET_INSTRUCTIONS, step, seed);
            let buckets = eval::nested_buckets(&apis, step);
            if dry_run {
                println!("| APIs | instructions |\n|---:|---:|");
                for b in &buckets {
                    let n = trials.iter().filter(|t| b.iter().any(|a| a.name == t.correct_api)).count();
                    println!("| {} | {n} |", b.len());
                }
                return Ok(());
            }
            let config = config.ok_or_else(|| Error::Config("--config is required for a live run".into()))?;
            let backend = OpenAiClient::new(ApiConfig::load(&config)?.model)?;
            let results = eval::run_selection_accuracy(&buckets, &trials, &backend)?;
            if csv {
                print!("{}", eval::selection_csv(&results)?);
            } else {
                print!("{}", eval::selection_markdown(&results));
            }
        }
        Command::Accuracy { tp, tn, fp, fn_ } => println!("{}", eval::accuracy(tp, tn, fp, fn_)?),
        Command::Mse { y, y_hat } => println!("{}", eval::mse(&parse_seq(&y)?, &parse_seq(&y_hat)?)?),
        Command::Knowledge { dir, action } => {
            let kb = KnowledgeBase::open_dir(&dir)?;
            match action {
                KnowledgeAction::List => {
                    for e in kb.list_entries() {
                        println!("{}\t{}", e.id, e.description);
                    }
                }
                KnowledgeAction::Add { description, code } => {
                    let code = match code {
                        Some(p) => std::fs::read_to_string(p)?,
                        None => std::io::read_to_string(std::io::stdin())?,
                    };
                    println!("{}", kb.add_entry(&description, &code)?);
                }
                KnowledgeAction::Remove { id } => kb.remove_entry(&id)?,
                KnowledgeAction::Match { instruction, theta, config } => {
                    let embedder = load_config(config.as_ref())?.embedder.build();
                    let m = kb.match_instruction(&instruction, theta, embedder.as_ref())?;
                    for (id, score) in &m.all_scores {
                        println!("{id}\t{score:.6}");
                    }
                    match m.matched {
                        Some(hit) => println!("matched {} ({:.6})", hit.entry.id, hit.score),
                        None => println!("no match above {theta}"),
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
