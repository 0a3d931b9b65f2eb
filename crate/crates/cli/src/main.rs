use std::io::IsTerminal;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use audiochat_cli::{check_expected_inputs, emit_json, orchestrator, read_script, repl, run_script, CliError, DEFAULT_STORE_DIR};
use audiochat_core::analysis::RuleEngine;
use audiochat_core::evalkit::{
    self, consistency::parse_seeds, expand_seeds, fixtures, run_consistency, run_robustness, HttpTarget, Target,
};
use clap::{Args, Parser, Subcommand};

/// Audio dialogue orchestrator.
#[derive(Debug, Parser)]
#[command(name = "audiochat", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Where sessions and resources live [default: ./audiochat-data; eval uses a temporary directory]
    #[arg(long, global = true)]
    store_dir: Option<PathBuf>,
    /// Tool registry JSON [default: the builtin stubs]
    #[arg(long, global = true)]
    tools: Option<PathBuf>,
    /// Dialogue engine for new sessions: builtin or external
    #[arg(long, global = true, default_value = "builtin")]
    engine: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Interactive loop on stdin: text is a query; :upload <path>, :play <id>, :quit
    Repl,
    /// Run the HTTP service
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Static files served at / (the web chat client)
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Run a JSON dialogue script and print the transcript
    Run {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluation harness
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Write a synthetic upload such as fixture:speech:hello or fixture:image
    Fixture {
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Route paraphrased seed prompts and report accuracy
    Consistency {
        /// Seed file [default: the shipped 50 seeds]
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Base URL of a running service [default: in-process]
        #[arg(long)]
        target: Option<String>,
        /// Also write the expanded corpus here
        #[arg(long)]
        corpus_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate Likert ratings from CSV (task_name,paraphrase_id,rater_id,rating)
    Ratings {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run scenario scripts and report pass/fail per step
    Robustness {
        /// Directory of scenario JSON files [default: the shipped four]
        #[arg(long)]
        scripts: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("audiochat: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn store_dir(c: &Common) -> PathBuf {
    c.store_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_STORE_DIR))
}

/// In-process orchestrator for eval, in a temporary store unless one was given.
fn eval_orchestrator(c: &Common) -> Result<(Option<tempfile::TempDir>, audiochat_core::Orchestrator), CliError> {
    match &c.store_dir {
        Some(d) => Ok((None, orchestrator(d, c.tools.as_deref())?)),
        None => {
            let tmp = tempfile::tempdir().map_err(CliError::io(std::env::temp_dir()))?;
            let o = orchestrator(tmp.path(), c.tools.as_deref())?;
            Ok((Some(tmp), o))
        }
    }
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let c = &cli.common;
    match cli.command {
        Command::Repl => {
            let orch = orchestrator(&store_dir(c), c.tools.as_deref())?;
            if std::io::stdin().is_terminal() {
                eprintln!("type a request, or :upload <path>, :play <id>, :quit");
            }
            let stdin = std::io::stdin().lock();
            repl(&orch, Some(&c.engine), stdin, &mut std::io::stdout())?;
            Ok(0)
        }
        Command::Serve { port, host, ui_dir } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::Usage(format!("bad listen address {host}:{port}: {e}")))?;
            let orch = Arc::new(orchestrator(&store_dir(c), c.tools.as_deref())?);
            for t in orch.registry().tools().iter().filter(|t| !t.enabled) {
                log::warn!("tool {} disabled: {}", t.descriptor.id, t.diagnostics);
            }
            let rt = tokio::runtime::Runtime::new().map_err(CliError::io("tokio runtime"))?;
            eprintln!("listening on http://{addr}");
            rt.block_on(audiochat_server::serve(orch, addr, ui_dir))
                .map_err(CliError::io(addr.to_string()))?;
            Ok(0)
        }
        Command::Run { script, out } => {
            let entries = read_script(&script)?;
            let orch = orchestrator(&store_dir(c), c.tools.as_deref())?;
            let t = run_script(&orch, Some(&c.engine), &entries, &parent_dir(&script))?;
            emit_json(&t, out.as_deref())?;
            let problems = check_expected_inputs(&entries, &t);
            for p in &problems {
                eprintln!("audiochat: {p}");
            }
            Ok(if problems.is_empty() { 0 } else { 2 })
        }
        Command::Fixture { spec, out } => {
            let spec = if spec.starts_with(fixtures::FIXTURE_PREFIX) {
                spec
            } else {
                format!("{}{spec}", fixtures::FIXTURE_PREFIX)
            };
            let bytes = fixtures::fixture_bytes(&spec).map_err(|e| CliError::Usage(e.message))?;
            std::fs::write(&out, bytes).map_err(CliError::io(&out))?;
            Ok(0)
        }
        Command::Eval(cmd) => eval(c, cmd),
    }
}

fn target(c: &Common, url: Option<&str>) -> Result<(Option<tempfile::TempDir>, Box<dyn Target>), CliError> {
    match url {
        Some(u) => Ok((None, Box::new(HttpTarget::new(u)?))),
        None => {
            let (tmp, o) = eval_orchestrator(c)?;
            Ok((tmp, Box::new(o)))
        }
    }
}

fn eval(c: &Common, cmd: EvalCommand) -> Result<i32, CliError> {
    match cmd {
        EvalCommand::Consistency {
            seeds,
            k,
            target: url,
            corpus_out,
            out,
        } => {
            let (raw, base) = match &seeds {
                Some(p) => (std::fs::read_to_string(p).map_err(CliError::io(p))?, parent_dir(p)),
                None => (evalkit::SHIPPED_SEEDS.to_string(), PathBuf::from(".")),
            };
            let seeds = parse_seeds(&raw)?;
            let corpus = expand_seeds(&seeds, k, &RuleEngine::default()).map_err(|e| CliError::Usage(e.message))?;
            if let Some(p) = &corpus_out {
                emit_json(&corpus, Some(p))?;
            }
            let (_tmp, t) = target(c, url.as_deref())?;
            let report = run_consistency(&corpus, t.as_ref(), &base);
            emit_json(&report, out.as_deref())?;
            Ok(if report.aborted.is_some() { 2 } else { 0 })
        }
        EvalCommand::Ratings { csv, out } => {
            let f = std::fs::File::open(&csv).map_err(CliError::io(&csv))?;
            let (records, bad_rows) = evalkit::read_ratings_csv(f)?;
            let mut report = evalkit::aggregate_ratings(&records);
            report.rejected += bad_rows;
            emit_json(&report, out.as_deref())?;
            Ok(0)
        }
        EvalCommand::Robustness {
            scripts,
            target: url,
            out,
        } => {
            let (scripts, base) = match &scripts {
                Some(d) => (evalkit::load_scripts(d)?, d.clone()),
                None => (evalkit::robustness::shipped_scripts(), PathBuf::from(".")),
            };
            let (_tmp, t) = target(c, url.as_deref())?;
            let report = run_robustness(&scripts, t.as_ref(), &base)?;
            emit_json(&report, out.as_deref())?;
            Ok(0)
        }
    }
}
