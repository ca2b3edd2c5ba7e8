use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use gazegrammar_core::harness::{run_gaze_eval, run_task_eval, NoiseModel, TaskKind};

use crate::config::{Config, ConfigError};
use crate::output;
use crate::replay::{replay_file, ReplayError};
use crate::server::{serve, ServeOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gazegrammar", version, about = "Gaze-driven assistive robot pipeline: experiments, replay and live sessions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseChoice {
    /// Noise from the config file.
    Default,
    /// No noise at all.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskChoice {
    Pp,
    Ppp,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Gaze-accuracy experiment: 10 random targets, 50 samples each, per subject.
    GazeEval {
        /// Config file; falls back to $GAZE_GRAMMAR_CONFIG, then built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory for trials.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = NoiseChoice::Default)]
        noise: NoiseChoice,
        /// Number of simulated subjects; subject k uses seed + k - 1.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        subjects: u32,
    },
    /// Pick-and-place (pp) or pick-pour-place (ppp) task protocol with a scripted gaze agent.
    TaskEval {
        #[arg(long, value_enum)]
        task: TaskChoice,
        #[arg(long, default_value_t = 5)]
        repeats: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Config file; falls back to $GAZE_GRAMMAR_CONFIG, then built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for trials.csv, summary.json and events.ndjson.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured grasp failure probability.
        #[arg(long)]
        p_grasp_fail: Option<f64>,
        /// Override the configured probability of dropping the object while pouring.
        #[arg(long)]
        p_drop_during_pour: Option<f64>,
        /// Collapse simulated action durations to zero.
        #[arg(long)]
        fast: bool,
    },
    /// Run the WebSocket session service.
    Serve {
        /// Config file; falls back to $GAZE_GRAMMAR_CONFIG, then built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: String,
        /// Zero-duration actions and no wall-clock pacing.
        #[arg(long)]
        fast: bool,
        /// Write one message log per session into this directory.
        #[arg(long)]
        record_dir: Option<PathBuf>,
    },
    /// Re-run a recorded session log and compare every outgoing message.
    Replay {
        #[arg(long)]
        session_log: PathBuf,
    },
    /// Print the effective configuration as JSON.
    PrintConfig {
        /// Config file; falls back to $GAZE_GRAMMAR_CONFIG, then built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| runtime(anyhow::anyhow!("cannot create output directory {}: {e}", out.display())))
}

fn execute(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::GazeEval {
            config,
            seed,
            out,
            noise,
            subjects,
        } => {
            let cfg = Config::load_or_default(config.as_deref())?;
            let r = cfg.resolve()?;
            let noise = match noise {
                NoiseChoice::Default => r.noise,
                NoiseChoice::Zero => NoiseModel::zero(),
            };
            let runs = (0..subjects as u64)
                .map(|k| run_gaze_eval(&noise, &r.gaze_eval, seed.wrapping_add(k)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(runtime)?;
            let summary = output::summarize_gaze(&noise, &runs).map_err(runtime)?;
            prepare_out(&out)?;
            output::write_gaze_trials(&out.join("trials.csv"), &runs).map_err(runtime)?;
            output::write_json(&out.join("summary.json"), &summary).map_err(runtime)?;
            println!(
                "gaze-eval: {} trials, mean error {:.4} m (sd {:.4} m)",
                summary.overall.n, summary.overall.mean_m, summary.overall.sd_m
            );
            Ok(())
        }
        Cmd::TaskEval {
            task,
            repeats,
            seed,
            config,
            out,
            p_grasp_fail,
            p_drop_during_pour,
            fast,
        } => {
            let mut cfg = Config::load_or_default(config.as_deref())?;
            if let Some(p) = p_grasp_fail {
                cfg.failures.p_grasp_fail = p;
            }
            if let Some(p) = p_drop_during_pour {
                cfg.failures.p_drop_during_pour = p;
            }
            if repeats == 0 {
                return Err(CliError::Usage("--repeats must be at least 1".into()));
            }
            let r = cfg.resolve()?;
            let mut pcfg = r.pipeline;
            if fast {
                pcfg.time_scale = 0.0;
            }
            let kind = match task {
                TaskChoice::Pp => TaskKind::Pp,
                TaskChoice::Ppp => TaskKind::Ppp,
            };
            let result = run_task_eval(kind, repeats, &r.scene, &pcfg, seed).map_err(runtime)?;
            prepare_out(&out)?;
            output::write_task_trials(&out.join("trials.csv"), kind, &result).map_err(runtime)?;
            output::write_json(
                &out.join("summary.json"),
                &output::TaskEvalSummary {
                    seed,
                    summary: &result.summary,
                },
            )
            .map_err(runtime)?;
            output::write_events(&out.join("events.ndjson"), &result.events).map_err(runtime)?;
            println!("task-eval {}: {} repeats", kind.name(), repeats);
            for a in &result.summary.per_action {
                println!("  {:<7} {:6.1}%", a.action, a.success_pct);
            }
            println!("  {:<7} {:6.1}%", "full", result.summary.full_success_pct);
            Ok(())
        }
        Cmd::Serve {
            config,
            addr,
            fast,
            record_dir,
        } => {
            let cfg = Config::load_or_default(config.as_deref())?;
            // Fail fast on a config the sessions could not use.
            cfg.resolve()?;
            let opts = ServeOptions {
                fast,
                record_dir,
                ..ServeOptions::new(cfg)
            };
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| runtime(anyhow::anyhow!("cannot listen on {addr}: {e}")))?;
                let local = listener.local_addr().map_err(runtime)?;
                println!("listening on {local}");
                serve(listener, opts, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
                .map_err(runtime)
            })
        }
        Cmd::Replay { session_log } => match replay_file(&session_log) {
            Ok(report) => match &report.divergence {
                None => {
                    println!(
                        "replay identical: {} inputs, {} outputs",
                        report.inputs, report.outputs_compared
                    );
                    Ok(())
                }
                Some(d) => {
                    let show = |s: &Option<String>| s.clone().unwrap_or_else(|| "<missing>".into());
                    Err(runtime(anyhow::anyhow!(
                        "replay diverged at output {}\n  recorded: {}\n  replayed: {}",
                        d.index,
                        show(&d.expected),
                        show(&d.actual)
                    )))
                }
            },
            Err(e @ ReplayError::Io { .. }) => Err(CliError::Usage(e.to_string())),
            Err(e) => Err(runtime(e)),
        },
        Cmd::PrintConfig { config } => {
            let cfg = Config::load_or_default(config.as_deref())?;
            let text = serde_json::to_string_pretty(&cfg).map_err(runtime)?;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(runtime(e)),
                _ => Ok(()),
            }
        }
    }
}
