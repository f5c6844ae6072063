//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cutlab_core::models::catalog;

use crate::config::{StudyConfig, StudyKind};
use crate::error::{HarnessError, Result};
use crate::oracle::oracle_report;
use crate::report::{emit_report, Format};
use crate::study::run_study;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cutlab",
    version,
    about = "Convergence studies for spectrally cut-off Hamiltonians"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model catalog.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
    /// Run convergence studies.
    Study {
        #[command(subcommand)]
        action: StudyAction,
    },
    /// Print closed-form values for the commuting model as CSV.
    Oracle(OracleArgs),
}

#[derive(Debug, Subcommand)]
pub enum ModelsAction {
    /// Print the catalog as JSON.
    List,
}

#[derive(Debug, Subcommand)]
pub enum StudyAction {
    /// Run one study and write `<id>.csv` and `<id>.json`.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML study config; other flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<StudyKind>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of cutoff grid points.
    #[arg(long = "L-count")]
    pub l_count: Option<usize>,
    #[arg(long)]
    pub k_max: Option<u32>,
    /// Output directory (default `$CUTLAB_OUT` or `cutlab-out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub kind: StudyKind,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long = "L-count")]
    pub l_count: Option<usize>,
    #[arg(long)]
    pub k_max: Option<u32>,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::load(path)?,
            None => {
                let (Some(kind), Some(model), Some(dim)) = (self.kind, &self.model, self.dim) else {
                    return Err(HarnessError::Config(
                        "either --config or all of --kind, --model and --dim are required".into(),
                    ));
                };
                StudyConfig::quick(kind, model, dim)
            }
        };
        if let Some(kind) = self.kind {
            cfg.kind = kind;
        }
        if let Some(model) = &self.model {
            cfg.model = model.clone();
        }
        if let Some(dim) = self.dim {
            cfg.dims = vec![dim];
        }
        if let Some(n) = self.l_count {
            cfg.grid.count = n;
        }
        if let Some(k) = self.k_max {
            cfg.k_max = k;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: Cli, out: &mut impl Write, err: &mut impl Write) -> Result<i32> {
    match cli.command {
        Command::Models {
            action: ModelsAction::List,
        } => {
            writeln!(out, "{}", serde_json::to_string_pretty(&catalog())?).map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Study {
            action: StudyAction::Run(args),
        } => {
            let cfg = args.to_config()?;
            let report = run_study(&cfg)?;
            let paths = emit_report(&report, &cfg.output_dir(), &[Format::Csv, Format::Json])?;
            let (converged, not_converged, skipped) = report.counts();
            for p in &paths {
                writeln!(out, "wrote {}", p.display()).map_err(io_err)?;
            }
            writeln!(
                out,
                "{}: {converged} converged, {not_converged} not converged, {skipped} skipped",
                report.study_id
            )
            .map_err(io_err)?;
            for s in report.series.iter().filter(|s| s.verdict.is_not_converged()) {
                if let crate::report::Verdict::NotConverged { reason } = &s.verdict {
                    writeln!(
                        err,
                        "not converged: {} [{} {}]: {reason}",
                        s.study, s.f_kind, s.f_params
                    )
                    .map_err(io_err)?;
                }
            }
            Ok(if report.any_not_converged() {
                EXIT_NOT_CONVERGED
            } else {
                EXIT_OK
            })
        }
        Command::Oracle(args) => {
            let mut cfg = StudyConfig::quick(args.kind, "commuting", args.dim);
            if let Some(n) = args.l_count {
                cfg.grid.count = n;
            }
            if let Some(k) = args.k_max {
                cfg.k_max = k;
            }
            let report = oracle_report(&cfg)?;
            write!(out, "{}", report.to_csv()).map_err(io_err)?;
            Ok(EXIT_OK)
        }
    }
}

fn io_err(e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}
