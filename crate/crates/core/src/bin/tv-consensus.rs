use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use tv_consensus::commands::{cmd_check, cmd_design, cmd_simulate, CommandOutput, Timings};
use tv_consensus::config::ExperimentConfig;
use tv_consensus::scenarios::{self, Suite};
use tv_consensus::suite::cmd_paper;
use tv_consensus::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Consensus gain design, certificates and simulation over time-varying graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design the feedback gain and print its certificate.
    Design(RunArgs),
    /// Check assumptions, observability and the consensus theorems.
    Check(RunArgs),
    /// Simulate the closed-loop network and write trace CSVs.
    Simulate(RunArgs),
    /// Run the built-in reproduction suite.
    Paper {
        #[arg(long, default_value = "all", value_parser = ["example1", "example2", "all"])]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario name, e.g. example1-period4.
    #[arg(long)]
    scenario: Option<String>,
    /// Directory for the report and CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use this single seed for the simulation runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Window starts scanned for aperiodic schedules.
    #[arg(long)]
    scan_k0: Option<usize>,
    /// Append wall-clock timings to the report.
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    tol_spec: Option<f64>,
    #[arg(long)]
    tol_jordan: Option<f64>,
    #[arg(long)]
    tol_orth: Option<f64>,
    #[arg(long)]
    tol_row: Option<f64>,
    #[arg(long)]
    tol_conn: Option<f64>,
    #[arg(long)]
    tol_psd: Option<f64>,
    #[arg(long)]
    tol_lyap: Option<f64>,
    #[arg(long)]
    tol_are: Option<f64>,
    #[arg(long)]
    tol_pd: Option<f64>,
    #[arg(long)]
    tol_margin: Option<f64>,
    #[arg(long)]
    tol_hinf: Option<f64>,
    #[arg(long)]
    tol_err: Option<f64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => scenarios::by_name(name)
                .ok_or_else(|| Error::Config(format!("unknown scenario `{name}`")))?,
            (None, None) => unreachable!("clap requires one of them"),
        };
        if let Some(seed) = self.seed {
            cfg.simulation.seeds = vec![seed];
        }
        if let Some(k) = self.scan_k0 {
            cfg.analysis.k0_scan = k;
        }
        let overrides = [
            ("spec", self.tol_spec),
            ("jordan", self.tol_jordan),
            ("orth", self.tol_orth),
            ("row", self.tol_row),
            ("conn", self.tol_conn),
            ("psd", self.tol_psd),
            ("lyap", self.tol_lyap),
            ("are", self.tol_are),
            ("pd", self.tol_pd),
            ("margin", self.tol_margin),
            ("hinf", self.tol_hinf),
            ("err", self.tol_err),
        ];
        for (name, value) in overrides {
            if let Some(v) = value {
                cfg.set_tolerance(name, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> Option<PathBuf> {
        self.out.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
    }
}

fn emit(out: &CommandOutput, dir: Option<&Path>) -> Result<()> {
    let text = out.stdout();
    print!("{text}");
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &text)?;
        for (name, contents) in &out.files {
            std::fs::write(dir.join(name), contents)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    let start = Instant::now();
    let (mut out, dir, timings) = match cli.command {
        Command::Paper { suite, out } => {
            let suite = Suite::parse(&suite).expect("validated by clap");
            (cmd_paper(suite), out, false)
        }
        Command::Design(args) => {
            let cfg = args.load()?;
            (cmd_design(&cfg)?, args.out_dir(&cfg), args.timings)
        }
        Command::Check(args) => {
            let cfg = args.load()?;
            let mut t = Timings::default();
            let mut out = cmd_check(&cfg, &mut t)?;
            if args.timings {
                out.report.extend("", &t.to_report());
            }
            (out, args.out_dir(&cfg), args.timings)
        }
        Command::Simulate(args) => {
            let cfg = args.load()?;
            let mut t = Timings::default();
            let mut out = cmd_simulate(&cfg, &mut t)?;
            if args.timings {
                out.report.extend("", &t.to_report());
            }
            (out, args.out_dir(&cfg), args.timings)
        }
    };
    if timings {
        out.report
            .text("timing.total_ms", format!("{:.3}", start.elapsed().as_secs_f64() * 1e3));
    }
    emit(&out, dir.as_deref())?;
    Ok(out.exit_code)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
