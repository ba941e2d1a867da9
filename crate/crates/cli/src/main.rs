use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use d2d_ec::effective_capacity::optimal_rate_search;
use d2d_ec::experiment::{
    emit, emit_to_path, run_sweep, ExperimentConfig, OutputFormat, OutputRow, RunMeta, SweepScale,
    SweepSpec, SweepVariable,
};
use d2d_ec::link_model::{ScenarioKind, ThresholdRule};
use d2d_ec::mode_selection::ModeSelectParams;
use d2d_ec::Error;

#[derive(Parser)]
#[command(
    name = "d2d-ec",
    version,
    about = "Effective capacity of a D2D link under mode selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form EC at the configured rate and sigma_T, one row per theta.
    Analytic(Common),
    /// Run the configured sweep.
    Sweep(Common),
    /// Monte Carlo EC next to the closed form, one row per theta.
    Simulate(SimulateArgs),
    /// Search the rate grid for the EC-maximizing rate, one block per theta.
    Optrate(Common),
}

#[derive(Args)]
struct Common {
    /// Config file (`key = value` lines); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override master_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<Kind>,
    /// Use 2^(r/B) - 1 for the cellular threshold instead of 2^(2r/B) - 1.
    #[arg(long)]
    paper_literal_threshold: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    path_len: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Overlay,
    Underlay,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config() {
        2
    } else if err.is_io() {
        4
    } else {
        3
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(kind) = common.scenario {
        cfg.scenario_kind = match kind {
            Kind::Overlay => ScenarioKind::Overlay,
            Kind::Underlay => ScenarioKind::Underlay,
        };
    }
    if common.paper_literal_threshold {
        cfg.threshold_rule = ThresholdRule::PaperLiteral;
    }
    Ok(cfg)
}

fn per_theta(cfg: &mut ExperimentConfig) {
    cfg.sweep = SweepSpec {
        variable: SweepVariable::Theta,
        from: None,
        to: None,
        steps: cfg.thetas.len(),
        scale: SweepScale::Linear,
        values: Some(cfg.thetas.clone()),
    };
}

fn write(common: &Common, cfg: &ExperimentConfig, rows: &[OutputRow]) -> Result<(), Error> {
    let format = match common.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let meta = RunMeta::for_config(cfg);
    match &common.out {
        Some(path) => emit_to_path(path, rows, &meta, format),
        None => emit(
            &mut io::stdout().lock(),
            rows,
            &meta,
            format,
            Path::new("<stdout>"),
        ),
    }
}

fn report_optrate(cfg: &ExperimentConfig) -> Result<(), Error> {
    let scenario = cfg.scenario()?;
    let ms = ModeSelectParams::from_sigma_t(cfg.priors, scenario.pathloss_gap_db(), cfg.sigma_t)?;
    for &theta in &cfg.thetas {
        let s = optimal_rate_search(
            &scenario,
            &cfg.radio,
            &ms,
            cfg.scenario_kind,
            cfg.threshold_rule,
            theta,
            &cfg.rate_grid,
        )?;
        let note = if s.interior {
            ""
        } else {
            " (on the grid boundary)"
        };
        eprintln!(
            "theta={theta:e}  r*={}  EC*={:.6}{note}",
            s.r_star, s.ec_star
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Analytic(common) => {
            let mut cfg = load(&common)?;
            per_theta(&mut cfg);
            cfg.mc.enabled = false;
            cfg.validate()?;
            let rows = run_sweep(&cfg)?;
            write(&common, &cfg, &rows)
        }
        Command::Sweep(common) => {
            let cfg = load(&common)?;
            cfg.validate()?;
            let rows = run_sweep(&cfg)?;
            write(&common, &cfg, &rows)
        }
        Command::Simulate(args) => {
            let mut cfg = load(&args.common)?;
            per_theta(&mut cfg);
            cfg.mc.enabled = true;
            if let Some(n) = args.n_paths {
                cfg.mc.n_paths = n;
            }
            if let Some(n) = args.path_len {
                cfg.mc.path_len = n;
            }
            cfg.validate()?;
            let rows = run_sweep(&cfg)?;
            write(&args.common, &cfg, &rows)
        }
        Command::Optrate(common) => {
            let mut cfg = load(&common)?;
            cfg.validate()?;
            cfg.sweep = SweepSpec {
                variable: SweepVariable::Rate,
                from: None,
                to: None,
                steps: 0,
                scale: SweepScale::Linear,
                values: Some(cfg.rate_grid.points()?),
            };
            cfg.optrate_enabled = true;
            cfg.mc.enabled = false;
            cfg.validate()?;
            report_optrate(&cfg)?;
            let rows = run_sweep(&cfg)?;
            write(&common, &cfg, &rows)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
