use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vlasov_hermite::runner::{
    self, load_preset, parse_with_overrides, ExperimentConfig, PRESETS,
};
use vlasov_hermite::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vlasov-hermite",
    version,
    about = "Hermite/finite-volume Vlasov-Poisson solver in the quasineutral regime"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write diagnostics, snapshots and metadata.
    Run(ExperimentArgs),
    /// Lambda sweep with dt = min(dt_max, lambda / dt_per_lambda) and fitted error slopes.
    Convergence(ExperimentArgs),
    /// Fixed-step lambda sweep of the discrete error functionals.
    ApSweep(ExperimentArgs),
    /// Print the shipped presets.
    ListPresets,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset (see list-presets).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory; replaces output.dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dotted-key override such as scheme.lambda=0.01; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                parse_with_overrides(&text, &self.overrides)?
            }
            (None, Some(name)) => load_preset(name, &self.overrides)?,
            (None, None) => {
                return Err(Error::Config("one of --config or --preset is required".into()));
            }
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ListPresets => {
            for p in PRESETS {
                println!("{:<8} {}", p.name, p.description);
            }
        }
        Command::Run(args) => {
            let cfg = args.load()?;
            let report = runner::run_single(&cfg)?;
            let r = &report.result;
            println!(
                "{}: {} steps to t = {}, {} records, {} snapshots -> {}",
                r.outcome,
                r.steps,
                r.t_end,
                report.records,
                report.snapshots,
                report.dir.display()
            );
            if r.energy_anomaly {
                eprintln!(
                    "warning: total energy grows at {:.3e} per unit time",
                    r.energy_growth_rate
                );
            }
            if let (Some(step), Some(norm)) = (r.diverged_at_step, r.divergence_norm) {
                return Err(Error::Diverged {
                    step,
                    t: step as f64 * cfg.scheme.dt,
                    norm,
                });
            }
        }
        Command::Convergence(args) => {
            let cfg = args.load()?;
            let s = runner::run_convergence_sweep(&cfg)?;
            println!("{:>8} {:>10} {:>10} {:>12} {:>12}  outcome", "alpha", "lambda", "dt", "max_err0", "max_err1");
            for r in &s.rows {
                println!(
                    "{:>8} {:>10} {:>10.3e} {:>12.4e} {:>12.4e}  {}",
                    r.alpha, r.lambda, r.dt, r.max_err0, r.max_err1, r.outcome
                );
            }
            for f in &s.slopes {
                println!(
                    "alpha {}: slope err0 {}, slope err1 {} ({} points)",
                    f.alpha,
                    fmt_opt(f.slope_err0),
                    fmt_opt(f.slope_err1),
                    f.points
                );
            }
            for r in &s.time_study {
                println!(
                    "alpha {} lambda {} dt {}: error {:.4e} order {}",
                    r.alpha,
                    r.lambda,
                    r.dt,
                    r.error,
                    fmt_opt(r.observed_order)
                );
            }
            println!("tables written to {}", cfg.output.dir.display());
        }
        Command::ApSweep(args) => {
            let cfg = args.load()?;
            let s = runner::run_ap_sweep(&cfg)?;
            println!(
                "{:>8} {:>10} {:>12} {:>12} {:>12} {:>12}  outcome",
                "alpha", "lambda", "sup_err0", "sup_err1", "err0/lambda", "err1/lambda"
            );
            for r in &s.rows {
                println!(
                    "{:>8} {:>10} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}  {} ({} steps)",
                    r.alpha, r.lambda, r.sup_err0, r.sup_err1, r.ratio0, r.ratio1, r.outcome, r.steps
                );
            }
            for sp in &s.spreads {
                println!(
                    "alpha {}: max/min of err0/lambda {}, of err1/lambda {} (lambda < 1 rows)",
                    sp.alpha,
                    fmt_opt(sp.ratio0),
                    fmt_opt(sp.ratio1)
                );
            }
            println!("table written to {}", cfg.output.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
