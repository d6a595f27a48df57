use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use korn_shell::harness::{
    report_text, run_ansatz, run_property_suites, run_sweep, write_sweep_outputs, ExperimentConfig, SuiteStatus,
};

#[derive(Parser)]
#[command(name = "korn-shell", version, about = "Thickness scaling of Korn constants for thin shells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplier of the mesh resolution policy.
    #[arg(long = "resolution-scale", global = true)]
    resolution_scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Korn eigenproblem over the h sweep and fit the exponent.
    Sweep { config: PathBuf },
    /// Run the identity and property suites.
    Verify { config: PathBuf },
    /// Evaluate the elliptic ansatz energies over the h sweep.
    Ansatz { config: PathBuf },
}

fn load(path: &PathBuf, cli: &Cli) -> korn_shell::Result<ExperimentConfig> {
    let mut c = ExperimentConfig::from_file(path)?;
    if let Some(o) = &cli.out {
        c.output = o.clone();
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(r) = cli.resolution_scale {
        c.policy.scale = r;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> korn_shell::Result<bool> {
    match &cli.command {
        Command::Sweep { config } => {
            let c = load(config, cli)?;
            let report = run_sweep(&c)?;
            write_sweep_outputs(&report, &c.output)?;
            print!("{}", report_text(&report));
            Ok(report.all_converged())
        }
        Command::Verify { config } => {
            let c = load(config, cli)?;
            let report = run_property_suites(&c)?;
            report.write(&c.output)?;
            for r in &report.results {
                println!(
                    "{:<18} {:<8} cases {:>6}  failures {:>4}  worst {:.3e}  tolerance {:.1e}",
                    r.name,
                    r.status.label(),
                    r.cases,
                    r.failures,
                    r.worst,
                    r.tolerance
                );
            }
            Ok(report.results.iter().all(|r| r.status != SuiteStatus::Failed))
        }
        Command::Ansatz { config } => {
            let c = load(config, cli)?;
            let report = run_ansatz(&c)?;
            report.write(&c.output)?;
            for (h, e, lb) in &report.rows {
                println!(
                    "h = {h:.5}  E_sym/E_full = {:.6e}  (E_sym/E_full)/h = {:.4}  lower bound {}",
                    e.quotient(),
                    e.quotient() / h,
                    if lb.inconclusive { "inconclusive" } else if lb.holds { "holds" } else { "FAILS" }
                );
            }
            if let Some(f) = report.fit {
                println!("exponent {:.4}, R^2 {:.5}", f.beta, f.r_squared);
            }
            Ok(report.rows.iter().all(|(_, _, lb)| lb.holds || lb.inconclusive))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
