use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kvwave::run::{
    load_config, run_decay_report, run_resolvent_test, run_simulate, run_sweep, ResolventTestOptions,
};
use kvwave::trace_io::emit_plot_script;

#[derive(Parser)]
#[command(name = "kvwave", version, about = "Kelvin-Voigt damped wave simulator and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configured run and verify it.
    Simulate {
        #[arg(long, value_name = "PATH", required_unless_present = "sweep", conflicts_with = "sweep")]
        config: Option<PathBuf>,
        /// Glob of config files run concurrently, each into OUT/<stem>/.
        #[arg(long, value_name = "PATTERN")]
        sweep: Option<String>,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
        /// Warnings and soft checks become failures.
        #[arg(long)]
        strict: bool,
    },
    /// Single-mode resolvent case and randomized range trials.
    Resolvent {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        modes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Also write the report to this file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Re-analyze an existing trace CSV.
    DecayReport {
        #[arg(long, value_name = "PATH")]
        trace: PathBuf,
        /// Config of the run; supplies the Poincaré constant.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Write a gnuplot script for a trace CSV.
    PlotScript {
        #[arg(long, value_name = "PATH")]
        trace: PathBuf,
        #[arg(long, value_name = "PATH", default_value = "plot.gp")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("kvwave: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> kvwave::Result<ExitCode> {
    match command {
        Command::Simulate {
            config,
            sweep,
            out,
            strict,
        } => {
            if let Some(pattern) = sweep {
                let mut ok = true;
                for (path, result) in run_sweep(&pattern, &out, strict)? {
                    match result {
                        Ok(r) => {
                            ok &= r.passed();
                            println!(
                                "{}: {} ({})",
                                path.display(),
                                if r.passed() { "PASS" } else { "FAIL" },
                                r.fingerprint
                            );
                        }
                        Err(e) => {
                            ok = false;
                            println!("{}: ERROR {e}", path.display());
                        }
                    }
                }
                return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
            }
            let path = config.expect("clap enforces --config or --sweep");
            let cfg = load_config(&path)?;
            let report = run_simulate(&cfg, &out, strict)?;
            print!("{}", report.render());
            Ok(code(report.passed()))
        }
        Command::Resolvent {
            alpha,
            trials,
            modes,
            seed,
            tol,
            out,
        } => {
            let report = run_resolvent_test(&ResolventTestOptions {
                alpha,
                modes,
                trials,
                seed,
                tol,
            })?;
            let text = report.render();
            if let Some(out) = out {
                std::fs::write(out, &text)?;
            }
            print!("{text}");
            Ok(code(report.passed()))
        }
        Command::DecayReport {
            trace,
            config,
            out,
            strict,
        } => {
            let lambda1 = match config {
                Some(p) => Some(load_config(&p)?.domain()?.poincare_constant()),
                None => None,
            };
            let report = run_decay_report(&trace, lambda1, strict)?;
            let text = report.render();
            if let Some(out) = out {
                std::fs::write(out, &text)?;
            }
            print!("{text}");
            Ok(code(report.passed()))
        }
        Command::PlotScript { trace, out } => {
            emit_plot_script(&trace, &out)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn code(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
