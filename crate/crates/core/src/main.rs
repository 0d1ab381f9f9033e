use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tendon_refine::harness::output::{summarize_dir, write_outcome};
use tendon_refine::harness::{run_refinement, Scenario, TrialSummary};
use tendon_refine::Error;

#[derive(Parser)]
#[command(name = "tendon-refine", version, about = "Trial-to-trial muscle-length refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write logs, corrections and summaries.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Dotted key assignment, e.g. `plant.via_point_offset=0.002`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Recompute summary.csv from the CSV files of a finished run.
    Summarize { dir: PathBuf },
    /// Validate a scenario without running it.
    Check {
        scenario: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn print_summaries(summaries: &[TrialSummary]) {
    for s in summaries {
        let distance = s
            .min_distance
            .map(|d| format!(", min distance {d:.4} m, hit {}", s.hit.unwrap_or(false)))
            .unwrap_or_default();
        println!(
            "trial {}: peak antagonist {:.4} kgf, integrated {:.4} kgf·s (agonist {:.4}){distance}",
            s.trial, s.peak_antagonist_tension, s.integrated_tension, s.integrated_agonist_tension
        );
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            overrides,
        } => {
            let scenario = match Scenario::load(&scenario, seed, &overrides) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            let (outcome, err) = run_refinement(&scenario);
            if let Err(e) = write_outcome(&out, &scenario, &outcome, err.as_ref()) {
                return fail(&e);
            }
            let summaries: Vec<_> = outcome.trials.iter().map(|(_, s)| s.clone()).collect();
            print_summaries(&summaries);
            match err {
                Some(e) => fail(&e),
                None => ExitCode::SUCCESS,
            }
        }
        Command::Summarize { dir } => match summarize_dir(&dir) {
            Ok(s) => {
                print_summaries(&s);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Check {
            scenario,
            overrides,
        } => match Scenario::load(&scenario, None, &overrides) {
            Ok(s) => {
                println!(
                    "{}: {} joints, {} muscles, {} cycles, plan [{}]",
                    s.name,
                    s.model.joint_count(),
                    s.model.muscle_count(),
                    s.reference.len(),
                    s.plan.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(", ")
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
