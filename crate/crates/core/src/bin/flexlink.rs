use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flexlink::output::{run_to_dir, seed_constants, verify};
use flexlink::ScenarioFile;

#[derive(Parser)]
#[command(name = "flexlink", version, about = "Flexible-link force control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write logs and summaries.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run every row of the [sweep] section.
        #[arg(long)]
        sweep: bool,
        /// Only write golden modal constants, without simulating.
        #[arg(long)]
        seed_constants: bool,
    },
    /// Re-check the properties of a completed run directory.
    Verify { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> flexlink::Result<bool> {
    match command {
        Command::Run {
            config,
            out,
            sweep,
            seed_constants: seed,
        } => {
            let scenario = ScenarioFile::load(&config)?;
            if seed {
                let basis = seed_constants(&scenario, &out)?;
                println!("wrote {} mode(s) to {}", basis.mode_count(), out.join("constants.csv").display());
                return Ok(true);
            }
            let rows = run_to_dir(&scenario, &out, sweep)?;
            let mut ok = true;
            for row in &rows {
                match &row.outcome {
                    Ok(s) => println!(
                        "run {}: steady |fc| = {:.4} N, penetration = {:.5} m, max |w(l)| = {:.2e} m",
                        row.run, s.steady_force, s.steady_penetration, s.max_tip_deflection
                    ),
                    Err(message) => {
                        ok = false;
                        println!("run {}: error: {message}", row.run);
                    }
                }
            }
            Ok(ok)
        }
        Command::Verify { dir } => {
            let report = verify(&dir)?;
            for line in report.lines() {
                println!("{line}");
            }
            Ok(report.passed())
        }
    }
}
