use std::process::ExitCode;

use ddsim::config::SEED_ENV;
use ddsim::CliError;

fn main() -> ExitCode {
    let env_seed = std::env::var(SEED_ENV).ok();
    match ddsim::run(std::env::args_os(), env_seed.as_deref()) {
        Ok(summary) => {
            for r in &summary.results {
                for s in &r.states {
                    println!(
                        "{:<5} L={:<6} N={:<5} eps={:<6} {:<3} F={:.6} +/- {:.6}",
                        r.config.schedule.sequence.as_str(),
                        r.config.fiber_length_m,
                        r.config.schedule.placed_pulses(),
                        r.config.error_model.sigma_fraction(),
                        s.label,
                        s.fidelity_mean,
                        s.fidelity_stderr
                    );
                }
            }
            println!(
                "wrote {} files to {}",
                summary.files.len() + 1,
                summary.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { 2 } else { 0 })
        }
        Err(e @ CliError::Usage { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {:#}", anyhow::Error::from(e));
            ExitCode::FAILURE
        }
    }
}
