//! Library side of the `ddsim` command: configuration, running and output.

pub mod config;
pub mod error;
pub mod figures;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use ddsim_core::engine::SimConfig;
use ddsim_core::{run_ensemble, run_ensemble_with_workers, SimResult};

pub use config::{parse_config, Cli, ParsedConfig, RunPlan, Settings};
pub use error::CliError;
pub use output::{emit_results, OutputDir};

/// What a finished run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub results: Vec<SimResult>,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

fn runner(workers: Option<usize>) -> impl Fn(&SimConfig) -> Result<SimResult, CliError> {
    move |cfg| {
        Ok(match workers {
            Some(w) => run_ensemble_with_workers(cfg, w)?,
            None => run_ensemble(cfg)?,
        })
    }
}

/// Parses `argv`, runs the requested sweep or figure set and writes all outputs.
pub fn run<I, T>(argv: I, env_seed: Option<&str>) -> Result<RunSummary, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let start = Instant::now();
    let (parsed, cli) = parse_config(argv, env_seed)?;
    let run_one = runner(cli.workers);
    let mut out = OutputDir::create(&parsed.out)?;
    let results = match &parsed.plan {
        RunPlan::Sweep(configs) => {
            let results = configs
                .iter()
                .map(&run_one)
                .collect::<Result<Vec<_>, _>>()?;
            emit_results(&results, &mut out)?;
            results
        }
        RunPlan::ReproduceFigures(opts) => figures::reproduce_figures(opts, &mut out, &run_one)?,
    };
    let files = out.files().iter().map(|(name, _)| name.clone()).collect();
    let refs: Vec<&SimResult> = results.iter().collect();
    out.finish(&parsed.config_source, &refs, start.elapsed())?;
    Ok(RunSummary {
        results,
        out_dir: parsed.out,
        files,
    })
}
