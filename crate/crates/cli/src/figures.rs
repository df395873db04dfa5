//! Canned sweeps for the four benchmark figures.

use ddsim_core::engine::{ScheduleSpec, SimConfig};
use ddsim_core::sequences::{PulseErrorModel, SequenceKind};
use ddsim_core::SimResult;

use crate::config::FigureOptions;
use crate::error::CliError;
use crate::output::{file_token, results_csv, trajectory_csvs, OutputDir};

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub name: &'static str,
    pub length_m: f64,
    pub error_sigma: f64,
    pub pulses: usize,
    /// Plate counts for the plate-count sweep table.
    pub plate_sweep: Vec<usize>,
}

const BASE_PLATES: usize = 800;
const BASE_SWEEP: [usize; 5] = [40, 100, 200, 400, 800];

pub fn figure_specs(fixed_plate_count: bool) -> Vec<FigureSpec> {
    let fig = |name, length_m, error_sigma| FigureSpec {
        name,
        length_m,
        error_sigma,
        pulses: BASE_PLATES,
        plate_sweep: BASE_SWEEP.to_vec(),
    };
    let mut long = fig("fig6", 1000.0, 0.005);
    if !fixed_plate_count {
        long.pulses *= 2;
        long.plate_sweep = BASE_SWEEP.iter().map(|n| n * 2).collect();
    }
    vec![
        fig("fig3", 500.0, 0.0),
        fig("fig4", 500.0, 0.005),
        fig("fig5", 500.0, 0.01),
        long,
    ]
}

fn config_for(
    base: &SimConfig,
    spec: &FigureSpec,
    sequence: SequenceKind,
    pulses: usize,
) -> Result<SimConfig, CliError> {
    Ok(SimConfig {
        fiber_length_m: spec.length_m,
        schedule: ScheduleSpec {
            sequence,
            pulses,
            base_phase: 0.0,
            cpmg_axis: base.schedule.cpmg_axis,
        },
        error_model: PulseErrorModel::new(spec.error_sigma)?,
        ..base.clone()
    })
}

/// Headline configs of one figure: free baseline, CPMG and KDD at the figure's plate budget.
pub fn headline_configs(base: &SimConfig, spec: &FigureSpec) -> Result<Vec<SimConfig>, CliError> {
    [SequenceKind::Free, SequenceKind::Cpmg, SequenceKind::Kdd]
        .into_iter()
        .map(|seq| {
            let mut c = config_for(base, spec, seq, spec.pulses)?;
            c.record_trajectory = seq != SequenceKind::Free;
            Ok(c)
        })
        .collect()
}

pub fn plate_sweep_configs(
    base: &SimConfig,
    spec: &FigureSpec,
) -> Result<Vec<SimConfig>, CliError> {
    let mut out = Vec::new();
    for seq in [SequenceKind::Cpmg, SequenceKind::Kdd] {
        for &n in &spec.plate_sweep {
            let mut c = config_for(base, spec, seq, n)?;
            c.record_trajectory = false;
            out.push(c);
        }
    }
    Ok(out)
}

/// Runs every figure and writes `figN.csv`, `figN_plates.csv` and
/// `figN_trajectory_{sequence}_{state}.csv` into `out`.
pub fn reproduce_figures(
    opts: &FigureOptions,
    out: &mut OutputDir,
    run: &dyn Fn(&SimConfig) -> Result<SimResult, CliError>,
) -> Result<Vec<SimResult>, CliError> {
    let mut all = Vec::new();
    for spec in figure_specs(opts.fixed_plate_count) {
        let headline = headline_configs(&opts.base, &spec)?
            .iter()
            .map(run)
            .collect::<Result<Vec<_>, _>>()?;
        out.write(&format!("{}.csv", spec.name), &results_csv(&headline))?;
        for r in &headline {
            for (label, csv) in trajectory_csvs(r) {
                let name = format!(
                    "{}_trajectory_{}_{}.csv",
                    spec.name,
                    r.config.schedule.sequence,
                    file_token(&label)
                );
                out.write(&name, &csv)?;
            }
        }
        let plates = plate_sweep_configs(&opts.base, &spec)?
            .iter()
            .map(run)
            .collect::<Result<Vec<_>, _>>()?;
        out.write(&format!("{}_plates.csv", spec.name), &results_csv(&plates))?;
        all.extend(headline);
        all.extend(plates);
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plate_budgets() {
        let specs = figure_specs(false);
        assert_eq!(specs.len(), 4);
        assert_eq!(specs[3].pulses, 1600);
        assert_eq!(specs[3].plate_sweep.last(), Some(&1600));
        assert_eq!(figure_specs(true)[3].pulses, 800);
        for spec in &specs {
            for &n in spec.plate_sweep.iter().chain([&spec.pulses]) {
                assert_eq!(n % 20, 0);
            }
        }
    }

    #[test]
    fn headline_configs_validate() {
        for spec in figure_specs(false) {
            for c in headline_configs(&SimConfig::default(), &spec).unwrap() {
                c.validate().unwrap();
            }
        }
    }
}
