//! CSV tables, trajectory files and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ddsim_core::SimResult;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const RESULTS_HEADER: &str =
    "sequence,length_m,pulses,error_sigma,state,trials,seed,fidelity_mean,fidelity_stderr";
pub const TRAJECTORY_HEADER: &str = "position_m,fidelity";

/// Fidelity-like quantity in [0, 1]: nine decimal places, e.g. `1.000000000`.
pub fn fixed9(x: f64) -> String {
    format!("{x:.9}")
}

/// Nine significant digits in the shortest form that round-trips (`500`, `0.005`).
pub fn short9(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().unwrap();
    format!("{rounded}")
}

pub fn results_csv(results: &[SimResult]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in results {
        let c = &r.config;
        for s in &r.states {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.schedule.sequence,
                short9(c.fiber_length_m),
                c.schedule.placed_pulses(),
                short9(c.error_model.sigma_fraction()),
                csv_field(&s.label),
                c.trials,
                c.master_seed,
                fixed9(s.fidelity_mean),
                fixed9(s.fidelity_stderr),
            );
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One `position_m,fidelity` table per state, empty if no trajectory was recorded.
pub fn trajectory_csvs(result: &SimResult) -> Vec<(String, String)> {
    let Some(positions) = &result.trajectory_positions_m else {
        return Vec::new();
    };
    result
        .states
        .iter()
        .filter_map(|s| {
            let fids = s.trajectory.as_ref()?;
            let mut out = String::from(TRAJECTORY_HEADER);
            out.push('\n');
            for (p, f) in positions.iter().zip(fids) {
                let _ = writeln!(out, "{},{}", short9(*p), fixed9(*f));
            }
            Some((s.label.clone(), out))
        })
        .collect()
}

/// Filesystem-safe rendering of a state label.
pub fn file_token(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects emitted files so the manifest can list them with checksums.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written
            .push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(path)
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.written
    }

    /// Writes `manifest.json`. Its own checksum is not listed.
    pub fn finish(
        self,
        config_source: &str,
        results: &[&SimResult],
        elapsed: Duration,
    ) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "tool": "ddsim",
            "version": env!("CARGO_PKG_VERSION"),
            "config_source": config_source,
            "wall_clock_s": elapsed.as_secs_f64(),
            "files": self.written.iter().map(|(name, sum)| json!({
                "path": name,
                "sha256": sum,
            })).collect::<Vec<_>>(),
            "configs": results.iter().map(|r| &r.config).collect::<Vec<_>>(),
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Writes `results.csv` plus one trajectory file per (config, state) that recorded one.
pub fn emit_results(results: &[SimResult], out: &mut OutputDir) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = vec![out.write("results.csv", &results_csv(results))?];
    for (i, r) in results.iter().enumerate() {
        for (label, csv) in trajectory_csvs(r) {
            let name = format!(
                "trajectory_{:03}_{}_{}_{}_{}.csv",
                i,
                r.config.schedule.sequence,
                r.config.schedule.placed_pulses(),
                short9(r.config.error_model.sigma_fraction()),
                file_token(&label),
            );
            paths.push(out.write(&name, &csv)?);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_forms() {
        assert_eq!(fixed9(1.0), "1.000000000");
        assert_eq!(fixed9(0.9944123456789), "0.994412346");
        assert_eq!(fixed9(0.0019), "0.001900000");
        assert_eq!(short9(500.0), "500");
        assert_eq!(short9(0.005), "0.005");
        assert_eq!(short9(1.0 / 3.0), "0.333333333");
    }

    #[test]
    fn labels_become_safe_tokens() {
        assert_eq!(file_token("C:0.6:0:0:0.8"), "C_0.6_0_0_0.8");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
