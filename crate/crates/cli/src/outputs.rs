//! File formats: trajectory CSV, run artifact JSON, outcome-table CSV, and
//! fit-sample CSV.
//!
//! Every emitted file embeds the full experiment config and the master seed,
//! so any table or figure can be regenerated from its own metadata. CSV
//! files carry that metadata in leading `#` comment lines; JSON files carry
//! it in a `config` field. Floats are written in shortest round-trip form,
//! so re-parsing a file reproduces the in-memory values bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgdlab_core::diagnostics::LimitClassification;
use sgdlab_core::engine::{RunConfig, TrajectoryRecord, TrajectorySample};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

fn config_header(config: &ExperimentConfig, seed: u64) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("# config: {json}\n# seed: {seed}\n")
}

// ---------------------------------------------------------------------------
// Trajectory CSV + JSON artifact
// ---------------------------------------------------------------------------

/// Renders the decimated samples as `k,x,f,grad_norm` rows.
pub fn trajectory_csv(rec: &TrajectoryRecord, config: &ExperimentConfig) -> String {
    let mut out = config_header(config, rec.seed);
    out.push_str("k,x,f,grad_norm\n");
    for s in &rec.samples {
        writeln!(out, "{},{:?},{:?},{:?}", s.k, s.x[0], s.f, s.grad_norm).unwrap();
    }
    out
}

/// Parses a trajectory CSV back into samples, skipping metadata lines.
pub fn parse_trajectory_csv(text: &str) -> CliResult<Vec<TrajectorySample>> {
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('k') {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> CliResult<f64> {
            fields
                .next()
                .ok_or_else(|| CliError::io(format!("line {}: missing {name}", lineno + 1)))?
                .parse::<f64>()
                .map_err(|e| CliError::io(format!("line {}: bad {name}: {e}", lineno + 1)))
        };
        let k = next("k")? as u64;
        let x = next("x")?;
        let f = next("f")?;
        let grad_norm = next("grad_norm")?;
        samples.push(TrajectorySample { k, x: vec![x], f, grad_norm });
    }
    Ok(samples)
}

/// The JSON sidecar of one run: metadata, events, and the cell parameters;
/// the samples live in the sibling CSV named by `csv`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: ExperimentConfig,
    pub run_config: RunConfig,
    pub seed: u64,
    pub level: Option<f64>,
    pub alpha: f64,
    pub final_k: u64,
    /// `None` after a numeric failure (the final iterate is non-finite).
    pub final_x: Option<Vec<f64>>,
    pub final_f: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub stopped_early: Option<u64>,
    pub numeric_failure: bool,
    pub classification: Option<serde_json::Value>,
    pub csv: String,
}

impl RunArtifact {
    pub fn new(
        rec: &TrajectoryRecord,
        config: &ExperimentConfig,
        level: Option<f64>,
        alpha: f64,
        classification: Option<&LimitClassification>,
        csv_name: &str,
    ) -> Self {
        let finite = !rec.numeric_failure;
        RunArtifact {
            config: config.clone(),
            run_config: rec.config.clone(),
            seed: rec.seed,
            level,
            alpha,
            final_k: rec.final_k,
            final_x: finite.then(|| rec.final_x.clone()),
            final_f: finite.then_some(rec.final_f),
            final_grad_norm: finite.then_some(rec.final_grad_norm),
            stopped_early: rec.stopped_early,
            numeric_failure: rec.numeric_failure,
            classification: classification
                .map(|c| serde_json::to_value(c).expect("classification serializes")),
            csv: csv_name.to_string(),
        }
    }

    /// Loads the artifact and its sample CSV, rebuilding the record.
    pub fn load(path: &Path) -> CliResult<(RunArtifact, TrajectoryRecord)> {
        if !path.exists() {
            return Err(CliError::missing(format!("run artifact {} not found", path.display())));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
        let artifact: RunArtifact = serde_json::from_str(&text)
            .map_err(|e| CliError::io(format!("parsing {}: {e}", path.display())))?;
        let csv_path = path.parent().unwrap_or(Path::new(".")).join(&artifact.csv);
        if !csv_path.exists() {
            return Err(CliError::missing(format!(
                "trajectory csv {} not found",
                csv_path.display()
            )));
        }
        let csv_text = std::fs::read_to_string(&csv_path)
            .map_err(|e| CliError::io(format!("reading {}: {e}", csv_path.display())))?;
        let samples = parse_trajectory_csv(&csv_text)?;
        if samples.is_empty() {
            return Err(CliError::io(format!("{} holds no samples", csv_path.display())));
        }
        let record = TrajectoryRecord {
            seed: artifact.seed,
            config: artifact.run_config.clone(),
            final_k: artifact.final_k,
            final_x: artifact.final_x.clone().unwrap_or_else(|| vec![f64::NAN]),
            final_f: artifact.final_f.unwrap_or(f64::NAN),
            final_grad_norm: artifact.final_grad_norm.unwrap_or(f64::NAN),
            stopped_early: artifact.stopped_early,
            numeric_failure: artifact.numeric_failure,
            samples,
        };
        Ok((artifact, record))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }
}

// ---------------------------------------------------------------------------
// Generic helpers
// ---------------------------------------------------------------------------

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

/// `# config` + `# seed` comment prefix for CSV emissions.
pub fn csv_metadata(config: &ExperimentConfig, seed: u64) -> String {
    config_header(config, seed)
}
