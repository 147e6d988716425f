//! Outcome tables: ensembles per (initial point, noise level) cell,
//! classified and aggregated into per-cell label histograms.

use std::collections::BTreeMap;

use serde::Serialize;
use sgdlab_core::diagnostics::{classify_limit, AboveLimit, LimitLabel};
use sgdlab_core::engine::{run_ensemble, RunConfig, TrajectoryRecord};
use sgdlab_core::objective::ObjectiveSpec;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::outputs::csv_metadata;

/// One grid cell of the experiment table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub x0: f64,
    /// Noise level of the sweep; `None` for the exact oracle.
    pub level: Option<f64>,
    pub n_seeds: u64,
    pub majority_label: LimitLabel,
    /// Label histogram, sorted by label name; counts sum to `n_seeds`.
    pub label_counts: Vec<(String, u64)>,
    /// Above-limit verdict histogram ("undefined" for non-convergent runs).
    pub above_counts: Vec<(String, u64)>,
    /// Seeds whose final iterate escaped past the left edge of the global
    /// plateau (`final_x > pi`).
    pub escapes_past_pi: u64,
    pub numeric_failures: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeTable {
    pub rows: Vec<OutcomeRow>,
}

/// Classifies an ensemble into one table row.
pub fn summarize_cell(
    records: &[TrajectoryRecord],
    f: &ObjectiveSpec,
    x0: f64,
    level: Option<f64>,
    tol_dist: f64,
    tol_grad: f64,
) -> OutcomeRow {
    let mut labels: BTreeMap<String, u64> = BTreeMap::new();
    let mut label_values: BTreeMap<String, LimitLabel> = BTreeMap::new();
    let mut above: BTreeMap<String, u64> = BTreeMap::new();
    let mut escapes = 0;
    let mut failures = 0;
    for rec in records {
        let c = classify_limit(rec, f, tol_dist, tol_grad);
        *labels.entry(c.label.to_string()).or_insert(0) += 1;
        label_values.insert(c.label.to_string(), c.label);
        let verdict = c
            .above_limit
            .as_ref()
            .map(AboveLimit::to_string)
            .unwrap_or_else(|| "undefined".into());
        *above.entry(verdict).or_insert(0) += 1;
        if rec.final_x[0] > std::f64::consts::PI {
            escapes += 1;
        }
        if rec.numeric_failure {
            failures += 1;
        }
    }
    let majority = labels
        .iter()
        .max_by_key(|(_, n)| **n)
        .map(|(name, _)| label_values[name])
        .expect("cell has at least one record");
    OutcomeRow {
        x0,
        level,
        n_seeds: records.len() as u64,
        majority_label: majority,
        label_counts: labels.into_iter().collect(),
        above_counts: above.into_iter().collect(),
        escapes_past_pi: escapes,
        numeric_failures: failures,
    }
}

/// Runs the full grid of the config: every initial point crossed with every
/// noise level, `n_seeds` trajectories each.
pub fn build_outcome_table(config: &ExperimentConfig) -> CliResult<OutcomeTable> {
    let f = config.objective();
    let beta = f.beta();
    let mut rows = Vec::new();
    for level in config.levels() {
        let oracle = config.oracle_at(level, beta)?;
        let schedule = config.schedule_at(level, beta)?;
        for &x0 in &config.run.x0 {
            let mut cfg = RunConfig::new(vec![x0], config.run.k_max, config.run.seed);
            cfg.record_stride = config.run.record_stride;
            cfg.stop_grad_tol = config.run.stop_grad_tol;
            cfg.stop_window = config.run.stop_window;
            let records = run_ensemble(&cfg, &f, &oracle, &schedule, config.run.n_seeds)?;
            rows.push(summarize_cell(
                &records,
                &f,
                x0,
                level,
                config.run.tol_dist,
                config.run.tol_grad,
            ));
        }
    }
    Ok(OutcomeTable { rows })
}

fn fmt_level(level: Option<f64>) -> String {
    level.map(|l| format!("{l}")).unwrap_or_else(|| "-".into())
}

fn fmt_hist(counts: &[(String, u64)]) -> String {
    counts
        .iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join("|")
}

impl OutcomeTable {
    /// Fixed-width text rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>8} {:>6}  {:<16} {:<40} {:<40}\n",
            "x0", "level", "seeds", "majority", "labels", "above-limit"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14.6} {:>8} {:>6}  {:<16} {:<40} {:<40}\n",
                r.x0,
                fmt_level(r.level),
                r.n_seeds,
                r.majority_label.to_string(),
                fmt_hist(&r.label_counts),
                fmt_hist(&r.above_counts),
            ));
        }
        out
    }

    /// CSV rendering with the embedded config header.
    pub fn render_csv(&self, config: &ExperimentConfig) -> String {
        let mut out = csv_metadata(config, config.run.seed);
        out.push_str("x0,level,n_seeds,majority,labels,above,escapes_past_pi,numeric_failures\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:?},{},{},{},{},{},{},{}\n",
                r.x0,
                fmt_level(r.level),
                r.n_seeds,
                r.majority_label,
                fmt_hist(&r.label_counts),
                fmt_hist(&r.above_counts),
                r.escapes_past_pi,
                r.numeric_failures,
            ));
        }
        out
    }

    /// Parses the CSV rendering back; inverse of [`render_csv`](Self::render_csv).
    pub fn parse_csv(text: &str) -> CliResult<OutcomeTable> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("x0,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(CliError::io(format!("bad table row: {line}")));
            }
            let parse_hist = |s: &str| -> CliResult<Vec<(String, u64)>> {
                if s.is_empty() {
                    return Ok(Vec::new());
                }
                s.split('|')
                    .map(|pair| {
                        let (k, v) = pair
                            .split_once(':')
                            .ok_or_else(|| CliError::io(format!("bad histogram entry {pair}")))?;
                        Ok((
                            k.to_string(),
                            v.parse::<u64>()
                                .map_err(|e| CliError::io(format!("bad count {v}: {e}")))?,
                        ))
                    })
                    .collect()
            };
            let majority = parse_label(fields[3])?;
            rows.push(OutcomeRow {
                x0: fields[0]
                    .parse()
                    .map_err(|e| CliError::io(format!("bad x0 {}: {e}", fields[0])))?,
                level: if fields[1] == "-" {
                    None
                } else {
                    Some(
                        fields[1]
                            .parse()
                            .map_err(|e| CliError::io(format!("bad level {}: {e}", fields[1])))?,
                    )
                },
                n_seeds: fields[2]
                    .parse()
                    .map_err(|e| CliError::io(format!("bad n_seeds {}: {e}", fields[2])))?,
                majority_label: majority,
                label_counts: parse_hist(fields[4])?,
                above_counts: parse_hist(fields[5])?,
                escapes_past_pi: fields[6]
                    .parse()
                    .map_err(|e| CliError::io(format!("bad escapes {}: {e}", fields[6])))?,
                numeric_failures: fields[7]
                    .parse()
                    .map_err(|e| CliError::io(format!("bad failures {}: {e}", fields[7])))?,
            });
        }
        Ok(OutcomeTable { rows })
    }
}

fn parse_label(s: &str) -> CliResult<LimitLabel> {
    Ok(match s {
        "saddle" => LimitLabel::Saddle,
        "local-max" => LimitLabel::LocalMax,
        "local-min" => LimitLabel::LocalMin,
        "global-min" => LimitLabel::GlobalMin,
        "none" => LimitLabel::None,
        "non-convergence" => LimitLabel::NonConvergence,
        _ => return Err(CliError::io(format!("unknown label {s}"))),
    })
}
