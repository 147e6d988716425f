//! Subcommand implementations. Each returns through [`CliResult`] so `main`
//! can map failures onto the stable exit-code contract.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sgdlab_core::diagnostics::{
    classify_limit, estimate_lojasiewicz_exponent, xi_probe, SampleSide, XiProbeResult,
};
use sgdlab_core::engine::{run_trajectory, RunConfig};
use sgdlab_core::schedule::{BoundsChannel, ScheduleReport};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::outputs::{csv_metadata, trajectory_csv, write_file, RunArtifact};
use crate::plot::render_trajectory_svg;
use crate::table::build_outcome_table;

fn out_dir(config: &ExperimentConfig, override_dir: &Option<PathBuf>) -> PathBuf {
    override_dir.clone().unwrap_or_else(|| config.run.out_dir.clone())
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LevelCheck {
    level: Option<f64>,
    alpha: f64,
    derived: ScheduleReport,
    nominal: ScheduleReport,
}

#[derive(Serialize)]
struct CheckArtifact {
    config: ExperimentConfig,
    gate_channel: String,
    k_max: u64,
    levels: Vec<LevelCheck>,
    passed: bool,
}

fn render_report(r: &ScheduleReport) -> String {
    let mut out = String::new();
    let s = &r.summability;
    out.push_str(&format!(
        "    summability     truncated {:<12.6e} tail {:<12} verdict {:<9} {}\n",
        s.truncated_sum,
        s.tail_bound.map(|t| format!("{t:.6e}")).unwrap_or_else(|| "diverges".into()),
        format!("{:?}", s.verdict).to_lowercase(),
        if s.passed() { "PASS" } else { "FAIL" }
    ));
    let i = &r.inf_condition;
    out.push_str(&format!(
        "    positivity      min {:<14.6e} at k={:<8} limit {:<12.6e} {}\n",
        i.min_value,
        i.argmin_k,
        i.limit,
        if i.passed { "PASS" } else { "FAIL" }
    ));
    let m = &r.monotone_ratio;
    out.push_str(&format!(
        "    monotone ratio  max {:<14.12} at k={:<8} min {:<14.12} {}\n",
        m.max_ratio,
        m.argmax_k,
        m.min_ratio,
        if m.passed { "PASS" } else { "FAIL" }
    ));
    out
}

/// Runs all three sequence conditions on both bound channels for every
/// sweep level. The exit verdict follows the selected channel.
pub fn cmd_check(
    config: &ExperimentConfig,
    channel: BoundsChannel,
    k_max: Option<u64>,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let f = config.objective();
    let beta = f.beta();
    let k_max = k_max.unwrap_or(config.run.k_max).max(1);
    let mut levels = Vec::new();
    let mut all_passed = true;

    for level in config.levels() {
        let schedule = config.schedule_at(level, beta)?;
        let alpha = config.alpha_at(level, beta);
        let derived = schedule.check_all(BoundsChannel::Derived, k_max)?;
        let nominal = schedule.check_all(BoundsChannel::Nominal, k_max)?;
        println!(
            "level {}  alpha {alpha:.6e}  beta {beta}",
            level.map(|l| l.to_string()).unwrap_or_else(|| "-".into())
        );
        println!("  channel derived:");
        print!("{}", render_report(&derived));
        println!("  channel nominal:");
        print!("{}", render_report(&nominal));
        let selected = match channel {
            BoundsChannel::Derived => &derived,
            BoundsChannel::Nominal => &nominal,
        };
        all_passed &= selected.all_passed();
        levels.push(LevelCheck { level, alpha, derived, nominal });
    }

    let artifact = CheckArtifact {
        config: config.clone(),
        gate_channel: channel.to_string(),
        k_max,
        levels,
        passed: all_passed,
    };
    let dir = out_dir(config, out);
    let path = write_file(&dir, "check.json", &serde_json::to_string_pretty(&artifact).unwrap())?;
    println!("wrote {}", path.display());
    println!(
        "verdict ({channel}): {}",
        if all_passed { "all conditions hold" } else { "conditions violated" }
    );
    if all_passed {
        Ok(())
    } else {
        Err(CliError::check(format!("schedule conditions fail on the {channel} channel")))
    }
}

fn gate_or_force(
    config: &ExperimentConfig,
    channel: BoundsChannel,
    force: bool,
) -> CliResult<()> {
    if force {
        return Ok(());
    }
    let f = config.objective();
    let beta = f.beta();
    for level in config.levels() {
        let schedule = config.schedule_at(level, beta)?;
        let report = schedule.check_all(channel, 10_000.min(config.run.k_max).max(1))?;
        if !report.all_passed() {
            return Err(CliError::check(format!(
                "schedule conditions fail on the {channel} channel at level {:?}; pass --force to run anyway",
                level
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

pub struct RunOptions {
    pub seed: Option<u64>,
    pub x0: Option<f64>,
    pub level: Option<f64>,
    pub plot: bool,
    pub force: bool,
    pub channel: BoundsChannel,
    pub out: Option<PathBuf>,
}

/// Runs a single seeded trajectory and writes its CSV, JSON artifact, and
/// optional SVG plot.
pub fn cmd_run(config: &ExperimentConfig, opts: &RunOptions) -> CliResult<()> {
    gate_or_force(config, opts.channel, opts.force)?;
    let f = config.objective();
    let beta = f.beta();
    let level = opts.level.map(Some).unwrap_or_else(|| config.levels()[0]);
    let oracle = config.oracle_at(level, beta)?;
    let schedule = config.schedule_at(level, beta)?;
    let seed = opts.seed.unwrap_or(config.run.seed);
    let x0 = opts.x0.unwrap_or(config.run.x0[0]);

    let mut cfg = RunConfig::new(vec![x0], config.run.k_max, seed);
    cfg.record_stride = config.run.record_stride;
    cfg.stop_grad_tol = config.run.stop_grad_tol;
    cfg.stop_window = config.run.stop_window;
    cfg.force = opts.force;
    let rec = run_trajectory(&cfg, &f, &oracle, &schedule)?;
    let classification = classify_limit(&rec, &f, config.run.tol_dist, config.run.tol_grad);

    let dir = out_dir(config, &opts.out);
    let csv_name = format!("run_seed{seed}.csv");
    let csv_path = write_file(&dir, &csv_name, &trajectory_csv(&rec, config))?;
    let alpha = config.alpha_at(level, beta);
    let artifact = RunArtifact::new(&rec, config, level, alpha, Some(&classification), &csv_name);
    let json_path = write_file(&dir, &format!("run_seed{seed}.json"), &artifact.to_json())?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    if opts.plot {
        let svg = render_trajectory_svg(&rec, &f, config);
        let svg_path = write_file(&dir, &format!("run_seed{seed}.svg"), &svg)?;
        println!("wrote {}", svg_path.display());
    }

    println!(
        "seed {seed}  x0 {x0}  level {}  alpha {alpha:.6e}",
        level.map(|l| l.to_string()).unwrap_or_else(|| "-".into())
    );
    if rec.numeric_failure {
        println!("outcome: numeric failure at k = {} (non-convergence)", rec.final_k);
    } else {
        println!(
            "outcome: {} (distance {:.3e}), final x = {:.9}, F = {:.9}, |grad| = {:.3e}",
            classification.label,
            classification.distance,
            rec.final_x[0],
            rec.final_f,
            rec.final_grad_norm
        );
        println!(
            "above-limit: {}",
            classification
                .above_limit
                .map(|a| a.to_string())
                .unwrap_or_else(|| "undefined".into())
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// table
// ---------------------------------------------------------------------------

pub fn cmd_table(
    config: &ExperimentConfig,
    channel: BoundsChannel,
    force: bool,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    gate_or_force(config, channel, force)?;
    let started = std::time::Instant::now();
    let table = build_outcome_table(config)?;
    print!("{}", table.render_text());
    let dir = out_dir(config, out);
    let path = write_file(&dir, "table.csv", &table.render_csv(config))?;
    println!("wrote {} ({:.1?})", path.display(), started.elapsed());
    Ok(())
}

// ---------------------------------------------------------------------------
// xi
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct XiArtifact {
    config: ExperimentConfig,
    run: String,
    channel: String,
    f_inf: f64,
    f_inf_window_spread: f64,
    gamma: f64,
    probes: Vec<XiProbeResult>,
    max_gamma_required: Option<f64>,
    verdict: String,
}

pub struct XiOptions {
    pub run: PathBuf,
    pub ks: Option<Vec<u64>>,
    pub channel: BoundsChannel,
    pub out: Option<PathBuf>,
}

/// Probes the descent event at recorded iterations of a stored run.
pub fn cmd_xi(config: &ExperimentConfig, opts: &XiOptions) -> CliResult<()> {
    let (artifact, rec) = RunArtifact::load(&opts.run)?;
    if rec.numeric_failure {
        return Err(CliError::check(
            "the referenced run failed numerically; the event probe needs a finite limit estimate",
        ));
    }
    let f = config.objective();
    let beta = f.beta();
    let oracle = config.oracle_at(artifact.level, beta)?;
    let schedule = config.schedule_at(artifact.level, beta)?;

    let probe_ks: Vec<u64> = match &opts.ks {
        Some(ks) => ks.clone(),
        None => {
            let candidates = [0u64, 1, 10, 100, 1_000, 10_000, 100_000, rec.final_k];
            let mut ks: Vec<u64> = candidates
                .iter()
                .copied()
                .filter(|k| rec.sample_at(*k).is_some())
                .collect();
            ks.dedup();
            ks
        }
    };

    // F_inf estimated by the terminal value; the window spread is its
    // uncertainty
    let f_inf = rec.final_f;
    let window = rec.terminal_window();
    let spread = window.iter().map(|s| s.f).fold(f64::NEG_INFINITY, f64::max)
        - window.iter().map(|s| s.f).fold(f64::INFINITY, f64::min);

    let probes = xi_probe(
        &rec,
        &probe_ks,
        &f,
        &oracle,
        &schedule,
        opts.channel,
        f_inf,
        config.run.n_draws,
        config.run.seed ^ 0x9e37,
    )?;

    println!(
        "{:>10} {:>14} {:>14} {:>14} {:>14}  event",
        "k", "F(x_k)", "lhs", "rhs_unit", "gamma_required"
    );
    let mut max_gamma: Option<f64> = None;
    let mut worst_k = None;
    for p in &probes {
        let event = if p.event_void {
            "void (F_inf >= F(x_k))"
        } else if p.gamma_required <= config.run.gamma {
            "holds"
        } else {
            "exceeds level"
        };
        println!(
            "{:>10} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}  {event}",
            p.k, p.f_at_x, p.lhs, p.rhs_unit, p.gamma_required
        );
        if !p.event_void && max_gamma.map(|m| p.gamma_required > m).unwrap_or(true) {
            max_gamma = Some(p.gamma_required);
            worst_k = Some(p.k);
        }
    }
    let verdict = match (max_gamma, worst_k) {
        (Some(g), Some(k)) if g <= config.run.gamma => format!(
            "consistent with an event level of {} at every probed iteration (max requirement {g:.6e} at k = {k})",
            config.run.gamma
        ),
        (Some(g), Some(k)) => format!(
            "event level {} exceeded at k = {k} (requires {g:.6e}); probes certify sampled iterations only",
            config.run.gamma
        ),
        _ => "event void at every probed iteration (limit already reached)".into(),
    };
    println!("f_inf estimate {f_inf:.9e} (terminal window spread {spread:.3e})");
    println!("{verdict}");

    let xi = XiArtifact {
        config: config.clone(),
        run: opts.run.display().to_string(),
        channel: opts.channel.to_string(),
        f_inf,
        f_inf_window_spread: spread,
        gamma: config.run.gamma,
        probes,
        max_gamma_required: max_gamma,
        verdict,
    };
    let dir = out_dir(config, &opts.out);
    let name = format!("xi_seed{}.json", rec.seed);
    let path = write_file(&dir, &name, &serde_json::to_string_pretty(&xi).unwrap())?;
    println!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// kl
// ---------------------------------------------------------------------------

pub struct KlOptions {
    pub component: usize,
    pub side: SampleSide,
    pub radius: f64,
    pub samples: usize,
    pub out: Option<PathBuf>,
}

/// Fits the local gradient-inequality exponent near one catalog component.
pub fn cmd_kl(config: &ExperimentConfig, opts: &KlOptions) -> CliResult<()> {
    let f = config.objective();
    let catalog = f.catalog();
    let component = catalog.get(opts.component).ok_or_else(|| {
        let listing: Vec<String> = catalog
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{i}: {}", c.describe()))
            .collect();
        CliError::check(format!(
            "component {} not in the catalog; available: {}",
            opts.component,
            listing.join(", ")
        ))
    })?;
    let fit = estimate_lojasiewicz_exponent(
        &f,
        component,
        opts.side,
        opts.radius,
        opts.samples,
        config.run.seed ^ 0x6b6c,
    )?;
    println!(
        "component {} ({}), side {}, radius {}",
        opts.component,
        component.describe(),
        opts.side,
        opts.radius
    );
    println!(
        "theta_hat = {:.4}   r_squared = {:.6}   samples used = {}",
        fit.theta_hat, fit.r_squared, fit.n_used
    );

    let mut csv = csv_metadata(config, config.run.seed);
    csv.push_str("x,gap,grad_norm\n");
    for s in &fit.samples {
        csv.push_str(&format!("{:?},{:?},{:?}\n", s.x, s.gap, s.grad_norm));
    }
    let dir = out_dir(config, &opts.out);
    let name = format!("kl_component{}_{}.csv", opts.component, opts.side);
    let path = write_file(&dir, &name, &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

/// Re-renders the SVG plot of a stored run from its own embedded metadata.
pub fn cmd_plot(run: &Path, out: &Option<PathBuf>) -> CliResult<()> {
    let (artifact, rec) = RunArtifact::load(run)?;
    let f = artifact.config.objective();
    let svg = render_trajectory_svg(&rec, &f, &artifact.config);
    let dir = out.clone().unwrap_or_else(|| artifact.config.run.out_dir.clone());
    let path = write_file(&dir, &format!("run_seed{}.svg", rec.seed), &svg)?;
    println!("wrote {}", path.display());
    Ok(())
}
