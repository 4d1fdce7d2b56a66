//! Command implementations behind the `gridflat` binary.
//!
//! Each command writes its report to `out`, diagnostics to `err`, and returns
//! the process exit status.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;

use crate::acceptance::run_suite;
use crate::config::RunConfig;
use crate::sim::run_scenario;
use crate::summary::summarize;
use crate::sweep::{grid_points, run_sweep, write_sweep_csv, SweepRange};
use crate::tuning::{tune, PoleSpec};

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    /// Invalid input or a failed acceptance criterion.
    Failure,
    /// The simulation stopped on a plant fault.
    Fault,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::Fault => 2,
        }
    }
}

fn load(config: Option<&Path>, err: &mut dyn Write) -> Option<RunConfig> {
    let loaded = match config {
        Some(path) => RunConfig::from_path(path),
        None => Ok(RunConfig::bundled()),
    };
    loaded.map_err(|e| writeln!(err, "error: {e}").ok()).ok()
}

/// Simulation overrides given on the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub decimation: Option<usize>,
}

/// Simulate a configuration, write the CSV record and print a summary.
pub fn cmd_run(
    config: Option<&Path>,
    output: &Path,
    overrides: RunOverrides,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let Some(cfg) = load(config, err) else {
        return ExitStatus::Failure;
    };
    let cfg = match cfg.with_overrides(overrides.dt, overrides.t_end, overrides.decimation) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return ExitStatus::Failure;
        }
    };
    info!("running {} steps", cfg.sim.steps());
    let outcome = match run_scenario(&cfg.params, &cfg.gains, &cfg.scenario, &cfg.sim) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return ExitStatus::Failure;
        }
    };
    for w in &outcome.warnings {
        let _ = writeln!(err, "warning: {w}");
    }

    let written = File::create(output).and_then(|f| {
        let mut w = BufWriter::new(f);
        outcome.record.write_csv(&mut w)?;
        w.flush()
    });
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write {}: {e}", output.display());
        return ExitStatus::Failure;
    }
    let _ = writeln!(
        out,
        "wrote {} samples to {}",
        outcome.record.len(),
        output.display()
    );

    let events = cfg
        .scenario
        .aligned_to_step(cfg.sim.dt)
        .map(|s| s.event_times())
        .unwrap_or_default();
    if let Ok(m) = summarize(&outcome.record, &events) {
        let _ = write!(out, "{m}");
    }
    match outcome.fault {
        Some(f) => {
            let _ = writeln!(err, "fault: {f}");
            ExitStatus::Fault
        }
        None => ExitStatus::Success,
    }
}

/// Print gains and assignment residuals for two pole-pair specifications.
pub fn cmd_tune(
    ts1: f64,
    zeta1: f64,
    ts2: f64,
    zeta2: f64,
    band_factor: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let tuned = PoleSpec::new(ts1, zeta1)
        .and_then(|a| Ok((a, PoleSpec::new(ts2, zeta2)?)))
        .and_then(|(a, b)| tune(&a, &b, band_factor));
    let t = match tuned {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return ExitStatus::Failure;
        }
    };
    let g = t.gains;
    let _ = writeln!(
        out,
        "k1 = {:e}\nk2 = {:e}\nk3 = {:e}\nk0 = {:e}",
        g.k1, g.k2, g.k3, g.k0
    );
    for (p, r) in t.poles.poles().iter().zip(t.report.residuals) {
        let _ = writeln!(out, "pole {:+.6e} {:+.6e}j  residual {:.3e}", p.re, p.im, r);
    }
    ExitStatus::Success
}

/// Run the acceptance suite and print one line per criterion.
pub fn cmd_verify(config: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let Some(cfg) = load(config, err) else {
        return ExitStatus::Failure;
    };
    let report = run_suite(&cfg);
    let _ = writeln!(out, "{report}");
    if report.all_passed() {
        ExitStatus::Success
    } else {
        ExitStatus::Failure
    }
}

/// Simulate a grid of `(rg, lg)` points and write one CSV row per point.
pub fn cmd_sweep(
    config: Option<&Path>,
    rg: &str,
    lg: &str,
    steps: usize,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let Some(cfg) = load(config, err) else {
        return ExitStatus::Failure;
    };
    let points = rg
        .parse::<SweepRange>()
        .and_then(|r| Ok((r, lg.parse::<SweepRange>()?)))
        .and_then(|(r, l)| grid_points(&r, &l, steps));
    let points = match points {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return ExitStatus::Failure;
        }
    };
    info!("sweeping {} grid points", points.len());
    let rows = run_sweep(&cfg, &points);
    let written = match output {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_sweep_csv(&rows, &mut w)?;
            w.flush()
        }),
        None => write_sweep_csv(&rows, &mut *out),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write sweep output: {e}");
        return ExitStatus::Failure;
    }
    if let Some(path) = output {
        let stable = rows
            .iter()
            .filter(|r| r.verdict == crate::sweep::Verdict::Stable)
            .count();
        let _ = writeln!(
            out,
            "wrote {} rows to {} ({stable} stable)",
            rows.len(),
            path.display()
        );
    }
    ExitStatus::Success
}
