//! Grid-strength sweeps over grid resistance and inductance.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::RunConfig;
use crate::sim::{run_scenario, SimOutcome};
use crate::summary::summarize;
use crate::trajectory::EventKind;

/// Guard trips in more than this share of steps count as a guard storm.
pub const GUARD_STORM_FRACTION: f64 = 0.01;
/// `|e_ξ1|` at the end of the run must be below this share of its peak for
/// the errors to count as extinguished.
pub const RESIDUAL_ERROR_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("range `{text}`: {reason}")]
    Range { text: String, reason: String },
    #[error("{axis} values must be {rule}, got {value}")]
    Domain {
        axis: &'static str,
        rule: &'static str,
        value: f64,
    },
}

/// `start` alone or `start:stop`, sampled at a shared number of points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
}

impl FromStr for SweepRange {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| SweepError::Range {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| bad("expected a number or `start:stop`"))
        };
        let (start, stop) = match s.split_once(':') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if !(start.is_finite() && stop.is_finite()) {
            return Err(bad("bounds must be finite"));
        }
        Ok(Self { start, stop })
    }
}

impl SweepRange {
    pub fn single(v: f64) -> Self {
        Self { start: v, stop: v }
    }

    /// `steps` evenly spaced values; a degenerate range yields one value.
    pub fn values(&self, steps: usize) -> Vec<f64> {
        match steps {
            0 => vec![],
            _ if self.start == self.stop => vec![self.start],
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Fault,
    GuardStorm,
    PersistentError,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Fault => "fault",
            Verdict::GuardStorm => "guard_storm",
            Verdict::PersistentError => "persistent_error",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rg: f64,
    pub lg: f64,
    pub scr: f64,
    pub x_over_r: f64,
    pub verdict: Verdict,
    /// NaN when the run completed.
    pub fault_time: f64,
    pub guard_count: u64,
    pub max_mu_phase: f64,
    pub max_abs_p: f64,
    pub max_abs_q: f64,
    /// Final `|e_ξ1|` divided by its peak over the run.
    pub residual_error_ratio: f64,
    /// Slowest extinction after a grid-magnitude step; NaN if any never settles.
    pub worst_grid_extinction: f64,
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "rg_ohm",
    "lg_H",
    "scr",
    "x_over_r",
    "verdict",
    "fault_time_s",
    "guard_count",
    "max_mu_phase",
    "max_abs_p_W",
    "max_abs_q_var",
    "residual_error_ratio",
    "worst_grid_extinction_s",
];

/// Every `(rg, lg)` combination, `rg` varying slowest.
pub fn grid_points(
    rg: &SweepRange,
    lg: &SweepRange,
    steps: usize,
) -> Result<Vec<(f64, f64)>, SweepError> {
    let rgs = rg.values(steps);
    let lgs = lg.values(steps);
    if let Some(&v) = rgs.iter().find(|v| **v < 0.0) {
        return Err(SweepError::Domain {
            axis: "rg",
            rule: ">= 0",
            value: v,
        });
    }
    if let Some(&v) = lgs.iter().find(|v| **v <= 0.0) {
        return Err(SweepError::Domain {
            axis: "lg",
            rule: "> 0",
            value: v,
        });
    }
    Ok(rgs
        .iter()
        .flat_map(|&r| lgs.iter().map(move |&l| (r, l)))
        .collect())
}

/// Simulate every point in parallel. Rows come back in grid order.
pub fn run_sweep(base: &RunConfig, points: &[(f64, f64)]) -> Vec<SweepRow> {
    points
        .par_iter()
        .map(|&(rg, lg)| sweep_point(base, rg, lg))
        .collect()
}

pub fn sweep_point(base: &RunConfig, rg: f64, lg: f64) -> SweepRow {
    let params = crate::plant::PlantParams {
        rg,
        lg,
        ..base.params
    };
    let mut row = SweepRow {
        rg,
        lg,
        scr: params.short_circuit_ratio(),
        x_over_r: params.x_over_r(),
        verdict: Verdict::Fault,
        fault_time: f64::NAN,
        guard_count: 0,
        max_mu_phase: f64::NAN,
        max_abs_p: f64::NAN,
        max_abs_q: f64::NAN,
        residual_error_ratio: f64::NAN,
        worst_grid_extinction: f64::NAN,
    };
    let Ok(outcome) = run_scenario(&params, &base.gains, &base.scenario, &base.sim) else {
        row.fault_time = 0.0;
        return row;
    };
    fill(&mut row, base, &outcome);
    row
}

fn fill(row: &mut SweepRow, base: &RunConfig, outcome: &SimOutcome) {
    row.guard_count = outcome.guard_count;
    let rec = &outcome.record;
    let events = base
        .scenario
        .aligned_to_step(base.sim.dt)
        .map(|s| s.event_times())
        .unwrap_or_default();
    if let Ok(m) = summarize(rec, &events) {
        row.max_mu_phase = m.max_mu_phase;
        row.max_abs_p = m.max_abs_p;
        row.max_abs_q = m.max_abs_q;
        let grid_events = base
            .scenario
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::GridMagnitude);
        row.worst_grid_extinction = grid_events
            .map(|e| {
                let t = (e.time / base.sim.dt).round() * base.sim.dt;
                m.extinction_after(t)
                    .and_then(|x| x.time)
                    .unwrap_or(f64::NAN)
            })
            .fold(0.0, |acc: f64, v| {
                if acc.is_nan() || v.is_nan() {
                    f64::NAN
                } else {
                    acc.max(v)
                }
            });
    }
    let peak = rec.samples.iter().map(|s| s.e1.norm()).fold(0.0, f64::max);
    if let Some(last) = rec.samples.last() {
        row.residual_error_ratio = if peak > 0.0 {
            last.e1.norm() / peak
        } else {
            0.0
        };
    }

    let storm_limit = GUARD_STORM_FRACTION * outcome.steps_completed.max(1) as f64;
    row.verdict = if let Some(f) = outcome.fault {
        row.fault_time = f.time;
        Verdict::Fault
    } else if outcome.guard_count as f64 > storm_limit {
        Verdict::GuardStorm
    } else if !(row.residual_error_ratio < RESIDUAL_ERROR_FRACTION) {
        Verdict::PersistentError
    } else {
        Verdict::Stable
    };
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", SWEEP_COLUMNS.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.rg,
            r.lg,
            r.scr,
            r.x_over_r,
            r.verdict,
            r.fault_time,
            r.guard_count,
            r.max_mu_phase,
            r.max_abs_p,
            r.max_abs_q,
            r.residual_error_ratio,
            r.worst_grid_extinction
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(
            "28.28".parse::<SweepRange>().unwrap(),
            SweepRange::single(28.28)
        );
        assert_eq!(
            "1:2".parse::<SweepRange>().unwrap(),
            SweepRange {
                start: 1.0,
                stop: 2.0
            }
        );
        assert!("a:2".parse::<SweepRange>().is_err());
        assert!("inf".parse::<SweepRange>().is_err());
    }

    #[test]
    fn linspace_values() {
        let r = SweepRange {
            start: 0.0,
            stop: 1.0,
        };
        assert_eq!(r.values(3), vec![0.0, 0.5, 1.0]);
        assert_eq!(r.values(1), vec![0.0]);
        assert!(r.values(0).is_empty());
        assert_eq!(SweepRange::single(5.0).values(4), vec![5.0]);
    }

    #[test]
    fn grid_order_and_domain() {
        let pts = grid_points(&"1:2".parse().unwrap(), &"0.1:0.2".parse().unwrap(), 2).unwrap();
        assert_eq!(pts, vec![(1.0, 0.1), (1.0, 0.2), (2.0, 0.1), (2.0, 0.2)]);
        assert!(grid_points(&SweepRange::single(-1.0), &SweepRange::single(0.1), 1).is_err());
        assert!(grid_points(&SweepRange::single(1.0), &SweepRange::single(0.0), 1).is_err());
    }

    #[test]
    fn empty_sweep_writes_header_only() {
        let mut buf = Vec::new();
        write_sweep_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{}\n", SWEEP_COLUMNS.join(","))
        );
    }
}
