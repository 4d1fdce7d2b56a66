//! Acceptance checks for the weak-grid experiment.
//!
//! Each check returns a [`CriterionResult`] with a one-line verdict. The
//! `verify` command and the `acceptance` test target both run
//! [`run_suite`] on the bundled configuration.

use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::config::{GainSource, RunConfig};
use crate::frames::{balanced_set, clarke_forward, space_vector_magnitude};
use crate::ode::rk4_step_pure;
use crate::plant::{
    complex_derivatives, steady_grid_current, three_phase_derivatives, PlantParams, PlantState,
    ThreePhasePlantState,
};
use crate::record::{Sample, TimeSeriesRecord};
use crate::sim::{run_scenario, SimConfig, SimOutcome};
use crate::summary::{summarize, SummaryMetrics};
use crate::trajectory::EventKind;
use crate::tuning::{tune, PoleSpec, DEFAULT_BAND_FACTOR};

/// Reference gains `k1, k2, k3, k0`, rounded to three significant figures.
pub const REFERENCE_GAINS: [f64; 4] = [4.28e10, 5.12e7, 1.01e4, 1.79e13];
pub const GAIN_TOLERANCE: f64 = 0.015;
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-8;
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-4;
pub const EXTINCTION_LIMIT: f64 = 0.015;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict}  {:<26} {} ({:.2} s)",
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceReport {
    pub results: Vec<CriterionResult>,
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CriterionResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for AcceptanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        let failed = self.results.iter().filter(|r| !r.passed).count();
        write!(
            f,
            "{} of {} criteria passed",
            self.results.len() - failed,
            self.results.len()
        )
    }
}

fn timed(name: &'static str, check: impl FnOnce() -> (bool, String)) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = check();
    CriterionResult {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Run every criterion against `cfg`.
pub fn run_suite(cfg: &RunConfig) -> AcceptanceReport {
    let mut results = vec![gain_reproduction(), model_equivalence(&cfg.params)];

    let start = Instant::now();
    let baseline = run_scenario(&cfg.params, &cfg.gains, &cfg.scenario, &cfg.sim);
    let elapsed = start.elapsed();
    match baseline {
        Ok(outcome) if outcome.is_ok() => {
            let events = cfg
                .scenario
                .aligned_to_step(cfg.sim.dt)
                .map(|s| s.event_times())
                .unwrap_or_default();
            let summary = summarize(&outcome.record, &events).ok();
            results.push(flat_chain(&outcome.record, cfg.params.rated_power));
            results.push(scenario_reproduction(
                cfg,
                &outcome,
                summary.as_ref(),
                elapsed,
            ));
            results.push(grid_disturbance(cfg, summary.as_ref()));
            results.push(pole_residuals(cfg));
            results.push(step_convergence(cfg, &outcome.record));
        }
        other => {
            let why = match other {
                Ok(o) => format!("baseline run faulted: {}", o.fault.expect("fault present")),
                Err(e) => format!("baseline run rejected: {e}"),
            };
            for name in [
                "flat-output chain",
                "scenario reproduction",
                "grid-disturbance rejection",
            ] {
                results.push(CriterionResult {
                    name,
                    passed: false,
                    detail: why.clone(),
                    elapsed,
                });
            }
            results.push(pole_residuals(cfg));
            results.push(CriterionResult {
                name: "step-size convergence",
                passed: false,
                detail: why,
                elapsed,
            });
        }
    }
    AcceptanceReport { results }
}

/// Tuning for 1 ms / 10 ms settling at ζ = 0.707 reproduces the reference gains.
pub fn gain_reproduction() -> CriterionResult {
    timed("gain reproduction", || {
        let spec = |ts| PoleSpec::new(ts, 0.707).expect("valid spec");
        let tuned = match tune(&spec(1e-3), &spec(10e-3), DEFAULT_BAND_FACTOR) {
            Ok(t) => t,
            Err(e) => return (false, format!("tuning failed: {e}")),
        };
        let g = tuned.gains;
        let got = [g.k1, g.k2, g.k3, g.k0];
        let worst = got
            .iter()
            .zip(REFERENCE_GAINS)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        let detail = format!(
            "k1 {:.4e} k2 {:.4e} k3 {:.4e} k0 {:.4e}, worst deviation {:.3}% (limit {:.1}%)",
            g.k1,
            g.k2,
            g.k3,
            g.k0,
            worst * 100.0,
            GAIN_TOLERANCE * 100.0
        );
        (worst < GAIN_TOLERANCE, detail)
    })
}

/// Largest deviation of the three-phase model from the complex model over a
/// 20 ms open-loop run, relative to each variable's peak.
pub fn model_equivalence_deviation(params: &PlantParams) -> f64 {
    let dt = 1e-6;
    let steps = 20_000;
    let mu_peak = 0.45;
    let mu_phase = 0.2;
    let p_i = 3000.0;
    let w = params.omega;
    let floor = 0.0;

    let i_g0 = steady_grid_current(
        Complex64::new(0.0, 0.0),
        params.grid_voltage(0.0, 1.0),
        params,
    );
    let mut xc = PlantState {
        v_c1: 735.0,
        i_g: i_g0,
        ..Default::default()
    };
    let mut x3 = ThreePhasePlantState::from_complex(&xc);

    let mu_sv = space_vector_magnitude(mu_peak);
    let mut peak = [0.0f64; 4];
    let mut dev = [0.0f64; 4];
    for n in 0..steps {
        let t = n as f64 * dt;
        xc = rk4_step_pure(xc, t, dt, |ts, s| {
            let mu = Complex64::from_polar(mu_sv, w * ts + mu_phase);
            complex_derivatives(params, &s, mu, p_i, params.grid_voltage(ts, 1.0), floor)
                .expect("no floor")
        });
        x3 = rk4_step_pure(x3, t, dt, |ts, s| {
            let mu = balanced_set(mu_peak, w * ts + mu_phase);
            let v_g = balanced_set(params.vg_peak_phase, w * ts);
            three_phase_derivatives(params, &s, mu, p_i, v_g, floor).expect("no floor")
        });
        let pairs = [
            (Complex64::new(xc.v_c1, 0.0), Complex64::new(x3.v_c1, 0.0)),
            (xc.i_l, clarke_forward(x3.i_l)),
            (xc.v_c2, clarke_forward(x3.v_c2)),
            (xc.i_g, clarke_forward(x3.i_g)),
        ];
        for (k, (c, m)) in pairs.iter().enumerate() {
            peak[k] = peak[k].max(c.norm());
            dev[k] = dev[k].max((c - m).norm());
        }
    }
    dev.iter()
        .zip(peak)
        .map(|(d, p)| d / p.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

pub fn model_equivalence(params: &PlantParams) -> CriterionResult {
    timed("model equivalence", || {
        let rel = model_equivalence_deviation(params);
        (
            rel < EQUIVALENCE_TOLERANCE,
            format!("max relative deviation {rel:.3e} (limit {EQUIVALENCE_TOLERANCE:e})"),
        )
    })
}

/// RMS mismatch of central differences along the flat chain:
/// `(dξ1/dt − ξ2, dξ3/dt − w)`.
pub fn flat_chain_rms(samples: &[Sample]) -> (f64, f64) {
    let mut sum12 = 0.0;
    let mut sum3w = 0.0;
    let n = samples.len().saturating_sub(2);
    for k in samples.windows(3) {
        let (a, b, c) = (&k[0], &k[1], &k[2]);
        let h = c.t - a.t;
        sum12 += ((c.xi1 - a.xi1) / h - b.xi2).norm_sqr();
        sum3w += ((c.xi3 - a.xi3) / h - b.w).norm_sqr();
    }
    let n = n.max(1) as f64;
    ((sum12 / n).sqrt(), (sum3w / n).sqrt())
}

pub fn flat_chain(record: &TimeSeriesRecord, rated_power: f64) -> CriterionResult {
    timed("flat-output chain", || {
        let (rms12, rms3w) = flat_chain_rms(&record.samples);
        let w_peak = record
            .samples
            .iter()
            .map(|s| s.w.norm())
            .fold(0.0, f64::max);
        let lim12 = 1e-3 * rated_power;
        let lim3w = 1e-2 * w_peak;
        let detail = format!(
            "RMS dxi1/dt - xi2 = {rms12:.3e} W (limit {lim12:.1}), RMS dxi3/dt - w = {rms3w:.3e} (limit {lim3w:.3e})"
        );
        (rms12 < lim12 && rms3w < lim3w, detail)
    })
}

pub fn scenario_reproduction(
    cfg: &RunConfig,
    outcome: &SimOutcome,
    summary: Option<&SummaryMetrics>,
    elapsed: Duration,
) -> CriterionResult {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    let window = outcome.record.window(0.100, 0.120);
    if window.is_empty() {
        failures.push("no samples in [100, 120] ms".to_string());
    } else {
        let range = |f: &dyn Fn(&Sample) -> f64| {
            window
                .iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                })
        };
        let (ig_lo, ig_hi) = range(&|s| s.i_g.norm());
        let (vc_lo, vc_hi) = range(&|s| s.v_c2.norm());
        let (dc_lo, dc_hi) = range(&|s| (s.v_c1 - 750.0).abs());
        notes.push(format!("|i_g| {ig_lo:.3}..{ig_hi:.3} A, |v_c2| {vc_lo:.2}..{vc_hi:.2} V, |v_c1 - 750| {dc_lo:.3}..{dc_hi:.3} V"));
        if !(ig_lo >= 20.0 * 0.97 && ig_hi <= 20.0 * 1.03) {
            failures.push("|i_g| outside 20 A +/- 3%".into());
        }
        if !(vc_lo >= 400.0 * 0.97 && vc_hi <= 400.0 * 1.03) {
            failures.push("|v_c2| outside 400 V +/- 3%".into());
        }
        if !(dc_lo > 0.0 && dc_hi <= 1.5) {
            failures.push("DC-link discrepancy outside (0, 1.5] V".into());
        }
    }

    let limit = 0.01 * cfg.params.rated_power;
    match summary.and_then(SummaryMetrics::max_steady_power_mismatch) {
        Some(m) => {
            notes.push(format!("max steady |p - p_i| {m:.3} W"));
            if !(m < limit) {
                failures.push(format!("steady |p - p_i| above {limit} W"));
            }
        }
        None => failures.push("no steady-state segments".into()),
    }
    let mu = summary.map_or(f64::INFINITY, |s| s.max_mu_phase);
    notes.push(format!("max |mu| {mu:.4}"));
    if !(mu < 1.0) {
        failures.push("modulation saturates".into());
    }
    notes.push(format!("guard trips {}", outcome.guard_count));
    if outcome.guard_count != 0 {
        failures.push("guard trips".into());
    }
    let total = elapsed + start.elapsed();
    if cfg.sim.t_end < 0.28 {
        failures.push("run shorter than 280 ms".into());
    }
    if total > Duration::from_secs(60) {
        failures.push("runtime over 60 s".into());
    }
    let mut detail = notes.join(", ");
    if !failures.is_empty() {
        detail = format!("{detail}; failed: {}", failures.join("; "));
    }
    CriterionResult {
        name: "scenario reproduction",
        passed: failures.is_empty(),
        detail,
        elapsed: total,
    }
}

pub fn grid_disturbance(cfg: &RunConfig, summary: Option<&SummaryMetrics>) -> CriterionResult {
    timed("grid-disturbance rejection", || {
        let Some(summary) = summary else {
            return (false, "no summary".into());
        };
        let times: Vec<f64> = cfg
            .scenario
            .aligned_to_step(cfg.sim.dt)
            .map(|s| {
                s.events()
                    .iter()
                    .filter(|e| e.kind == EventKind::GridMagnitude)
                    .map(|e| e.time)
                    .collect()
            })
            .unwrap_or_default();
        if times.is_empty() {
            return (false, "scenario has no grid-magnitude steps".into());
        }
        let mut ok = true;
        let parts: Vec<String> = times
            .iter()
            .map(
                |&t| match summary.extinction_after(t).and_then(|e| e.time) {
                    Some(dt) => {
                        ok &= dt < EXTINCTION_LIMIT;
                        format!("{:.0} ms: {:.2} ms", t * 1e3, dt * 1e3)
                    }
                    None => {
                        ok = false;
                        format!("{:.0} ms: not settled", t * 1e3)
                    }
                },
            )
            .collect();
        (
            ok,
            format!(
                "{} (limit {:.0} ms)",
                parts.join(", "),
                EXTINCTION_LIMIT * 1e3
            ),
        )
    })
}

pub fn pole_residuals(cfg: &RunConfig) -> CriterionResult {
    timed("pole-assignment residuals", || {
        let (fast, slow, band) = match cfg.gain_source {
            GainSource::Poles {
                fast,
                slow,
                band_factor,
            } => (fast, slow, band_factor),
            GainSource::Explicit => {
                let spec = |ts| PoleSpec::new(ts, 0.707).expect("valid spec");
                (spec(1e-3), spec(10e-3), DEFAULT_BAND_FACTOR)
            }
        };
        match tune(&fast, &slow, band) {
            Ok(t) => {
                let r = t.report.max_residual();
                (
                    t.report.passes(RESIDUAL_TOLERANCE),
                    format!("max scaled residual {r:.3e} (limit {RESIDUAL_TOLERANCE:e})"),
                )
            }
            Err(e) => (false, format!("tuning failed: {e}")),
        }
    })
}

/// Largest relative change of any state variable between two records logged
/// at the same instants.
pub fn record_deviation(a: &TimeSeriesRecord, b: &TimeSeriesRecord) -> Result<f64, String> {
    let states = |s: &Sample| {
        [
            Complex64::new(s.v_c1, 0.0),
            s.i_l,
            s.v_c2,
            s.i_g,
            Complex64::new(s.q_int, 0.0),
            s.y,
        ]
    };
    let mut peak = [0.0f64; 6];
    let mut dev = [0.0f64; 6];
    let mut j = 0;
    let mut common = 0usize;
    for sa in &a.samples {
        while j < b.samples.len() && b.samples[j].t < sa.t - 1e-12 {
            j += 1;
        }
        let Some(sb) = b.samples.get(j) else { break };
        if (sb.t - sa.t).abs() > 1e-12 {
            continue;
        }
        common += 1;
        for (k, (x, y)) in states(sa).iter().zip(states(sb)).enumerate() {
            peak[k] = peak[k].max(x.norm());
            dev[k] = dev[k].max((x - y).norm());
        }
    }
    if common == 0 {
        return Err("records share no instants".into());
    }
    Ok(dev
        .iter()
        .zip(peak)
        .map(|(d, p)| if p > 0.0 { d / p } else { *d })
        .fold(0.0, f64::max))
}

pub fn step_convergence(cfg: &RunConfig, baseline: &TimeSeriesRecord) -> CriterionResult {
    timed("step-size convergence", || {
        let fine = SimConfig {
            dt: cfg.sim.dt / 2.0,
            decimation: cfg.sim.decimation * 2,
            ..cfg.sim
        };
        let run = match run_scenario(&cfg.params, &cfg.gains, &cfg.scenario, &fine) {
            Ok(o) if o.is_ok() => o,
            Ok(o) => {
                return (
                    false,
                    format!("half-step run faulted: {}", o.fault.expect("fault present")),
                )
            }
            Err(e) => return (false, format!("half-step run rejected: {e}")),
        };
        match record_deviation(baseline, &run.record) {
            Ok(d) => (
                d < CONVERGENCE_TOLERANCE,
                format!(
                    "dt {:.2e} s vs {:.2e} s: max relative change {:.3e}% (limit {:.2}%)",
                    cfg.sim.dt,
                    fine.dt,
                    d * 100.0,
                    CONVERGENCE_TOLERANCE * 100.0
                ),
            ),
            Err(e) => (false, e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_gains_reproduce() {
        let r = gain_reproduction();
        assert!(r.passed, "{r}");
    }

    #[test]
    fn identical_records_have_zero_deviation() {
        let rec = TimeSeriesRecord {
            samples: (0..5)
                .map(|i| Sample {
                    t: i as f64,
                    v_c1: 700.0 + i as f64,
                    ..Default::default()
                })
                .collect(),
        };
        assert_eq!(record_deviation(&rec, &rec), Ok(0.0));
        let other = TimeSeriesRecord {
            samples: vec![Sample {
                t: 0.5,
                ..Default::default()
            }],
        };
        assert!(record_deviation(&rec, &other).is_err());
    }

    #[test]
    fn flat_chain_rms_of_exact_polynomials() {
        // ξ1 = t², ξ2 = 2t; ξ3 = t, w = 1: central differences are exact for these
        let samples: Vec<Sample> = (0..50)
            .map(|i| {
                let t = i as f64 * 1e-3;
                Sample {
                    t,
                    xi1: Complex64::new(t * t, 0.0),
                    xi2: Complex64::new(2.0 * t, 0.0),
                    xi3: Complex64::new(0.0, t),
                    w: Complex64::new(0.0, 1.0),
                    ..Default::default()
                }
            })
            .collect();
        let (a, b) = flat_chain_rms(&samples);
        assert!(a < 1e-9 && b < 1e-9, "{a} {b}");
    }
}
