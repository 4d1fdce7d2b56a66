//! Fixed-step closed-loop simulation of plant and controller.
//!
//! Plant state and the controller's integral state form one augmented RK4
//! system. The controller is re-evaluated at every stage, and scenario events
//! are snapped to step boundaries so that each step sees a single set of
//! active set-points.

use std::ops::{Add, Mul};

use log::debug;
use num_complex::Complex64;
use thiserror::Error;

use crate::controller::{ControllerError, ControllerGains, FlatnessController, GuardThresholds};
use crate::frames::clarke_inverse;
use crate::ode::rk4_step;
use crate::plant::{
    complex_derivatives, pcc_powers, steady_grid_current, DcLinkCollapse, PlantError, PlantParams,
    PlantState, DEFAULT_DC_FLOOR,
};
use crate::record::{Sample, TimeSeriesRecord};
use crate::trajectory::{Scenario, ScenarioError};
use crate::tuning::closed_loop_poles;

/// How the plant state is set at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Initialization {
    /// `v_C1` at its reference, no filter current or voltage, and the grid
    /// current in sinusoidal steady state behind the grid impedance.
    #[default]
    GridDriven,
    /// Grid current in steady state flowing through the filter inductor
    /// (`i_L = i_g`, `v_C2 = 0`) with `v_C1` chosen so the stored energy
    /// matches its reference. All tracking errors start at zero.
    Matched,
    Explicit(PlantState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// End time (s).
    pub t_end: f64,
    /// Log every Nth step.
    pub decimation: usize,
    pub guard: GuardThresholds,
    /// DC-link voltage floor (V).
    pub v_floor: f64,
    pub init: Initialization,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            t_end: 0.28,
            decimation: 50,
            guard: GuardThresholds::default(),
            v_floor: DEFAULT_DC_FLOOR,
            init: Initialization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation setting `{field}` is invalid: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field, reason: &str| {
            Err(SimError::InvalidConfig {
                field,
                reason: reason.into(),
            })
        };
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", "must be finite and > 0");
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad("t_end", "must be finite and > 0");
        }
        if self.dt > self.t_end {
            return bad("dt", "must not exceed t_end");
        }
        if self.decimation == 0 {
            return bad("decimation", "must be a positive integer");
        }
        if !(self.v_floor.is_finite() && self.v_floor >= 0.0) {
            return bad("v_floor", "must be finite and >= 0");
        }
        self.guard.validate()?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimWarning {
    /// The step exceeds a tenth of the fastest closed-loop time constant.
    StepTooLarge { dt: f64, fastest_time_constant: f64 },
    /// The gains do not give a Hurwitz error polynomial.
    UnstableErrorDynamics { pole: Complex64 },
}

impl std::fmt::Display for SimWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimWarning::StepTooLarge { dt, fastest_time_constant } => write!(
                f,
                "step size {dt:e} s exceeds 1/10 of the fastest closed-loop time constant ({fastest_time_constant:e} s)"
            ),
            SimWarning::UnstableErrorDynamics { pole } => {
                write!(f, "controller gains place an error-system pole at {pole} (not Hurwitz)")
            }
        }
    }
}

/// Step-size adequacy and stability checks for a gain set.
pub fn step_size_warnings(dt: f64, gains: &ControllerGains) -> Vec<SimWarning> {
    let poles = closed_loop_poles(gains);
    let mut out = Vec::new();
    if let Some(p) = poles.iter().find(|p| p.re >= 0.0) {
        out.push(SimWarning::UnstableErrorDynamics { pole: *p });
    }
    let fastest = poles.iter().map(|p| p.re.abs()).fold(0.0, f64::max);
    if fastest > 0.0 {
        let tau = 1.0 / fastest;
        if dt > tau / 10.0 {
            out.push(SimWarning::StepTooLarge {
                dt,
                fastest_time_constant: tau,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultKind {
    DcLinkCollapse(DcLinkCollapse),
    NonFinite,
}

/// Why and where a run stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimFault {
    pub time: f64,
    pub kind: FaultKind,
    /// Plant state at the start of the failing step.
    pub state: PlantState,
}

impl std::fmt::Display for SimFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            FaultKind::DcLinkCollapse(e) => write!(f, "t = {:.6} s: {e}", self.time)?,
            FaultKind::NonFinite => write!(f, "t = {:.6} s: state became non-finite", self.time)?,
        }
        let s = &self.state;
        write!(
            f,
            " [v_c1 = {:.4} V, i_l = {:.4} A, v_c2 = {:.4} V, i_g = {:.4} A, q_int = {:.4} J]",
            s.v_c1, s.i_l, s.v_c2, s.i_g, s.q_int
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub record: TimeSeriesRecord,
    pub fault: Option<SimFault>,
    pub warnings: Vec<SimWarning>,
    /// Number of steps in which any controller evaluation hit a guard.
    pub guard_count: u64,
    pub steps_completed: usize,
}

impl SimOutcome {
    pub fn is_ok(&self) -> bool {
        self.fault.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Augmented {
    plant: PlantState,
    y: Complex64,
}

impl Add for Augmented {
    type Output = Augmented;
    fn add(self, r: Self) -> Self {
        Self {
            plant: self.plant + r.plant,
            y: self.y + r.y,
        }
    }
}

impl Mul<f64> for Augmented {
    type Output = Augmented;
    fn mul(self, k: f64) -> Self {
        Self {
            plant: self.plant * k,
            y: self.y * k,
        }
    }
}

/// Plant state at `t = 0` for the chosen initialization.
pub fn initial_state(p: &PlantParams, scenario: &Scenario, init: &Initialization) -> PlantState {
    let r = scenario.reference_at(0.0);
    let v_g = p.grid_voltage(0.0, scenario.grid_magnitude_at(0.0));
    let zero = Complex64::new(0.0, 0.0);
    let i_g = steady_grid_current(zero, v_g, p);
    match init {
        Initialization::GridDriven => PlantState {
            v_c1: r.v_ref,
            i_l: zero,
            v_c2: zero,
            i_g,
            q_int: 0.0,
        },
        Initialization::Matched => {
            let v_c1 = (r.v_ref * r.v_ref - p.l * i_g.norm_sqr() / p.c1)
                .max(0.0)
                .sqrt();
            PlantState {
                v_c1,
                i_l: i_g,
                v_c2: zero,
                i_g,
                q_int: 0.0,
            }
        }
        Initialization::Explicit(s) => *s,
    }
}

/// Integrate the closed loop over `[0, cfg.t_end]`.
///
/// Configuration problems are returned as errors; faults during integration
/// end the run early and are reported in [`SimOutcome::fault`] alongside the
/// partial record.
pub fn run_scenario(
    params: &PlantParams,
    gains: &ControllerGains,
    scenario: &Scenario,
    cfg: &SimConfig,
) -> Result<SimOutcome, SimError> {
    params.validate()?;
    cfg.validate()?;
    let warnings = step_size_warnings(cfg.dt, gains);

    let dt = cfg.dt;
    let scenario = scenario.aligned_to_step(dt)?;
    let mut ctl = FlatnessController::new(*params, *gains, cfg.guard);
    let mut x = Augmented {
        plant: initial_state(params, &scenario, &cfg.init),
        y: Complex64::new(0.0, 0.0),
    };

    let steps = cfg.steps();
    debug!("integrating {steps} steps of {dt:e} s");
    let mut record = TimeSeriesRecord {
        samples: Vec::with_capacity(steps / cfg.decimation + 2),
    };
    let mut guard_count = 0u64;

    // Output at the start of the run becomes the held value for guard trips.
    let first = log_sample(params, &scenario, &mut ctl, &x, 0.0, &mut guard_count);
    record.samples.push(first);

    let mut fault = None;
    let mut done = 0;
    for n in 0..steps {
        let t = n as f64 * dt;
        let grid = scenario.grid_magnitude_with_cutoff(t);
        let mut tripped = false;
        let stepped = rk4_step(x, t, dt, |ts, xs: Augmented| {
            let r = scenario.reference_with_cutoff(ts, t);
            let out = ctl.evaluate(&xs.plant, xs.y, &r);
            tripped |= out.guard.is_some();
            let v_g = params.grid_voltage(ts, grid);
            complex_derivatives(params, &xs.plant, out.mu, r.p_i, v_g, cfg.v_floor)
                .map(|d| Augmented {
                    plant: d,
                    y: out.flat.e1,
                })
                .map_err(|e| (ts, e))
        });
        let next = match stepped {
            Ok(next) => next,
            Err((ts, e)) => {
                fault = Some(SimFault {
                    time: ts,
                    kind: FaultKind::DcLinkCollapse(e),
                    state: x.plant,
                });
                break;
            }
        };
        if !(next.plant.is_finite() && next.y.is_finite()) {
            fault = Some(SimFault {
                time: t + dt,
                kind: FaultKind::NonFinite,
                state: x.plant,
            });
            break;
        }
        guard_count += u64::from(tripped);
        x = next;
        done = n + 1;

        let t_next = done as f64 * dt;
        if done % cfg.decimation == 0 {
            let s = log_sample(params, &scenario, &mut ctl, &x, t_next, &mut guard_count);
            record.samples.push(s);
        } else {
            let r = scenario.reference_at(t_next);
            let out = ctl.evaluate(&x.plant, x.y, &r);
            ctl.state.last_mu = out.mu;
        }
    }

    Ok(SimOutcome {
        record,
        fault,
        warnings,
        guard_count,
        steps_completed: done,
    })
}

fn log_sample(
    params: &PlantParams,
    scenario: &Scenario,
    ctl: &mut FlatnessController,
    x: &Augmented,
    t: f64,
    guard_count: &mut u64,
) -> Sample {
    let r = scenario.reference_at(t);
    ctl.state.y = x.y;
    let out = ctl.evaluate(&x.plant, x.y, &r);
    ctl.state.last_mu = out.mu;
    if t == 0.0 && out.guard.is_some() {
        *guard_count += 1;
    }
    let s = &x.plant;
    let (p, q) = pcc_powers(s.v_c2, s.i_g);
    Sample {
        t,
        v_c1: s.v_c1,
        v_c1_ref: r.v_ref,
        i_l: s.i_l,
        v_c2: s.v_c2,
        i_g: s.i_g,
        v_g: params.grid_voltage(t, scenario.grid_magnitude_at(t)),
        mu_abc: clarke_inverse(out.mu),
        p_i: r.p_i,
        p,
        q,
        q_ref: r.q_ref,
        e1: out.flat.e1,
        e2: out.flat.e2,
        e3: out.flat.e3,
        xi1: out.flat.xi1,
        xi2: out.flat.xi2,
        xi3: out.flat.xi3,
        w: out.w,
        y: x.y,
        q_int: s.q_int,
        guard_count: *guard_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{InitialSetpoints, Shaping};
    use crate::tuning::{gains_from_poles, PoleSet, PoleSpec, DEFAULT_BAND_FACTOR};

    fn gains() -> ControllerGains {
        let set = PoleSet::from_specs(
            &PoleSpec::new(1e-3, 0.707).unwrap(),
            &PoleSpec::new(10e-3, 0.707).unwrap(),
            DEFAULT_BAND_FACTOR,
        )
        .unwrap();
        gains_from_poles(set.poles()).unwrap()
    }

    fn quiet() -> Scenario {
        Scenario::new(InitialSetpoints::default(), vec![], Shaping::default()).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig {
            t_end: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(SimError::InvalidConfig { field: "t_end", .. })
        ));
        cfg = SimConfig {
            decimation: 0,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(SimError::InvalidConfig {
                field: "decimation",
                ..
            })
        ));
        cfg = SimConfig {
            dt: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn step_size_warning_thresholds() {
        let g = gains();
        assert!(step_size_warnings(1e-6, &g).is_empty());
        assert!(matches!(
            step_size_warnings(1e-3, &g)[..],
            [SimWarning::StepTooLarge { .. }]
        ));
        assert!(step_size_warnings(1e-6, &g.scaled(100.0))
            .iter()
            .any(|w| matches!(w, SimWarning::StepTooLarge { .. })));
    }

    #[test]
    fn matched_equilibrium_holds() {
        let p = PlantParams::weak_grid_reference();
        let cfg = SimConfig {
            t_end: 0.02,
            init: Initialization::Matched,
            ..Default::default()
        };
        let out = run_scenario(&p, &gains(), &quiet(), &cfg).unwrap();
        assert!(out.is_ok());
        assert_eq!(out.guard_count, 0);
        for s in &out.record.samples {
            assert!(s.e1.norm() < 1e-9, "e1 = {} at {}", s.e1, s.t);
            assert!(s.e2.norm() < 1e-5, "e2 = {} at {}", s.e2, s.t);
            assert!(s.e3.norm() < 1e-1, "e3 = {} at {}", s.e3, s.t);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let p = PlantParams::weak_grid_reference();
        let cfg = SimConfig {
            t_end: 0.03,
            ..Default::default()
        };
        let sc = Scenario::weak_grid_test_sequence(p.rated_power);
        let a = run_scenario(&p, &gains(), &sc, &cfg).unwrap();
        let b = run_scenario(&p, &gains(), &sc, &cfg).unwrap();
        assert_eq!(a.record, b.record);
    }

    #[test]
    fn zero_grid_current_trips_guard() {
        let p = PlantParams::weak_grid_reference();
        let init = PlantState {
            v_c1: 735.0,
            ..Default::default()
        };
        let cfg = SimConfig {
            t_end: 1e-4,
            init: Initialization::Explicit(init),
            ..Default::default()
        };
        let out = run_scenario(&p, &gains(), &quiet(), &cfg).unwrap();
        assert!(out.guard_count > 0);
        assert!(out.record.samples[0].guard_count > 0);
    }

    #[test]
    fn dc_link_collapse_is_a_fault() {
        let p = PlantParams::weak_grid_reference();
        let init = PlantState {
            v_c1: 9.0,
            i_g: Complex64::new(5.0, 0.0),
            ..Default::default()
        };
        let cfg = SimConfig {
            t_end: 1e-3,
            init: Initialization::Explicit(init),
            ..Default::default()
        };
        let out = run_scenario(&p, &gains(), &quiet(), &cfg).unwrap();
        let fault = out.fault.expect("fault");
        assert!(matches!(fault.kind, FaultKind::DcLinkCollapse(_)));
        assert_eq!(fault.time, 0.0);
        assert_eq!(out.record.len(), 1);
    }
}
