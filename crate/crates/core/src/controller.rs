//! Complex-valued flatness-based control law.
//!
//! The flat output is the complex energy
//!
//! ```text
//! ξ1 = ½(C1·v_C1² + L·|i_L|² + C2·|v_C2|²) − j·∫q dτ
//! ```
//!
//! whose derivatives `ξ2 = p_i − v_C2·i_g*` and `ξ3 = ṗ_i − v_C2·(i̇_g)* + (i_g − i_L)/C2·i_g*`
//! form a chain of integrators with `ξ̇3 = w`. A state feedback with integral
//! action computes `w` from the tracking errors and [`modulation_index`]
//! solves the linearizing relation for the modulation index `μ`.
//!
//! Grid-current derivatives are taken from their sinusoidal steady-state
//! values, `i̇_g = jω·i_g` and `ï_g = −ω²·i_g`.

use num_complex::Complex64;
use thiserror::Error;

use crate::frames::ComplexSample;
use crate::plant::{PlantParams, PlantState};
use crate::trajectory::ReferenceFrame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("gain {name} must be finite and > 0, got {value}")]
    NonPositiveGain { name: &'static str, value: f64 },
    #[error("guard threshold {name} must be finite and >= 0, got {value}")]
    InvalidGuard { name: &'static str, value: f64 },
}

/// Real feedback gains of `w = ξ̇3ʳ − k3·e3 − k2·e2 − k1·e1 − k0·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k0: f64,
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), ControllerError> {
        for (name, value) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k0", self.k0),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ControllerError::NonPositiveGain { name, value });
            }
        }
        Ok(())
    }

    /// Every gain multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k1: self.k1 * factor,
            k2: self.k2 * factor,
            k3: self.k3 * factor,
            k0: self.k0 * factor,
        }
    }

    /// Coefficients `[1, k3, k2, k1, k0]` of the closed-loop error polynomial.
    pub fn characteristic_polynomial(&self) -> [f64; 5] {
        [1.0, self.k3, self.k2, self.k1, self.k0]
    }
}

/// Thresholds below which the modulation-index division is not attempted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardThresholds {
    /// Minimum grid-current magnitude (A).
    pub i_guard: f64,
    /// Minimum DC-link voltage (V).
    pub v_guard: f64,
}

impl Default for GuardThresholds {
    fn default() -> Self {
        Self {
            i_guard: 0.1,
            v_guard: 10.0,
        }
    }
}

impl GuardThresholds {
    pub fn validate(&self) -> Result<(), ControllerError> {
        for (name, value) in [("i_guard", self.i_guard), ("v_guard", self.v_guard)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ControllerError::InvalidGuard { name, value });
            }
        }
        Ok(())
    }
}

/// Why the modulation index could not be computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuardTrip {
    GridCurrent { magnitude: f64 },
    DcLink { v_c1: f64 },
}

/// Integral-action state and the held output.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    /// `∫ e1 dτ`
    pub y: Complex64,
    pub last_mu: ComplexSample,
    pub guard_count: u64,
}

/// Flat coordinates and their tracking errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatCoordinates {
    pub xi1: Complex64,
    pub xi2: Complex64,
    pub xi3: Complex64,
    pub e1: Complex64,
    pub e2: Complex64,
    pub e3: Complex64,
}

/// Flat-output references derived from `v_C1ʳ` and `qʳ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatReference {
    pub xi1: Complex64,
    pub xi2: Complex64,
    pub xi3: Complex64,
    pub xi3_dot: Complex64,
}

pub fn flat_output(
    p: &PlantParams,
    v_c1: f64,
    i_l: ComplexSample,
    v_c2: ComplexSample,
    q_int: f64,
) -> Complex64 {
    let energy = 0.5 * (p.c1 * v_c1 * v_c1 + p.l * i_l.norm_sqr() + p.c2 * v_c2.norm_sqr());
    Complex64::new(energy, -q_int)
}

/// `ξ2 = p_i − v_C2·i_g* = p_i − p − jq`.
pub fn xi2(p_i: f64, v_c2: ComplexSample, i_g: ComplexSample) -> Complex64 {
    p_i - v_c2 * i_g.conj()
}

pub fn xi3(
    p_i_d1: f64,
    v_c2: ComplexSample,
    i_g: ComplexSample,
    i_g_d1: ComplexSample,
    i_l: ComplexSample,
    c2: f64,
) -> Complex64 {
    p_i_d1 - v_c2 * i_g_d1.conj() + (i_g - i_l) / c2 * i_g.conj()
}

/// Steady-state first and second derivatives of a positive-sequence current.
pub fn grid_current_derivatives(i_g: ComplexSample, omega: f64) -> (ComplexSample, ComplexSample) {
    (Complex64::i() * omega * i_g, -omega * omega * i_g)
}

pub fn reference_targets(r: &ReferenceFrame, c1: f64) -> FlatReference {
    let (v, v1, v2, v3) = (r.v_ref, r.v_ref_d1, r.v_ref_d2, r.v_ref_d3);
    FlatReference {
        xi1: Complex64::new(0.5 * c1 * v * v, -r.q_ref_int),
        xi2: Complex64::new(c1 * v * v1, -r.q_ref),
        xi3: Complex64::new(c1 * (v1 * v1 + v * v2), -r.q_ref_d1),
        xi3_dot: Complex64::new(c1 * (3.0 * v1 * v2 + v * v3), -r.q_ref_d2),
    }
}

pub fn auxiliary_input(
    e1: Complex64,
    e2: Complex64,
    e3: Complex64,
    y: Complex64,
    g: &ControllerGains,
    xi3_r_dot: Complex64,
) -> Complex64 {
    xi3_r_dot - e3 * g.k3 - e2 * g.k2 - e1 * g.k1 - y * g.k0
}

/// Everything the linearizing law needs besides the auxiliary input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizingInputs {
    pub p_i_d2: f64,
    pub v_c1: f64,
    pub i_l: ComplexSample,
    pub v_c2: ComplexSample,
    pub i_g: ComplexSample,
    pub i_g_d1: ComplexSample,
    pub i_g_d2: ComplexSample,
}

/// `ξ̇3` produced by modulation index `mu`: the forward map that
/// [`modulation_index`] inverts.
pub fn auxiliary_from_modulation(
    mu: ComplexSample,
    x: &LinearizingInputs,
    l: f64,
    c2: f64,
) -> Complex64 {
    let ig_c = x.i_g.conj();
    x.p_i_d2 + 2.0 * (x.i_g - x.i_l) / c2 * x.i_g_d1.conj() + x.i_g_d1 * ig_c / c2
        - x.v_c2 * x.i_g_d2.conj()
        - (mu * x.v_c1 - x.v_c2) / (l * c2) * ig_c
}

/// Solve the linearizing relation for `μ`. When the grid current or DC-link
/// voltage is below its guard threshold `last_mu` is returned together with
/// the trip reason.
pub fn modulation_index(
    w: Complex64,
    x: &LinearizingInputs,
    l: f64,
    c2: f64,
    guard: &GuardThresholds,
    last_mu: ComplexSample,
) -> (ComplexSample, Option<GuardTrip>) {
    let ig_mag = x.i_g.norm();
    if !(ig_mag >= guard.i_guard) {
        return (last_mu, Some(GuardTrip::GridCurrent { magnitude: ig_mag }));
    }
    if !(x.v_c1 >= guard.v_guard) {
        return (last_mu, Some(GuardTrip::DcLink { v_c1: x.v_c1 }));
    }
    let ig_c = x.i_g.conj();
    let num = l * c2 * (x.p_i_d2 - x.v_c2 * x.i_g_d2.conj() - w)
        + 2.0 * l * (x.i_g - x.i_l) * x.i_g_d1.conj()
        + (x.v_c2 + l * x.i_g_d1) * ig_c;
    (num / (x.v_c1 * ig_c), None)
}

/// Result of one controller evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub mu: ComplexSample,
    pub w: Complex64,
    pub flat: FlatCoordinates,
    pub reference: FlatReference,
    pub guard: Option<GuardTrip>,
}

/// The flatness-based controller bound to a set of plant parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessController {
    pub params: PlantParams,
    pub gains: ControllerGains,
    pub guard: GuardThresholds,
    pub state: ControllerState,
}

impl FlatnessController {
    pub fn new(params: PlantParams, gains: ControllerGains, guard: GuardThresholds) -> Self {
        Self {
            params,
            gains,
            guard,
            state: ControllerState::default(),
        }
    }

    /// Evaluate the law for plant state `s`, integral state `y` and references
    /// `r` without touching the controller state.
    pub fn evaluate(&self, s: &PlantState, y: Complex64, r: &ReferenceFrame) -> ControlOutput {
        let p = &self.params;
        let (i_g_d1, i_g_d2) = grid_current_derivatives(s.i_g, p.omega);

        let xi1 = flat_output(p, s.v_c1, s.i_l, s.v_c2, s.q_int);
        let xi2 = xi2(r.p_i, s.v_c2, s.i_g);
        let xi3 = xi3(r.p_i_d1, s.v_c2, s.i_g, i_g_d1, s.i_l, p.c2);
        let reference = reference_targets(r, p.c1);
        let flat = FlatCoordinates {
            xi1,
            xi2,
            xi3,
            e1: xi1 - reference.xi1,
            e2: xi2 - reference.xi2,
            e3: xi3 - reference.xi3,
        };

        let w = auxiliary_input(flat.e1, flat.e2, flat.e3, y, &self.gains, reference.xi3_dot);
        let inputs = LinearizingInputs {
            p_i_d2: r.p_i_d2,
            v_c1: s.v_c1,
            i_l: s.i_l,
            v_c2: s.v_c2,
            i_g: s.i_g,
            i_g_d1,
            i_g_d2,
        };
        let (mu, guard) = modulation_index(w, &inputs, p.l, p.c2, &self.guard, self.state.last_mu);
        ControlOutput {
            mu,
            w,
            flat,
            reference,
            guard,
        }
    }

    /// Evaluate with the stored integral state, then hold the new output and
    /// count any guard trip. The integral state itself is advanced by the
    /// simulation engine.
    pub fn control_step(&mut self, s: &PlantState, r: &ReferenceFrame) -> ControlOutput {
        let out = self.evaluate(s, self.state.y, r);
        self.state.last_mu = out.mu;
        if out.guard.is_some() {
            self.state.guard_count += 1;
        }
        out
    }
}
