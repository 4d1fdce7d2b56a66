//! Averaged dynamics of the inverter, its LC output filter and a Thévenin grid.
//!
//! The same circuit is available in two formulations: per-phase
//! ([`three_phase_derivatives`]) and complex αβ ([`complex_derivatives`]).
//! They are algebraically equivalent for zero-sum currents and serve as
//! mutual oracles.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use thiserror::Error;

use crate::frames::{
    clarke_forward, clarke_inverse, space_vector_magnitude, ComplexSample, ThreePhase,
};

/// Default lower bound on the DC-link voltage below which the constant-power
/// input model is considered collapsed.
pub const DEFAULT_DC_FLOOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("plant parameter `{field}` is invalid: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

/// The DC-link voltage dropped below the configured floor.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("DC-link voltage {v_c1:.3} V fell below the {floor:.3} V floor")]
pub struct DcLinkCollapse {
    pub v_c1: f64,
    pub floor: f64,
}

/// Circuit constants, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// DC-link capacitance (F).
    pub c1: f64,
    /// Filter inductance (H).
    pub l: f64,
    /// Filter capacitance (F).
    pub c2: f64,
    /// Grid inductance (H).
    pub lg: f64,
    /// Grid resistance (Ω).
    pub rg: f64,
    /// Grid angular frequency (rad/s).
    pub omega: f64,
    /// Nominal per-phase peak grid voltage (V).
    pub vg_peak_phase: f64,
    /// Converter rated apparent power (VA).
    pub rated_power: f64,
}

impl PlantParams {
    /// 8 kVA converter on a 400 V / 50 Hz very weak grid (SCR 0.5, X/R 1).
    pub fn weak_grid_reference() -> Self {
        Self {
            c1: 2.7e-3,
            l: 5.7e-3,
            c2: 9.9e-6,
            lg: 90e-3,
            rg: 28.28,
            omega: 2.0 * std::f64::consts::PI * 50.0,
            vg_peak_phase: 230.94 * std::f64::consts::SQRT_2,
            rated_power: 8000.0,
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("c1", self.c1),
            ("l", self.l),
            ("c2", self.c2),
            ("lg", self.lg),
            ("omega", self.omega),
            ("rated_power", self.rated_power),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::InvalidParameter {
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        for (field, v) in [("rg", self.rg), ("vg_peak_phase", self.vg_peak_phase)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlantError::InvalidParameter {
                    field,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Nominal grid space-vector magnitude, `√(3/2)·V̂_phase`.
    pub fn grid_magnitude(&self) -> f64 {
        space_vector_magnitude(self.vg_peak_phase)
    }

    /// Grid voltage space vector at time `t` scaled by `fraction` of nominal.
    pub fn grid_voltage(&self, t: f64, fraction: f64) -> ComplexSample {
        Complex64::from_polar(self.grid_magnitude() * fraction, self.omega * t)
    }

    pub fn grid_impedance(&self) -> Complex64 {
        Complex64::new(self.rg, self.omega * self.lg)
    }

    /// Line-to-line RMS grid voltage.
    pub fn line_voltage_rms(&self) -> f64 {
        // √3·V̂/√2 equals the space-vector magnitude √(3/2)·V̂
        self.grid_magnitude()
    }

    /// `V_LL² / (|Z_g|·S_N)`.
    pub fn short_circuit_ratio(&self) -> f64 {
        self.line_voltage_rms().powi(2) / (self.grid_impedance().norm() * self.rated_power)
    }

    pub fn x_over_r(&self) -> f64 {
        self.omega * self.lg / self.rg
    }
}

/// Dynamic state of the complex model. Also used for its time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub v_c1: f64,
    pub i_l: ComplexSample,
    pub v_c2: ComplexSample,
    pub i_g: ComplexSample,
    /// Running integral of the reactive power delivered at the PCC.
    pub q_int: f64,
}

impl Add for PlantState {
    type Output = PlantState;
    fn add(self, r: Self) -> Self {
        Self {
            v_c1: self.v_c1 + r.v_c1,
            i_l: self.i_l + r.i_l,
            v_c2: self.v_c2 + r.v_c2,
            i_g: self.i_g + r.i_g,
            q_int: self.q_int + r.q_int,
        }
    }
}

impl Mul<f64> for PlantState {
    type Output = PlantState;
    fn mul(self, k: f64) -> Self {
        Self {
            v_c1: self.v_c1 * k,
            i_l: self.i_l * k,
            v_c2: self.v_c2 * k,
            i_g: self.i_g * k,
            q_int: self.q_int * k,
        }
    }
}

impl PlantState {
    pub fn is_finite(&self) -> bool {
        self.v_c1.is_finite()
            && self.i_l.is_finite()
            && self.v_c2.is_finite()
            && self.i_g.is_finite()
            && self.q_int.is_finite()
    }

    /// Energy held by C1, L and C2.
    pub fn stored_energy(&self, p: &PlantParams) -> f64 {
        0.5 * (p.c1 * self.v_c1 * self.v_c1
            + p.l * self.i_l.norm_sqr()
            + p.c2 * self.v_c2.norm_sqr())
    }
}

/// Per-phase state of the same circuit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThreePhasePlantState {
    pub v_c1: f64,
    pub i_l: ThreePhase,
    pub v_c2: ThreePhase,
    pub i_g: ThreePhase,
}

impl Add for ThreePhasePlantState {
    type Output = ThreePhasePlantState;
    fn add(self, r: Self) -> Self {
        Self {
            v_c1: self.v_c1 + r.v_c1,
            i_l: self.i_l + r.i_l,
            v_c2: self.v_c2 + r.v_c2,
            i_g: self.i_g + r.i_g,
        }
    }
}

impl Mul<f64> for ThreePhasePlantState {
    type Output = ThreePhasePlantState;
    fn mul(self, k: f64) -> Self {
        Self {
            v_c1: self.v_c1 * k,
            i_l: self.i_l * k,
            v_c2: self.v_c2 * k,
            i_g: self.i_g * k,
        }
    }
}

impl ThreePhasePlantState {
    /// Clarke transform of every electrical quantity; `q_int` is left at zero.
    pub fn to_complex(&self) -> PlantState {
        PlantState {
            v_c1: self.v_c1,
            i_l: clarke_forward(self.i_l),
            v_c2: clarke_forward(self.v_c2),
            i_g: clarke_forward(self.i_g),
            q_int: 0.0,
        }
    }

    /// Zero-sum per-phase state with the given space vectors.
    pub fn from_complex(s: &PlantState) -> Self {
        Self {
            v_c1: s.v_c1,
            i_l: clarke_inverse(s.i_l),
            v_c2: clarke_inverse(s.v_c2),
            i_g: clarke_inverse(s.i_g),
        }
    }
}

fn check_floor(v_c1: f64, floor: f64) -> Result<(), DcLinkCollapse> {
    // also rejects NaN
    if v_c1 > floor {
        Ok(())
    } else {
        Err(DcLinkCollapse { v_c1, floor })
    }
}

/// Time derivative of the complex model for modulation `mu`, input power
/// `p_i` and grid voltage `v_g`.
pub fn complex_derivatives(
    p: &PlantParams,
    s: &PlantState,
    mu: ComplexSample,
    p_i: f64,
    v_g: ComplexSample,
    v_floor: f64,
) -> Result<PlantState, DcLinkCollapse> {
    check_floor(s.v_c1, v_floor)?;
    let pcc = s.v_c2 * s.i_g.conj();
    Ok(PlantState {
        v_c1: (p_i / s.v_c1 - (mu.conj() * s.i_l).re) / p.c1,
        i_l: (mu * s.v_c1 - s.v_c2) / p.l,
        v_c2: (s.i_l - s.i_g) / p.c2,
        i_g: (s.v_c2 - s.i_g * p.rg - v_g) / p.lg,
        q_int: pcc.im,
    })
}

/// Time derivative of the per-phase model, with the neutral-point voltages
/// eliminated through the three-wire constraints.
pub fn three_phase_derivatives(
    p: &PlantParams,
    s: &ThreePhasePlantState,
    mu: ThreePhase,
    p_i: f64,
    v_g: ThreePhase,
    v_floor: f64,
) -> Result<ThreePhasePlantState, DcLinkCollapse> {
    check_floor(s.v_c1, v_floor)?;
    let v_no = (s.v_c2.sum() - v_g.sum()) / 3.0;
    let v_og = (mu.sum() * s.v_c1 - s.v_c2.sum()) / 3.0;

    let di_l = (mu * s.v_c1 - s.v_c2 - ThreePhase::common(v_og)) * (1.0 / p.l);
    let dv_c2 = (s.i_l - s.i_g) * (1.0 / p.c2);
    let di_g = (s.v_c2 - s.i_g * p.rg - v_g - ThreePhase::common(v_no)) * (1.0 / p.lg);
    Ok(ThreePhasePlantState {
        v_c1: (p_i / s.v_c1 - mu.dot(&s.i_l)) / p.c1,
        i_l: di_l,
        v_c2: dv_c2,
        i_g: di_g,
    })
}

/// Sinusoidal steady-state grid current phasor, `(v_C2 − v_g)/(R_g + jωL_g)`.
pub fn steady_grid_current(
    v_c2: ComplexSample,
    v_g: ComplexSample,
    p: &PlantParams,
) -> ComplexSample {
    (v_c2 - v_g) / p.grid_impedance()
}

/// Active and reactive power delivered at the PCC.
pub fn pcc_powers(v_c2: ComplexSample, i_g: ComplexSample) -> (f64, f64) {
    let s = v_c2 * i_g.conj();
    (s.re, s.im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::balanced_set;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn only_grid_term_survives() {
        let p = PlantParams::weak_grid_reference();
        let s = PlantState {
            v_c1: 735.0,
            ..Default::default()
        };
        let d =
            complex_derivatives(&p, &s, c(0.0, 0.0), 0.0, c(400.0, 0.0), DEFAULT_DC_FLOOR).unwrap();
        assert_eq!(d.v_c1, 0.0);
        assert_eq!(d.i_l, c(0.0, 0.0));
        assert_eq!(d.v_c2, c(0.0, 0.0));
        assert_relative_eq!(d.i_g.re, -400.0 / p.lg);
        assert_eq!(d.i_g.im, 0.0);
        assert_eq!(d.q_int, 0.0);
    }

    #[test]
    fn input_power_charges_dc_link() {
        let p = PlantParams::weak_grid_reference();
        let s = PlantState {
            v_c1: 735.0,
            ..Default::default()
        };
        let d =
            complex_derivatives(&p, &s, c(0.0, 0.0), 735.0, c(0.0, 0.0), DEFAULT_DC_FLOOR).unwrap();
        assert_relative_eq!(d.v_c1, 370.37, epsilon = 0.01);
    }

    #[test]
    fn balanced_filter_currents_hold_capacitor() {
        let p = PlantParams::weak_grid_reference();
        let s = PlantState {
            v_c1: 700.0,
            i_l: c(3.0, -4.0),
            i_g: c(3.0, -4.0),
            v_c2: c(10.0, 1.0),
            q_int: 0.0,
        };
        let d = complex_derivatives(&p, &s, c(0.2, 0.1), 100.0, c(400.0, 0.0), DEFAULT_DC_FLOOR)
            .unwrap();
        assert_eq!(d.v_c2, c(0.0, 0.0));
    }

    #[test]
    fn floor_violation_is_reported() {
        let p = PlantParams::weak_grid_reference();
        let s = PlantState {
            v_c1: 5.0,
            ..Default::default()
        };
        let err = complex_derivatives(&p, &s, c(0.0, 0.0), 0.0, c(0.0, 0.0), DEFAULT_DC_FLOOR)
            .unwrap_err();
        assert_eq!(
            err,
            DcLinkCollapse {
                v_c1: 5.0,
                floor: 10.0
            }
        );
        let s3 = ThreePhasePlantState {
            v_c1: f64::NAN,
            ..Default::default()
        };
        assert!(
            three_phase_derivatives(&p, &s3, ThreePhase::ZERO, 0.0, ThreePhase::ZERO, 10.0)
                .is_err()
        );
    }

    #[test]
    fn common_mode_modulation_is_invisible() {
        let p = PlantParams::weak_grid_reference();
        let s = ThreePhasePlantState {
            v_c1: 740.0,
            i_l: ThreePhase::new(3.0, -1.0, -2.0),
            v_c2: ThreePhase::new(100.0, -20.0, -80.0),
            i_g: ThreePhase::new(-2.0, 5.0, -3.0),
        };
        let vg = balanced_set(326.6, 0.3);
        let base = three_phase_derivatives(&p, &s, ThreePhase::ZERO, 500.0, vg, 10.0).unwrap();
        let cm =
            three_phase_derivatives(&p, &s, ThreePhase::common(0.37), 500.0, vg, 10.0).unwrap();
        assert!((base.i_l - cm.i_l).max_abs() < 1e-9 * base.i_l.max_abs().max(1.0));
        assert_relative_eq!(base.v_c1, cm.v_c1, epsilon = 1e-9);
    }

    #[test]
    fn zero_state_grid_drives_current() {
        let p = PlantParams::weak_grid_reference();
        let s = ThreePhasePlantState {
            v_c1: 735.0,
            ..Default::default()
        };
        let vg = balanced_set(326.6, 0.9);
        let d = three_phase_derivatives(&p, &s, ThreePhase::ZERO, 0.0, vg, 10.0).unwrap();
        let want = vg * (-1.0 / p.lg);
        assert!((d.i_g - want).max_abs() < 1e-9);
        assert!(d.i_g.sum().abs() < 1e-9);
    }

    #[test]
    fn steady_current_examples() {
        let p = PlantParams::weak_grid_reference();
        let ig = steady_grid_current(c(0.0, 0.0), c(400.0, 0.0), &p);
        assert_relative_eq!(ig.re, -7.073, epsilon = 1e-3);
        assert_relative_eq!(ig.im, 7.072, epsilon = 1e-3);
        assert_relative_eq!(ig.norm(), 10.0, epsilon = 3e-3);

        assert_eq!(
            steady_grid_current(c(400.0, 0.0), c(400.0, 0.0), &p),
            c(0.0, 0.0)
        );

        let ig = steady_grid_current(c(420.0, 0.0), c(400.0, 0.0), &p);
        assert_relative_eq!(ig.re, 0.3537, epsilon = 1e-4);
        assert_relative_eq!(ig.im, -0.3536, epsilon = 1e-4);
    }

    #[test]
    fn pcc_power_examples() {
        assert_eq!(pcc_powers(c(400.0, 0.0), c(20.0, 0.0)), (8000.0, 0.0));
        let (pp, qq) = pcc_powers(c(400.0, 0.0), c(14.142, -14.142));
        assert_relative_eq!(pp, 5656.8, epsilon = 0.1);
        assert_relative_eq!(qq, 5656.8, epsilon = 0.1);
        assert_eq!(pcc_powers(c(0.0, 0.0), c(7.0, 3.0)), (0.0, 0.0));
    }

    #[test]
    fn weak_grid_ratios() {
        let p = PlantParams::weak_grid_reference();
        assert_relative_eq!(p.grid_impedance().norm(), 39.99, epsilon = 0.01);
        assert_relative_eq!(p.short_circuit_ratio(), 0.5, epsilon = 1e-3);
        assert_relative_eq!(p.x_over_r(), 1.0, epsilon = 1e-3);
        assert_relative_eq!(p.grid_magnitude(), 400.0, epsilon = 0.01);
    }

    #[test]
    fn invalid_parameters_named() {
        let mut p = PlantParams::weak_grid_reference();
        p.c2 = 0.0;
        match p.validate() {
            Err(PlantError::InvalidParameter { field, .. }) => assert_eq!(field, "c2"),
            other => panic!("unexpected {other:?}"),
        }
        p = PlantParams::weak_grid_reference();
        p.rg = 0.0;
        assert!(p.validate().is_ok());
    }

    fn zero_sum(scale: f64) -> impl Strategy<Value = ThreePhase> {
        (-scale..scale, -scale..scale).prop_map(|(a, b)| ThreePhase::new(a, b, -(a + b)))
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
    }

    proptest! {
        // Clarke transform of the per-phase derivative equals the complex
        // derivative of the transformed state.
        #[test]
        fn model_equivalence(
            v_c1 in 50.0..1000.0f64,
            i_l in zero_sum(30.0), v_c2 in zero_sum(500.0), i_g in zero_sum(30.0),
            mu in zero_sum(1.0), cm in -0.5..0.5f64,
            vg_peak in 0.0..400.0f64, ang in 0.0..6.3f64, p_i in 0.0..8000.0f64,
        ) {
            let p = PlantParams::weak_grid_reference();
            let s3 = ThreePhasePlantState { v_c1, i_l, v_c2, i_g };
            let vg3 = balanced_set(vg_peak, ang);
            let d3 = three_phase_derivatives(&p, &s3, mu + ThreePhase::common(cm), p_i, vg3, 10.0).unwrap();
            prop_assert!(d3.i_l.sum().abs() <= 1e-9 * d3.i_l.max_abs().max(1.0));
            prop_assert!(d3.i_g.sum().abs() <= 1e-9 * d3.i_g.max_abs().max(1.0));

            let sc = s3.to_complex();
            let dc = complex_derivatives(&p, &sc, clarke_forward(mu), p_i, clarke_forward(vg3), 10.0).unwrap();
            let t = d3.to_complex();
            prop_assert!((t.v_c1 - dc.v_c1).abs() <= 1e-10 * dc.v_c1.abs().max(1.0));
            prop_assert!(rel(t.i_l, dc.i_l) <= 1e-10);
            prop_assert!(rel(t.v_c2, dc.v_c2) <= 1e-10);
            prop_assert!(rel(t.i_g, dc.i_g) <= 1e-10);
        }
    }
}
