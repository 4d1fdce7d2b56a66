//! Fixed-step classic Runge–Kutta integration over small value-type states.

use std::ops::{Add, Mul};

/// A state that can be combined linearly by the integrator.
pub trait OdeState: Copy + Add<Output = Self> + Mul<f64, Output = Self> {}

impl<T> OdeState for T where T: Copy + Add<Output = T> + Mul<f64, Output = T> {}

/// One classic four-stage RK4 step of `ẋ = f(t, x)`.
///
/// An error from any stage evaluation aborts the step and is returned as-is.
pub fn rk4_step<S, E, F>(x: S, t: f64, dt: f64, mut f: F) -> Result<S, E>
where
    S: OdeState,
    F: FnMut(f64, S) -> Result<S, E>,
{
    let half = 0.5 * dt;
    let k1 = f(t, x)?;
    let k2 = f(t + half, x + k1 * half)?;
    let k3 = f(t + half, x + k2 * half)?;
    let k4 = f(t + dt, x + k3 * dt)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Infallible convenience wrapper around [`rk4_step`].
pub fn rk4_step_pure<S, F>(x: S, t: f64, dt: f64, mut f: F) -> S
where
    S: OdeState,
    F: FnMut(f64, S) -> S,
{
    match rk4_step::<S, std::convert::Infallible, _>(x, t, dt, |t, x| Ok(f(t, x))) {
        Ok(x) => x,
        Err(never) => match never {},
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn decay_matches_rk4_polynomial() {
        let h: f64 = 0.1;
        let x = rk4_step_pure(1.0f64, 0.0, h, |_, x| -x);
        let poly = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert_relative_eq!(x, poly, epsilon = 1e-15);
        assert_relative_eq!(x, 0.9048375, epsilon = 1e-7);
    }

    #[test]
    fn zero_field_leaves_state() {
        let x0 = Complex64::new(3.0, -2.0);
        assert_eq!(
            rk4_step_pure(x0, 1.0, 0.5, |_, _| Complex64::new(0.0, 0.0)),
            x0
        );
    }

    #[test]
    fn oscillator_local_error_is_fifth_order() {
        let w = 2.0 * std::f64::consts::PI * 50.0;
        let one = Complex64::new(1.0, 0.0);
        let local = |dt: f64| {
            let x = rk4_step_pure(one, 0.0, dt, |_, x| Complex64::i() * w * x);
            let exact = Complex64::from_polar(1.0, w * dt);
            ((x - exact).norm(), (x.norm() - 1.0).abs())
        };
        let (e1, m1) = local(4e-4);
        let (e2, m2) = local(2e-4);
        let order = (e1 / e2).log2();
        assert!((order - 5.0).abs() < 0.1, "observed order {order}");
        // magnitude drift is bounded by the local error
        assert!(m1 <= e1 && m2 <= e2);
    }

    #[test]
    fn stage_error_propagates() {
        let mut calls = 0;
        let r: Result<f64, &str> = rk4_step(1.0, 0.0, 0.1, |_, x| {
            calls += 1;
            if calls == 3 {
                Err("boom")
            } else {
                Ok(-x)
            }
        });
        assert_eq!(r, Err("boom"));
    }
}
