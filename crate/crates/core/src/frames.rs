//! Power-invariant Clarke transform between three-phase triples and single
//! complex αβ quantities.
//!
//! A zero-sum triple `(a, b, c)` maps to `x_α + j·x_β` with
//!
//! ```text
//! x = √(2/3)·[a − (b + c)/2 + j·√3·(b − c)/2]
//! ```
//!
//! The zero-sequence component is discarded on the way in and assumed absent
//! on the way back, which matches a three-wire connection.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// A complex αβ-frame electrical quantity (voltage, current or modulation index).
pub type ComplexSample = Complex64;

const SQRT_2_3: f64 = 0.816_496_580_927_726;
const SQRT_3_2: f64 = 1.224_744_871_391_589;
const HALF_SQRT_3: f64 = 0.866_025_403_784_438_6;

/// Instantaneous per-phase values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThreePhase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreePhase {
    pub const ZERO: ThreePhase = ThreePhase {
        a: 0.0,
        b: 0.0,
        c: 0.0,
    };

    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// Same value on every phase.
    pub const fn common(m: f64) -> Self {
        Self { a: m, b: m, c: m }
    }

    pub fn sum(&self) -> f64 {
        self.a + self.b + self.c
    }

    /// Instantaneous `a·a' + b·b' + c·c'`.
    pub fn dot(&self, other: &ThreePhase) -> f64 {
        self.a * other.a + self.b * other.b + self.c * other.c
    }

    /// Largest absolute phase value.
    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.a), f(self.b), f(self.c))
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }
}

impl Add for ThreePhase {
    type Output = ThreePhase;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.a + rhs.a, self.b + rhs.b, self.c + rhs.c)
    }
}

impl Sub for ThreePhase {
    type Output = ThreePhase;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.a - rhs.a, self.b - rhs.b, self.c - rhs.c)
    }
}

impl Neg for ThreePhase {
    type Output = ThreePhase;
    fn neg(self) -> Self {
        Self::new(-self.a, -self.b, -self.c)
    }
}

impl Mul<f64> for ThreePhase {
    type Output = ThreePhase;
    fn mul(self, k: f64) -> Self {
        Self::new(self.a * k, self.b * k, self.c * k)
    }
}

/// Power-invariant Clarke transform of a triple. Zero-sequence is dropped.
pub fn clarke_forward(x: ThreePhase) -> ComplexSample {
    Complex64::new(
        SQRT_2_3 * (x.a - 0.5 * (x.b + x.c)),
        SQRT_2_3 * HALF_SQRT_3 * (x.b - x.c),
    )
}

/// The unique zero-sum triple whose forward transform is `x`.
pub fn clarke_inverse(x: ComplexSample) -> ThreePhase {
    let a = SQRT_2_3 * x.re;
    let b = SQRT_2_3 * (-0.5 * x.re + HALF_SQRT_3 * x.im);
    // c is taken from the constraint so that the triple sums to zero exactly
    // up to a single rounding.
    ThreePhase::new(a, b, -(a + b))
}

/// Balanced positive-sequence sinusoids with the given per-phase peak.
///
/// The forward transform of the result is `√(3/2)·peak·e^{j·angle}`.
pub fn balanced_set(peak: f64, angle: f64) -> ThreePhase {
    use std::f64::consts::PI;
    ThreePhase::new(
        peak * angle.cos(),
        peak * (angle - 2.0 * PI / 3.0).cos(),
        peak * (angle + 2.0 * PI / 3.0).cos(),
    )
}

/// Space-vector magnitude of a balanced set with per-phase peak `peak`.
pub fn space_vector_magnitude(peak: f64) -> f64 {
    SQRT_3_2 * peak
}

/// Per-phase peak of a balanced set whose space vector has magnitude `mag`.
pub fn phase_peak(mag: f64) -> f64 {
    SQRT_2_3 * mag
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_sequence_cancels() {
        let x = clarke_forward(ThreePhase::new(1.0, 1.0, 1.0));
        assert!(x.norm() < 1e-15);
    }

    #[test]
    fn unit_phase_a() {
        let x = clarke_forward(ThreePhase::new(1.0, 0.0, 0.0));
        assert_relative_eq!(x.re, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(x.re, 0.8165, epsilon = 5e-5);
        assert_eq!(x.im, 0.0);
    }

    #[test]
    fn nominal_peak_maps_to_400() {
        let x = clarke_forward(ThreePhase::new(326.6, -163.3, -163.3));
        assert_relative_eq!(x.re, 400.0, epsilon = 0.01);
        assert!(x.im.abs() < 1e-12);

        let t = clarke_inverse(Complex64::new(400.0, 0.0));
        assert_relative_eq!(t.a, 326.6, epsilon = 0.01);
        assert_relative_eq!(t.b, -163.3, epsilon = 0.01);
        assert_relative_eq!(t.c, -163.3, epsilon = 0.01);
    }

    #[test]
    fn inverse_of_zero() {
        assert_eq!(clarke_inverse(Complex64::new(0.0, 0.0)), ThreePhase::ZERO);
    }

    #[test]
    fn balanced_set_examples() {
        let t = balanced_set(1.0, 0.0);
        assert_relative_eq!(t.a, 1.0);
        assert_relative_eq!(t.b, -0.5, epsilon = 1e-15);
        assert_relative_eq!(t.c, -0.5, epsilon = 1e-15);
        assert_eq!(balanced_set(0.0, 1.234), ThreePhase::new(0.0, -0.0, -0.0));

        let wt = 2.0 * std::f64::consts::PI * 50.0 * 3.7e-3;
        let x = clarke_forward(balanced_set(326.6, wt));
        let want = Complex64::from_polar(400.0, wt);
        assert!((x - want).norm() < 0.01);
    }

    fn zero_sum() -> impl Strategy<Value = ThreePhase> {
        (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(a, b)| ThreePhase::new(a, b, -(a + b)))
    }

    proptest! {
        #[test]
        fn power_invariance(v in zero_sum(), i in zero_sum()) {
            let direct = v.dot(&i);
            let via = (clarke_forward(v) * clarke_forward(i).conj()).re;
            let scale = v.as_array().iter().map(|x| x.abs()).sum::<f64>()
                * i.as_array().iter().map(|x| x.abs()).sum::<f64>();
            prop_assert!((direct - via).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn round_trip(t in zero_sum()) {
            let back = clarke_inverse(clarke_forward(t));
            let scale = t.max_abs().max(1.0);
            prop_assert!((back - t).max_abs() <= 1e-12 * scale);
            prop_assert!(back.sum().abs() <= 1e-12 * scale);
        }

        #[test]
        fn linearity(x in zero_sum(), y in zero_sum(), al in -5.0..5.0f64, be in -5.0..5.0f64) {
            let lhs = clarke_forward(x * al + y * be);
            let rhs = clarke_forward(x) * al + clarke_forward(y) * be;
            prop_assert!((lhs - rhs).norm() <= 1e-11 * (1.0 + lhs.norm()));
        }
    }
}
