//! Eigenvalue assignment for the tracking-error dynamics.
//!
//! With the integral state appended, the error system is
//!
//! ```text
//! ė1 = e2,  ė2 = e3,  ė3 = −k1·e1 − k2·e2 − k3·e3 − k0·y,  ẏ = e1
//! ```
//!
//! whose characteristic polynomial is `s⁴ + k3·s³ + k2·s² + k1·s + k0`.
//! Gains follow from expanding `∏(s − pᵢ)` over the target poles; the
//! assignment is checked independently by evaluating `det(sI − A)` at each
//! pole with a small complex LU factorisation.

use num_complex::Complex64;
use thiserror::Error;

use crate::controller::ControllerGains;

/// Default `σ·t_s` product: the envelope `e^{−σt}` reaches 1% at `t_s`.
pub const DEFAULT_BAND_FACTOR: f64 = 4.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuningError {
    #[error("settling time must be finite and > 0, got {0}")]
    InvalidSettlingTime(f64),
    #[error("damping ratio must lie in (0, 1), got {0}")]
    InvalidDamping(f64),
    #[error("band factor must be finite and > 0, got {0}")]
    InvalidBandFactor(f64),
    #[error("pole set is not closed under conjugation: {0} has no conjugate partner")]
    NotConjugateClosed(Complex64),
    #[error("pole {0} is not in the open left half-plane")]
    Unstable(Complex64),
}

/// Settling time and damping of one complex-conjugate pole pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleSpec {
    /// Settling time (s).
    pub ts: f64,
    /// Damping ratio.
    pub zeta: f64,
}

impl PoleSpec {
    pub fn new(ts: f64, zeta: f64) -> Result<Self, TuningError> {
        let s = Self { ts, zeta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), TuningError> {
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(TuningError::InvalidSettlingTime(self.ts));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(TuningError::InvalidDamping(self.zeta));
        }
        Ok(())
    }
}

/// `−σ ± jσ·√(1 − ζ²)/ζ` with `σ = band_factor / t_s`.
pub fn poles_from_spec_with(
    spec: &PoleSpec,
    band_factor: f64,
) -> Result<[Complex64; 2], TuningError> {
    spec.validate()?;
    if !(band_factor.is_finite() && band_factor > 0.0) {
        return Err(TuningError::InvalidBandFactor(band_factor));
    }
    let sigma = band_factor / spec.ts;
    let wd = sigma * (1.0 - spec.zeta * spec.zeta).sqrt() / spec.zeta;
    Ok([Complex64::new(-sigma, wd), Complex64::new(-sigma, -wd)])
}

/// Pole pair for `spec` under the 1% settling convention.
pub fn poles_from_spec(spec: &PoleSpec) -> Result<[Complex64; 2], TuningError> {
    poles_from_spec_with(spec, DEFAULT_BAND_FACTOR)
}

fn check_conjugate_closed(poles: &[Complex64]) -> Result<(), TuningError> {
    let scale = poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let p = poles[i];
        if p.im.abs() <= tol {
            continue;
        }
        let partner = (0..poles.len()).find(|&j| !used[j] && (poles[j] - p.conj()).norm() <= tol);
        match partner {
            Some(j) => used[j] = true,
            None => return Err(TuningError::NotConjugateClosed(p)),
        }
    }
    Ok(())
}

/// Four closed-loop poles, closed under conjugation and strictly stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleSet {
    poles: [Complex64; 4],
}

impl PoleSet {
    pub fn new(poles: [Complex64; 4]) -> Result<Self, TuningError> {
        check_conjugate_closed(&poles)?;
        if let Some(p) = poles.iter().find(|p| !(p.re < 0.0)) {
            return Err(TuningError::Unstable(*p));
        }
        Ok(Self { poles })
    }

    /// Two conjugate pairs from two specs.
    pub fn from_specs(a: &PoleSpec, b: &PoleSpec, band_factor: f64) -> Result<Self, TuningError> {
        let [p1, p2] = poles_from_spec_with(a, band_factor)?;
        let [p3, p4] = poles_from_spec_with(b, band_factor)?;
        Self::new([p1, p2, p3, p4])
    }

    pub fn poles(&self) -> &[Complex64; 4] {
        &self.poles
    }
}

/// Expand `∏(s − pᵢ)` into monic coefficients, highest degree first.
fn expand(poles: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &p in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * p;
        }
        coeffs = next;
    }
    coeffs
}

/// Real gains placing the error-system eigenvalues at `poles`.
pub fn gains_from_poles(poles: &[Complex64; 4]) -> Result<ControllerGains, TuningError> {
    check_conjugate_closed(poles)?;
    let c = expand(poles);
    Ok(ControllerGains {
        k3: c[1].re,
        k2: c[2].re,
        k1: c[3].re,
        k0: c[4].re,
    })
}

/// Error-system matrix with state order `(e1, e2, e3, y)`.
pub fn error_system_matrix(g: &ControllerGains) -> [[f64; 4]; 4] {
    [
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [-g.k1, -g.k2, -g.k3, -g.k0],
        [1.0, 0.0, 0.0, 0.0],
    ]
}

/// Determinant of a 4×4 complex matrix by LU with partial pivoting.
fn det4(mut m: [[Complex64; 4]; 4]) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .expect("non-empty range");
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let d = m[col][col];
        det *= d;
        for row in col + 1..4 {
            let f = m[row][col] / d;
            let pivot = m[col];
            for (x, v) in m[row].iter_mut().zip(pivot).skip(col) {
                *x -= f * v;
            }
        }
    }
    det
}

/// `det(sI − A)` for the error system of `g`.
pub fn characteristic_determinant(g: &ControllerGains, s: Complex64) -> Complex64 {
    let a = error_system_matrix(g);
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[i][j] = -v + if i == j { s } else { Complex64::new(0.0, 0.0) };
        }
    }
    det4(m)
}

/// Relative residuals `|det(pI − A)| / Σ|cᵢ|·|p|^(4−i)` at each target pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentReport {
    pub poles: [Complex64; 4],
    pub residuals: [f64; 4],
}

impl AssignmentReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() < tol
    }
}

pub fn verify_assignment(g: &ControllerGains, poles: &[Complex64; 4]) -> AssignmentReport {
    // Normalised by the sum of term magnitudes, i.e. the relative backward error.
    let coeffs = g.characteristic_polynomial();
    let residuals = poles.map(|p| {
        let scale: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * p.norm().powi(4 - i as i32))
            .sum();
        characteristic_determinant(g, p).norm() / scale.max(f64::MIN_POSITIVE)
    });
    AssignmentReport {
        poles: *poles,
        residuals,
    }
}

/// Gains for two pole-pair specifications together with their check.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub poles: PoleSet,
    pub gains: ControllerGains,
    pub report: AssignmentReport,
}

pub fn tune(fast: &PoleSpec, slow: &PoleSpec, band_factor: f64) -> Result<Tuned, TuningError> {
    let poles = PoleSet::from_specs(fast, slow, band_factor)?;
    let gains = gains_from_poles(poles.poles())?;
    let report = verify_assignment(&gains, poles.poles());
    Ok(Tuned {
        poles,
        gains,
        report,
    })
}

/// Roots of `s⁴ + k3·s³ + k2·s² + k1·s + k0` (Durand–Kerner iteration).
pub fn closed_loop_poles(g: &ControllerGains) -> [Complex64; 4] {
    let coeffs = g.characteristic_polynomial();
    let eval = |s: Complex64| {
        coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    };
    // Cauchy bound on root magnitude sets the initial circle.
    let radius = 1.0 + coeffs[1..].iter().map(|c| c.abs()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: [Complex64; 4] =
        std::array::from_fn(|k| seed.powu(k as u32) * radius.powf(0.25));
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..4 {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
            delta = delta.max(step.norm() / roots[i].norm().max(1e-300));
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pole_spec_examples() {
        let [p, q] = poles_from_spec(&PoleSpec::new(1e-3, 0.707).unwrap()).unwrap();
        assert_relative_eq!(p.re, -4600.0, max_relative = 1e-12);
        assert_relative_eq!(p.im, 4601.4, epsilon = 0.1);
        assert_eq!(q, p.conj());

        let [p, _] = poles_from_spec(&PoleSpec::new(10e-3, 0.707).unwrap()).unwrap();
        assert_relative_eq!(p.re, -460.0, max_relative = 1e-12);
        assert_relative_eq!(p.im, 460.14, epsilon = 0.01);

        let [p, _] = poles_from_spec(&PoleSpec::new(4.6, 0.707).unwrap()).unwrap();
        assert_relative_eq!(p.re, -1.0, max_relative = 1e-12);
        assert_relative_eq!(p.im, 1.0003, epsilon = 1e-4);
    }

    #[test]
    fn invalid_specs() {
        assert_eq!(
            PoleSpec::new(1e-3, 1.0),
            Err(TuningError::InvalidDamping(1.0))
        );
        assert_eq!(
            PoleSpec::new(1e-3, 0.0),
            Err(TuningError::InvalidDamping(0.0))
        );
        assert_eq!(
            PoleSpec::new(0.0, 0.5),
            Err(TuningError::InvalidSettlingTime(0.0))
        );
    }

    #[test]
    fn binomial_expansion() {
        let m1 = Complex64::new(-1.0, 0.0);
        let g = gains_from_poles(&[m1; 4]).unwrap();
        assert_eq!((g.k3, g.k2, g.k1, g.k0), (4.0, 6.0, 4.0, 1.0));
    }

    #[test]
    fn reference_gains_reproduced() {
        let set = PoleSet::from_specs(
            &PoleSpec::new(1e-3, 0.707).unwrap(),
            &PoleSpec::new(10e-3, 0.707).unwrap(),
            DEFAULT_BAND_FACTOR,
        )
        .unwrap();
        let g = gains_from_poles(set.poles()).unwrap();
        assert_relative_eq!(g.k1, 4.28e10, max_relative = 5e-3);
        assert_relative_eq!(g.k2, 5.12e7, max_relative = 5e-3);
        assert_relative_eq!(g.k3, 1.01e4, max_relative = 5e-3);
        assert_relative_eq!(g.k0, 1.79e13, max_relative = 5e-3);
        assert!(verify_assignment(&g, set.poles()).passes(1e-9));
    }

    #[test]
    fn two_percent_convention_misses_reference_gains() {
        let set = PoleSet::from_specs(
            &PoleSpec::new(1e-3, 0.707).unwrap(),
            &PoleSpec::new(10e-3, 0.707).unwrap(),
            4.0,
        )
        .unwrap();
        let g = gains_from_poles(set.poles()).unwrap();
        assert!((g.k3 / 1.01e4 - 1.0).abs() > 0.05);
    }

    #[test]
    fn non_conjugate_set_rejected() {
        let p = [
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, 2.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(-4.0, 0.0),
        ];
        assert!(matches!(
            gains_from_poles(&p),
            Err(TuningError::NotConjugateClosed(_))
        ));
        assert!(PoleSet::new(p).is_err());
        let unstable = [
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(-4.0, 0.0),
        ];
        assert!(matches!(
            PoleSet::new(unstable),
            Err(TuningError::Unstable(_))
        ));
    }

    #[test]
    fn perturbed_gain_leaves_residuals() {
        let set = PoleSet::from_specs(
            &PoleSpec::new(1e-3, 0.707).unwrap(),
            &PoleSpec::new(10e-3, 0.707).unwrap(),
            DEFAULT_BAND_FACTOR,
        )
        .unwrap();
        let mut g = gains_from_poles(set.poles()).unwrap();
        g.k0 *= 1.1;
        let rep = verify_assignment(&g, set.poles());
        assert!(
            rep.residuals.iter().all(|&r| r > 1e-6),
            "{:?}",
            rep.residuals
        );
    }

    #[test]
    fn zero_gains_give_pure_quartic() {
        let g = ControllerGains {
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            k0: 0.0,
        };
        let poles = [
            Complex64::new(-3.0, 4.0),
            Complex64::new(-3.0, -4.0),
            Complex64::new(-10.0, 0.0),
            Complex64::new(-0.5, 0.0),
        ];
        let rep = verify_assignment(&g, &poles);
        for (r, p) in rep.residuals.iter().zip(&poles) {
            // only the s⁴ term survives, so the relative residual is exactly 1
            assert_relative_eq!(*r, 1.0, max_relative = 1e-12, epsilon = 0.0);
            assert!(p.norm() > 0.0);
        }
    }

    #[test]
    fn closed_loop_poles_recovered() {
        let set = PoleSet::from_specs(
            &PoleSpec::new(1e-3, 0.707).unwrap(),
            &PoleSpec::new(10e-3, 0.707).unwrap(),
            DEFAULT_BAND_FACTOR,
        )
        .unwrap();
        let g = gains_from_poles(set.poles()).unwrap();
        let mut roots = closed_loop_poles(&g);
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut want = *set.poles();
        want.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (r, w) in roots.iter().zip(&want) {
            assert!((r - w).norm() < 1e-6 * w.norm(), "{r} vs {w}");
        }
    }

    fn stable_pair() -> impl Strategy<Value = (f64, f64)> {
        (1e-4..5.0f64, 0.05..0.99f64)
    }

    proptest! {
        // det(sI − A) equals the monic quartic built from the gains.
        #[test]
        fn determinant_matches_polynomial(k in proptest::array::uniform4(0.1..1e3f64), re in -50.0..50.0f64, im in -50.0..50.0f64) {
            let g = ControllerGains { k1: k[0], k2: k[1], k3: k[2], k0: k[3] };
            let s = Complex64::new(re, im);
            let poly = g.characteristic_polynomial().iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c);
            let det = characteristic_determinant(&g, s);
            let scale = s.norm().powi(4) + k.iter().sum::<f64>() * (1.0 + s.norm()).powi(3);
            prop_assert!((det - poly).norm() <= 1e-12 * scale);
        }

        #[test]
        fn spec_to_gains_round_trip((ts1, z1) in stable_pair(), (ts2, z2) in stable_pair()) {
            let set = PoleSet::from_specs(&PoleSpec::new(ts1, z1).unwrap(), &PoleSpec::new(ts2, z2).unwrap(), DEFAULT_BAND_FACTOR).unwrap();
            let g = gains_from_poles(set.poles()).unwrap();
            prop_assert!(g.validate().is_ok());
            let rep = verify_assignment(&g, set.poles());
            prop_assert!(rep.passes(1e-9), "{:?}", rep.residuals);
        }

        #[test]
        fn gains_invariant_under_permutation((ts1, z1) in stable_pair(), (ts2, z2) in stable_pair(), perm in Just([2usize, 0, 3, 1])) {
            let set = PoleSet::from_specs(&PoleSpec::new(ts1, z1).unwrap(), &PoleSpec::new(ts2, z2).unwrap(), DEFAULT_BAND_FACTOR).unwrap();
            let p = set.poles();
            let shuffled = [p[perm[0]], p[perm[1]], p[perm[2]], p[perm[3]]];
            let a = gains_from_poles(p).unwrap();
            let b = gains_from_poles(&shuffled).unwrap();
            for (x, y) in [(a.k0, b.k0), (a.k1, b.k1), (a.k2, b.k2), (a.k3, b.k3)] {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
