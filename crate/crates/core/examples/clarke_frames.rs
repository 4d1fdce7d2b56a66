//! Balanced three-phase quantities as space vectors.

use gridflat::frames::{
    balanced_set, clarke_forward, clarke_inverse, phase_peak, space_vector_magnitude,
};

fn main() {
    let v_peak = 230.94 * 2f64.sqrt();
    let i_peak = 16.33;
    let phi = 0.3;
    for k in 0..4 {
        let angle = k as f64 * std::f64::consts::FRAC_PI_4;
        let v = balanced_set(v_peak, angle);
        let i = balanced_set(i_peak, angle - phi);
        let (vs, is) = (clarke_forward(v), clarke_forward(i));
        let p_abc = v.dot(&i);
        let p_sv = (vs * is.conj()).re;
        println!("angle {angle:.3} rad  v = {vs:.3}  p_abc {p_abc:.3} W  Re(v i*) {p_sv:.3} W");
        let back = clarke_inverse(vs);
        assert!((back - v).max_abs() < 1e-9);
    }
    println!(
        "|v| = {:.3} V for a {v_peak:.3} V phase peak",
        space_vector_magnitude(v_peak)
    );
    println!(
        "a 20 A space vector is a {:.3} A phase peak",
        phase_peak(20.0)
    );
}
