//! Pole placement for the fourth-order tracking-error dynamics.

use gridflat::tuning::{closed_loop_poles, tune, PoleSpec, DEFAULT_BAND_FACTOR};

fn main() {
    let fast = PoleSpec::new(1e-3, 0.707).unwrap();
    let slow = PoleSpec::new(10e-3, 0.707).unwrap();
    let t = tune(&fast, &slow, DEFAULT_BAND_FACTOR).unwrap();
    let g = t.gains;
    println!(
        "k1 = {:.4e}  k2 = {:.4e}  k3 = {:.4e}  k0 = {:.4e}",
        g.k1, g.k2, g.k3, g.k0
    );
    for (p, r) in t.poles.poles().iter().zip(t.report.residuals) {
        println!("target pole {p:.3}  scaled residual {r:.2e}");
    }
    let mut roots = closed_loop_poles(&g);
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    println!("recovered roots: {roots:.3?}");
    let tau = 1.0 / roots.iter().map(|p| p.re.abs()).fold(0.0, f64::max);
    println!("fastest time constant {:.3} ms", tau * 1e3);
}
