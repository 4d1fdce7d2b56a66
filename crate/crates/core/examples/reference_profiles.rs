//! Shaped set-point trajectories of the weak-grid test sequence.

use gridflat::trajectory::{Scenario, Shaping};

fn main() {
    let sc = Scenario::weak_grid_test_sequence(8000.0);
    println!(
        "{:>8} {:>10} {:>10} {:>12} {:>10} {:>12}",
        "t_ms", "p_i_W", "v_ref_V", "dv_ref_V/s", "q_ref_var", "q_int_J"
    );
    for k in 0..=56 {
        let t = k as f64 * 0.005;
        let r = sc.reference_at(t);
        println!(
            "{:8.1} {:10.2} {:10.4} {:12.3} {:10.2} {:12.4}",
            t * 1e3,
            r.p_i,
            r.v_ref,
            r.v_ref_d1,
            r.q_ref,
            r.q_ref_int
        );
    }
    for order in 1..=Shaping::MAX_ORDER {
        let s = sc
            .with_shaping(Shaping {
                order,
                ..Default::default()
            })
            .unwrap();
        let at_end = s.reference_at(0.020).p_i / (8000.0 / 2f64.sqrt());
        println!(
            "order {order}: input power at the end of its window = {:.4} of target",
            at_end
        );
    }
}
