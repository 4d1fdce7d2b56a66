//! One evaluation of the linearising controller at an operating point taken
//! from a closed-loop run (110 ms into the weak-grid sequence, full active and
//! reactive power).

use gridflat::config::RunConfig;
use gridflat::controller::FlatnessController;
use gridflat::plant::PlantState;
use gridflat::sim::{run_scenario, SimConfig};

fn main() {
    let cfg = RunConfig::bundled();
    let sim = SimConfig {
        t_end: 0.11,
        ..cfg.sim
    };
    let run = run_scenario(&cfg.params, &cfg.gains, &cfg.scenario, &sim).unwrap();
    let last = run.record.samples.last().unwrap();
    let s = PlantState {
        v_c1: last.v_c1,
        i_l: last.i_l,
        v_c2: last.v_c2,
        i_g: last.i_g,
        q_int: last.q_int,
    };
    let r = cfg.scenario.reference_at(last.t);

    let ctl = FlatnessController::new(cfg.params, cfg.gains, cfg.sim.guard);
    let out = ctl.evaluate(&s, last.y, &r);
    println!(
        "t = {:.3} s, v_c1 = {:.3} V, |i_g| = {:.3} A, |v_c2| = {:.2} V",
        last.t,
        s.v_c1,
        s.i_g.norm(),
        s.v_c2.norm()
    );
    println!(
        "xi1 = {:.4}  xi2 = {:.4}  xi3 = {:.4e}",
        out.flat.xi1, out.flat.xi2, out.flat.xi3
    );
    println!(
        "reference xi1 = {:.4}  xi2 = {:.4}",
        out.reference.xi1, out.reference.xi2
    );
    println!(
        "errors |e1| = {:.3e}  |e2| = {:.3e}  |e3| = {:.3e}",
        out.flat.e1.norm(),
        out.flat.e2.norm(),
        out.flat.e3.norm()
    );
    println!("auxiliary input w = {:.4e}", out.w);
    println!(
        "modulation index mu = {:.6} (|mu| = {:.4})",
        out.mu,
        out.mu.norm()
    );
    println!("guard: {:?}", out.guard);
}
