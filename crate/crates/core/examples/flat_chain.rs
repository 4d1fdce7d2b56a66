//! Finite-difference check of the flat-output chain on a closed-loop run.

use gridflat::acceptance::flat_chain_rms;
use gridflat::config::RunConfig;
use gridflat::sim::run_scenario;

fn main() {
    let cfg = RunConfig::bundled();
    let out = run_scenario(&cfg.params, &cfg.gains, &cfg.scenario, &cfg.sim).unwrap();
    let (rms12, rms3w) = flat_chain_rms(&out.record.samples);
    let w_peak = out
        .record
        .samples
        .iter()
        .map(|s| s.w.norm())
        .fold(0.0, f64::max);
    println!(
        "RMS |d(xi1)/dt - xi2| = {rms12:.4} W ({:.4}% of S_N)",
        100.0 * rms12 / cfg.params.rated_power
    );
    println!(
        "RMS |d(xi3)/dt - w|   = {rms3w:.4e} ({:.3}% of peak |w|)",
        100.0 * rms3w / w_peak
    );
}
