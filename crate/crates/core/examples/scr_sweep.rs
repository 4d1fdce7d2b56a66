//! Stability verdicts over a small grid of grid resistances and inductances.

use gridflat::config::RunConfig;
use gridflat::sweep::{grid_points, run_sweep, write_sweep_csv, SweepRange};

fn main() {
    let cfg = RunConfig::bundled();
    let pts = grid_points(
        &SweepRange {
            start: 0.0,
            stop: 40.0,
        },
        &SweepRange {
            start: 0.03,
            stop: 0.12,
        },
        3,
    )
    .unwrap();
    let rows = run_sweep(&cfg, &pts);
    write_sweep_csv(&rows, std::io::stdout().lock()).unwrap();
}
