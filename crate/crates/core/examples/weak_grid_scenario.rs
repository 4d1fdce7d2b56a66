//! The full weak-grid test sequence with a summary and an optional CSV dump.
//!
//! `cargo run --release --example weak_grid_scenario -- out.csv`

use std::fs::File;
use std::io::BufWriter;

use gridflat::config::RunConfig;
use gridflat::sim::run_scenario;
use gridflat::summary::summarize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::bundled();
    let start = std::time::Instant::now();
    let out = run_scenario(&cfg.params, &cfg.gains, &cfg.scenario, &cfg.sim)?;
    println!("{} steps in {:.2?}", out.steps_completed, start.elapsed());
    if let Some(f) = out.fault {
        println!("fault: {f}");
    }
    let events = cfg.scenario.aligned_to_step(cfg.sim.dt)?.event_times();
    print!("{}", summarize(&out.record, &events)?);
    if let Some(path) = std::env::args().nth(1) {
        out.record.write_csv(BufWriter::new(File::create(&path)?))?;
        println!("record written to {path}");
    }
    Ok(())
}
