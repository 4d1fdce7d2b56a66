//! Load a configuration file and show what it resolves to.
//!
//! `cargo run --example config_file -- path/to/file.cfg` (defaults to the bundled one)

use gridflat::config::RunConfig;

fn main() {
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::from_path(path.as_ref()),
        None => Ok(RunConfig::bundled()),
    };
    match cfg {
        Ok(c) => {
            println!(
                "SCR {:.3}, X/R {:.3}",
                c.params.short_circuit_ratio(),
                c.params.x_over_r()
            );
            println!("gains {:?} from {:?}", c.gains, c.gain_source);
            for e in c.scenario.events() {
                println!(
                    "  {:>7.3} s  {:<15} -> {:.3} over {:.3} s",
                    e.time,
                    e.kind.name(),
                    e.target,
                    e.window
                );
            }
            println!(
                "dt {} s, t_end {} s, every {} steps logged",
                c.sim.dt, c.sim.t_end, c.sim.decimation
            );
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
