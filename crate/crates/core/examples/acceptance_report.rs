//! Run the acceptance suite against the bundled configuration.

fn main() {
    let cfg = gridflat::config::RunConfig::bundled();
    println!("{}", gridflat::acceptance::run_suite(&cfg));
}
