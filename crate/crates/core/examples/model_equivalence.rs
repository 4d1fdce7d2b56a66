//! Open-loop 20 ms run of the three-phase and the complex plant models.

use gridflat::acceptance::model_equivalence_deviation;
use gridflat::plant::PlantParams;

fn main() {
    let p = PlantParams::weak_grid_reference();
    let dev = model_equivalence_deviation(&p);
    println!("largest relative deviation between the two models: {dev:.3e}");
}
