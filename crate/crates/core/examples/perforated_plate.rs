//! Square plate with a central hole under inclined top traction. Cracks
//! start at the hole and spread into two bands.

use crackpath::fixtures::{perforated_plate, PlateParams};
use crackpath::material::{CohesiveLaw, Elasticity};
use crackpath::mesh::parse_mesh;
use crackpath::solver::{ArcConfig, ArcLength, Control, Model, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = PlateParams::default();
    let fixture = perforated_plate(params);
    let (mesh, bcs) = parse_mesh(&fixture.text)?;
    println!("{} elements, hole radius {} mm", mesh.elements.len(), params.radius);
    let model = Model::new(mesh, bcs, Elasticity::new(30e3, 0.2)?, CohesiveLaw::new(3.0, 0.1)?)?;
    let config = ArcConfig {
        arc_length: ArcLength::Fixed(0.5),
        max_steps: 15,
        ..ArcConfig::default()
    };
    let mut sim = Simulation::new(model, config).with_control(Control {
        node: fixture.control_node,
        direction: fixture.control_direction,
    });
    let elastic = sim.elastic_phase()?;
    println!("critical load factor {:.4}, first cracks {:?}", elastic.lambda_crit, elastic.activated);
    println!("{:>4} {:>10} {:>12} {:>8} {:>8} {:>5}", "step", "lambda", "u_control", "E_cum", "cracks", "iter");
    for _ in 0..sim.config.max_steps {
        let r = sim.step()?;
        println!(
            "{:>4} {:>10.4} {:>12.4e} {:>8.3} {:>8} {:>5}",
            r.step,
            r.lambda,
            r.control_displacement,
            r.e_cum,
            sim.state.n_cracks(),
            r.iterations
        );
    }
    Ok(())
}
