//! One square element pulled apart until almost all of its fracture energy
//! is spent. Prints the load path and checks the dissipated energy.

use crackpath::fixtures::single_element;
use crackpath::material::{CohesiveLaw, Elasticity};
use crackpath::mesh::parse_mesh;
use crackpath::solver::{ArcConfig, ArcLength, Control, Model, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 50.0;
    let fixture = single_element(h);
    let (mesh, bcs) = parse_mesh(&fixture.text)?;
    let law = CohesiveLaw::new(3.0, 0.1)?;
    let model = Model::new(mesh, bcs, Elasticity::new(30e3, 0.2)?, law)?;
    let total = law.fracture_energy() * h;
    let config = ArcConfig {
        arc_length: ArcLength::Fixed(total / 51.0),
        max_steps: 50,
        ..ArcConfig::default()
    };
    let mut sim = Simulation::new(model, config).with_control(Control {
        node: fixture.control_node,
        direction: fixture.control_direction,
    });
    let elastic = sim.elastic_phase()?;
    println!("critical load factor {:.6}", elastic.lambda_crit);
    println!("{:>4} {:>12} {:>12} {:>12} {:>5} {:>8}", "step", "lambda", "u_control", "E_cum", "iter", "row");
    for _ in 0..sim.config.max_steps {
        let r = sim.step()?;
        println!(
            "{:>4} {:>12.5} {:>12.5e} {:>12.6} {:>5} {:>8?}",
            r.step, r.lambda, r.control_displacement, r.e_cum, r.iterations, r.row
        );
    }
    println!("E_cum / (G_f A) = {:.5}", sim.state.e_cum / total);
    Ok(())
}
