//! A long elastic bar with one cracking element. The bar stores more
//! elastic energy than the crack can absorb at peak, so the end
//! displacement has to retreat while the load drops (snap-back). A
//! displacement-controlled solver cannot follow this branch.

use crackpath::fixtures::tension_bar;
use crackpath::material::{CohesiveLaw, Elasticity};
use crackpath::mesh::parse_mesh;
use crackpath::solver::{ArcConfig, ArcLength, Control, Model, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (e, ft, gf) = (30e3, 3.0, 0.1);
    let (blocks, block, height) = (10, 100.0, 50.0);
    let law = CohesiveLaw::new(ft, gf)?;
    let threshold = e * law.softening_energy() / (ft * ft);
    let length = blocks as f64 * block;
    println!("bar length {length} mm, snap-back threshold {threshold:.1} mm");

    let fixture = tension_bar(blocks, block, height, 1.0);
    let (mesh, bcs) = parse_mesh(&fixture.text)?;
    let model = Model::new(mesh, bcs, Elasticity::new(e, 0.0)?, law)?;
    let total = gf * height;
    let config = ArcConfig {
        arc_length: ArcLength::Fixed(total / 40.0),
        max_steps: 38,
        ..ArcConfig::default()
    };
    let mut sim = Simulation::new(model, config).with_control(Control {
        node: fixture.control_node,
        direction: fixture.control_direction,
    });
    let elastic = sim.elastic_phase()?;
    println!("first crack in element {:?}", elastic.activated);
    println!("{:>4} {:>10} {:>12} {:>10} {:>4}", "step", "load", "u_end", "E_cum", "iter");
    let mut previous = sim.control_displacement();
    for _ in 0..sim.config.max_steps {
        let r = sim.step()?;
        let marker = if r.control_displacement < previous { "  snap-back" } else { "" };
        previous = r.control_displacement;
        println!(
            "{:>4} {:>10.5} {:>12.5e} {:>10.5} {:>4}{marker}",
            r.step, r.lambda, r.control_displacement, r.e_cum, r.iterations
        );
    }
    Ok(())
}
