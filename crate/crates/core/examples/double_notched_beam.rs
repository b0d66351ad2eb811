//! Four-point bending of a beam with two bottom notches inside the
//! constant-moment zone. Cracks start at both notches, but once one of them
//! localizes the other unloads: only one crack keeps growing.

use crackpath::fixtures::{notched_beam, BeamParams};
use crackpath::material::{CohesiveLaw, Elasticity};
use crackpath::mesh::parse_mesh;
use crackpath::solver::{ArcConfig, ArcLength, Control, Model, Simulation};

/// Largest equivalent opening among cracks within `reach` of `x`.
fn max_opening_near(sim: &Simulation, x: f64, reach: f64) -> f64 {
    sim.state
        .cracked_elements()
        .into_iter()
        .filter(|&e| (sim.model.kernels[e].geometry.centroid[0] - x).abs() <= reach)
        .filter_map(|e| sim.state.zeta(e))
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = BeamParams {
        length: 800.0,
        height: 160.0,
        ..BeamParams::default()
    };
    let beam = notched_beam(params);
    let (mesh, bcs) = parse_mesh(&beam.fixture.text)?;
    println!("{} elements, notches at x = {:?}", mesh.elements.len(), beam.notch_x);
    let model = Model::new(mesh, bcs, Elasticity::new(30e3, 0.2)?, CohesiveLaw::new(3.0, 0.05)?)?;
    let config = ArcConfig {
        arc_length: ArcLength::Fixed(5.0),
        max_steps: 40,
        ..ArcConfig::default()
    };
    let mut sim = Simulation::new(model, config).with_control(Control {
        node: beam.fixture.control_node,
        direction: beam.fixture.control_direction,
    });
    let elastic = sim.elastic_phase()?;
    println!("critical load {:.4}, first cracks {:?}", elastic.lambda_crit, elastic.activated);
    let reach = params.length / params.columns as f64 * 3.0;
    println!("{:>4} {:>10} {:>8} {:>12} {:>12} {:>4}", "step", "load", "cracks", "zeta_left", "zeta_right", "iter");
    for _ in 0..sim.config.max_steps {
        let r = sim.step()?;
        println!(
            "{:>4} {:>10.3} {:>8} {:>12.4e} {:>12.4e} {:>4}",
            r.step,
            r.lambda,
            sim.state.n_cracks(),
            max_opening_near(&sim, beam.notch_x[0], reach),
            max_opening_near(&sim, beam.notch_x[1], reach),
            r.iterations
        );
    }
    Ok(())
}
