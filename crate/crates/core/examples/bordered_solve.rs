//! One step of the dissipation-controlled Newton iteration, written out by
//! hand: linearize, solve the bordered system with two symmetric solves and
//! update, printing the residual and the dissipation error per iteration.

use crackpath::fixtures::tension_bar;
use crackpath::linalg::SymmetricSolver;
use crackpath::material::{CohesiveLaw, Elasticity};
use crackpath::mesh::parse_mesh;
use crackpath::element::ResidualForm;
use crackpath::solver::{ArcConfig, ConstraintRow, Control, Model, Simulation, SolverError, StepProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = tension_bar(2, 25.0, 25.0, 1.0);
    let (mesh, bcs) = parse_mesh(&fixture.text)?;
    let law = CohesiveLaw::new(3.0, 0.1)?;
    let model = Model::new(mesh, bcs, Elasticity::new(30e3, 0.2)?, law)?;
    let mut sim = Simulation::new(model, ArcConfig::default()).with_control(Control {
        node: fixture.control_node,
        direction: fixture.control_direction,
    });
    sim.elastic_phase()?;
    let a = 0.05 * law.fracture_energy() * 25.0;
    for row in [ConstraintRow::Probe, ConstraintRow::Tangent] {
        println!("{row:?} row");
        iterate(&StepProblem::new(&sim.model, &sim.state, ResidualForm::Consistent).with_row(row), a)?;
    }
    Ok(())
}

fn iterate(problem: &StepProblem, a: f64) -> Result<(), SolverError> {
    let mut solver = SymmetricSolver::new();
    let mut dx = vec![0.0; problem.dofs.len()];
    let mut dlambda = 0.0;
    println!("{:>4} {:>12} {:>12} {:>12} {:>12}", "iter", "|R|", "dE - a", "k_lambda", "dlambda");
    for it in 0..25 {
        let lin = problem.linearize(&dx, dlambda, a);
        let r = lin.residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if it > 0 && r < 1e-10 && (lin.de - a).abs() < 1e-10 * a {
            println!("{it:>4} {r:>12.4e} {:>12.4e} {:>12} {dlambda:>12.5}", lin.de - a, "-");
            break;
        }
        let update = problem.bordered_update(&mut solver, &lin, &dx)?;
        println!("{it:>4} {r:>12.4e} {:>12.4e} {:>12.4e} {dlambda:>12.5}", lin.de - a, update.k_lambda);
        for (x, d) in dx.iter_mut().zip(&update.dx) {
            *x += d;
        }
        dlambda += update.dlambda;
    }
    Ok(())
}
