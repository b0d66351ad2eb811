//! Global assembly and the dissipation-controlled arc-length solver.
//!
//! Each load step prescribes the fracture energy `a` to be dissipated. The
//! bordered system
//!
//! ```text
//! [ K_sym      -f ] [ddx]   [ R   ]
//! [ 0  g_prev  k  ] [ddl] = [ R_l ]
//! ```
//!
//! is never formed. Two solves against the symmetric tangent are combined with
//! a scalar correction instead, and `k` is probed numerically from the change
//! of the dissipation increment. Here `g = (V / l_c) T` collects the crack
//! forces and `g_prev` is its value at the start of the step.

use nalgebra::{Matrix2, Vector2};
use sprs::CsMat;
use thiserror::Error;

use crate::cracking::{activate, screen, select_next, CrackCandidate, CrackingError};
use crate::element::{
    element_displacements, element_matrices, internal_residual, strain_energy, ElementError, ElementGeometry,
    ElementKernel, ElementState, ResidualForm,
};
use crate::linalg::{mat_vec, Assembler, LinalgError, SymmetricSolver};
use crate::material::{elasticity_matrix, tangent, traction, CohesiveLaw, CrackHistory, Elasticity};
use crate::mesh::{BoundaryConditions, Direction, Mesh};

/// The first crack is opened to this multiple of the threshold opening before
/// arc-length stepping starts.
pub const SEAT_OPENING_RATIO: f64 = 1.001;

/// Load overshoot applied to the critical elastic load factor.
pub const CRITICAL_OVERSHOOT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no active cracks; the dissipation constraint needs at least one")]
    NoActiveCracks,
    #[error("step {step} did not converge after {cuts} arc-length cuts: {reason}")]
    StepDiverged { step: usize, cuts: usize, reason: String },
    #[error("bordered system is singular")]
    BorderedSingular,
    #[error("no element reaches the tensile strength under the reference load")]
    NoCrackingUnderLoad,
    #[error("the reference load vanishes on the free degrees of freedom")]
    ZeroLoad,
    #[error("the elastic phase has already run")]
    ElasticPhaseDone,
    #[error("newton iteration did not converge in {0} iterations")]
    NotConverged(usize),
    #[error("more than {0} activations within one step")]
    TooManyActivations(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Cracking(#[from] CrackingError),
}

/// Mesh, boundary conditions, material and the per-element kernels.
#[derive(Debug, Clone)]
pub struct Model {
    pub mesh: Mesh,
    pub bcs: BoundaryConditions,
    pub elasticity: Elasticity,
    pub law: CohesiveLaw,
    pub kernels: Vec<ElementKernel>,
    /// Reference load `f`, two entries per node.
    pub load: Vec<f64>,
    pub constrained: Vec<bool>,
}

impl Model {
    pub fn new(mesh: Mesh, bcs: BoundaryConditions, elasticity: Elasticity, law: CohesiveLaw) -> Result<Self, SolverError> {
        let c = elasticity_matrix(&elasticity);
        let kernels = (0..mesh.elements.len())
            .map(|e| Ok(ElementKernel::new(ElementGeometry::new(&mesh, e)?, c)))
            .collect::<Result<Vec<_>, ElementError>>()?;
        let load = bcs.load_vector(mesh.n_nodes());
        let constrained = bcs.constrained_mask(mesh.n_nodes());
        if load.iter().zip(&constrained).all(|(f, &c)| c || *f == 0.0) {
            return Err(SolverError::ZeroLoad);
        }
        Ok(Self {
            mesh,
            bcs,
            elasticity,
            law,
            kernels,
            load,
            constrained,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }
}

/// Numbering of the free unknowns: unconstrained nodal DOFs first, then two
/// crack openings per cracked element in activation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    node: Vec<Option<usize>>,
    n_free_u: usize,
    n_z: usize,
}

impl DofMap {
    pub fn new(constrained: &[bool], n_z: usize) -> Self {
        let mut next = 0;
        let node = constrained
            .iter()
            .map(|&c| {
                if c {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        Self {
            node,
            n_free_u: next,
            n_z,
        }
    }

    pub fn len(&self) -> usize {
        self.n_free_u + self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_free_u(&self) -> usize {
        self.n_free_u
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    /// Free index of nodal DOF `i`, `None` when constrained.
    pub fn node_dof(&self, i: usize) -> Option<usize> {
        self.node[i]
    }

    /// Free index of crack-opening entry `k`.
    pub fn crack_dof(&self, k: usize) -> usize {
        self.n_free_u + k
    }

    fn element_map(&self, mesh: &Mesh, element: usize, state: &ElementState) -> Vec<Option<usize>> {
        let mut map: Vec<_> = mesh.elements[element]
            .nodes
            .iter()
            .flat_map(|&n| [self.node[2 * n], self.node[2 * n + 1]])
            .collect();
        if let Some(c) = &state.crack {
            map.push(Some(self.crack_dof(c.offset)));
            map.push(Some(self.crack_dof(c.offset + 1)));
        }
        map
    }

    /// Restricts a nodal vector to the free DOFs, with zeros for the cracks.
    pub fn restrict_nodal(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, slot) in self.node.iter().enumerate() {
            if let Some(k) = slot {
                out[*k] = v[i];
            }
        }
        out
    }

    /// Adds a free-DOF increment to the nodal and crack vectors.
    pub fn add_increment(&self, dx: &[f64], u: &mut [f64], z: &mut [f64]) {
        for (i, slot) in self.node.iter().enumerate() {
            if let Some(k) = slot {
                u[i] += dx[*k];
            }
        }
        for (k, zk) in z.iter_mut().enumerate() {
            *zk += dx[self.n_free_u + k];
        }
    }

    pub fn crack_part<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.n_free_u..]
    }
}

/// State of the whole structure.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    /// Nodal displacements, two per node, zero on constrained DOFs.
    pub u: Vec<f64>,
    /// Crack openings, two per cracked element.
    pub z: Vec<f64>,
    pub lambda: f64,
    /// Dissipated energy accumulated over committed steps.
    pub e_cum: f64,
    pub elements: Vec<ElementState>,
}

impl GlobalState {
    pub fn new(model: &Model) -> Self {
        Self {
            u: vec![0.0; 2 * model.n_nodes()],
            z: Vec::new(),
            lambda: 0.0,
            e_cum: 0.0,
            elements: vec![ElementState::default(); model.mesh.elements.len()],
        }
    }

    pub fn n_cracks(&self) -> usize {
        self.z.len() / 2
    }

    /// Cracked element ids in activation order.
    pub fn cracked_elements(&self) -> Vec<usize> {
        let mut ids: Vec<_> = self
            .elements
            .iter()
            .enumerate()
            .filter_map(|(e, s)| s.crack.map(|c| (c.offset, e)))
            .collect();
        ids.sort_unstable();
        ids.into_iter().map(|(_, e)| e).collect()
    }

    pub fn zeta(&self, element: usize) -> Option<Vector2<f64>> {
        self.elements[element]
            .crack
            .map(|c| Vector2::new(self.z[c.offset], self.z[c.offset + 1]))
    }
}

/// Step size policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArcLength {
    /// Fixed dissipation per step.
    Fixed(f64),
    /// Fraction of the remaining fracture energy estimate.
    Fraction(f64),
}

/// How the available fracture energy is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EnergyEstimate {
    /// `G_f` times the total crack area of the cracked elements.
    #[default]
    CrackArea,
    /// A fixed total energy.
    Budget(f64),
}

/// Linearization of the dissipation constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintRow {
    /// Row `[0, g_prev]` with `k_lambda` from a finite probe along the
    /// load response.
    #[default]
    Probe,
    /// Exact derivative `g_prev - J_g^T Z_prev` of the dissipation
    /// increment, with `k_lambda = 0`.
    Tangent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcConfig {
    pub arc_length: ArcLength,
    pub estimate: EnergyEstimate,
    /// Relative tolerance on the force residual and on the constraint.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_steps: usize,
    /// Maximum number of times `a` is halved before a step is abandoned.
    pub max_cuts: usize,
    pub max_activations_per_step: usize,
    pub residual_form: ResidualForm,
    pub constraint_row: ConstraintRow,
    /// Retry a failed probe-row attempt with the tangent row before cutting.
    pub row_fallback: bool,
}

impl Default for ArcConfig {
    fn default() -> Self {
        Self {
            arc_length: ArcLength::Fraction(0.01),
            estimate: EnergyEstimate::CrackArea,
            tolerance: 1e-8,
            max_iterations: 25,
            max_steps: 100,
            max_cuts: 5,
            max_activations_per_step: 200,
            residual_form: ResidualForm::Consistent,
            constraint_row: ConstraintRow::Probe,
            row_fallback: true,
        }
    }
}

/// Energy bookkeeping `Psi = I + E - W`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    /// Elastic strain energy.
    pub internal: f64,
    /// Dissipated energy.
    pub dissipated: f64,
    /// External work, trapezoidal along the committed path.
    pub work: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub lambda: f64,
    pub control_displacement: f64,
    /// Prescribed dissipation after cuts.
    pub target: f64,
    /// Achieved dissipation.
    pub de: f64,
    pub e_cum: f64,
    pub iterations: usize,
    pub cuts: usize,
    /// Constraint linearization that produced the converged increment.
    pub row: ConstraintRow,
    pub ledger: EnergyLedger,
    pub activated: Vec<usize>,
}

/// Control point for reported displacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub node: usize,
    pub direction: Direction,
}

/// Assembled tangent and residual ingredients at one state.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub k_sym: CsMat<f64>,
    /// `[f_int; -r_crack]` on the free DOFs; equilibrium is `internal = lambda f`.
    pub internal: Vec<f64>,
    /// Crack forces `(V / l_c) T`, aligned with `z`.
    pub crack_forces: Vec<f64>,
}

/// Crack forces `(V / l_c) T(zeta)` for the openings `z` with the histories
/// stored in `elements`.
pub fn crack_forces(model: &Model, elements: &[ElementState], z: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; z.len()];
    for s in elements {
        if let Some(c) = &s.crack {
            let zeta = Vector2::new(z[c.offset], z[c.offset + 1]);
            let t = traction(zeta, &model.law, c.history.as_ref()).traction * c.crack.area_factor();
            g[c.offset] = t[0];
            g[c.offset + 1] = t[1];
        }
    }
    g
}

/// Assembles the symmetric tangent, internal forces and crack forces.
pub fn assemble(
    model: &Model,
    dofs: &DofMap,
    elements: &[ElementState],
    u: &[f64],
    z: &[f64],
    form: ResidualForm,
) -> Assembly {
    let mut asm = Assembler::new(dofs.len());
    let mut internal = vec![0.0; dofs.len()];
    let mut g = vec![0.0; z.len()];
    for (e, kernel) in model.kernels.iter().enumerate() {
        let state = &elements[e];
        let map = dofs.element_map(&model.mesh, e, state);
        let ue = element_displacements(&model.mesh, e, u);
        let nd = ue.len();
        match &state.crack {
            None => {
                asm.add_block(&map, &kernel.k_uu);
                let f = &kernel.k_uu * &ue;
                for (i, slot) in map.iter().enumerate() {
                    if let Some(k) = slot {
                        internal[*k] += f[i];
                    }
                }
            }
            Some(c) => {
                let zeta = Vector2::new(z[c.offset], z[c.offset + 1]);
                let history = c.history.as_ref();
                let t = traction(zeta, &model.law, history).traction;
                let d = tangent(zeta, &model.law, history);
                let m = element_matrices(kernel, Some((&c.crack, &d)));
                asm.add_block(&map, &m.k_sym);
                let r = internal_residual(kernel, Some((&c.crack, t)), &ue, zeta, form);
                for (i, slot) in map.iter().enumerate().take(nd) {
                    if let Some(k) = slot {
                        internal[*k] += r.nodal[i];
                    }
                }
                let rc = r.crack.expect("cracked element has a crack residual");
                internal[dofs.crack_dof(c.offset)] -= rc[0];
                internal[dofs.crack_dof(c.offset + 1)] -= rc[1];
                let gt = t * c.crack.area_factor();
                g[c.offset] = gt[0];
                g[c.offset + 1] = gt[1];
            }
        }
    }
    Assembly {
        k_sym: asm.finish(),
        internal,
        crack_forces: g,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `K x_I = r` and `K x_II = f2` with one factorization.
pub fn linear_solve_2rhs(
    solver: &mut SymmetricSolver,
    k_sym: &CsMat<f64>,
    rhs: &[f64],
    second: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    crate::linalg::solve_two(solver, k_sym, rhs, second)
}

/// Forward-Euler dissipation increment
/// `1/2 [dZ . g_prev - Z_prev . (g_now - g_prev)]`.
///
/// On a secant branch `g` is proportional to `Z` and the increment is zero;
/// along the softening envelope it integrates to the fracture energy.
pub fn incremental_dissipation(z_prev: &[f64], g_prev: &[f64], dz: &[f64], g_now: &[f64]) -> f64 {
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..z_prev.len() {
        first += dz[i] * g_prev[i];
        second += z_prev[i] * (g_now[i] - g_prev[i]);
    }
    0.5 * (first - second)
}

/// Change of the dissipation increment caused by the response `-ddz_ii`:
/// `k = dE(dZ - ddZ_II) - dE(dZ)`. `forces` evaluates crack forces for total
/// openings with the histories of the step start.
pub fn numeric_k_lambda(
    z_prev: &[f64],
    g_prev: &[f64],
    dz: &[f64],
    ddz_ii: &[f64],
    forces: impl Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    let total = |d: &[f64]| -> Vec<f64> { z_prev.iter().zip(d).map(|(a, b)| a + b).collect() };
    let de_i = incremental_dissipation(z_prev, g_prev, dz, &forces(&total(dz)));
    let shifted: Vec<f64> = dz.iter().zip(ddz_ii).map(|(a, b)| a - b).collect();
    let de_ii = incremental_dissipation(z_prev, g_prev, &shifted, &forces(&total(&shifted)));
    de_ii - de_i
}

/// Combination of the two symmetric solves into the bordered-system update.
/// Returns `(ddx, ddlambda)`.
pub fn sherman_morrison_update(
    x_i: &[f64],
    x_ii: &[f64],
    s_i: f64,
    s_ii: f64,
    k_lambda: f64,
    r_lambda: f64,
) -> Result<(Vec<f64>, f64), SolverError> {
    let denom = s_ii - k_lambda;
    if !(denom.abs() > 1e-14 * (s_ii.abs() + k_lambda.abs() + 1.0)) {
        return Err(SolverError::BorderedSingular);
    }
    let scale = (s_i - r_lambda) / denom;
    let dx: Vec<f64> = x_i.iter().zip(x_ii).map(|(a, b)| a - scale * b).collect();
    let dlambda = r_lambda - (-s_i + r_lambda * (1.0 + s_ii - k_lambda)) / denom;
    Ok((dx, dlambda))
}

/// Everything needed to build one bordered update at a trial state.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub k_sym: CsMat<f64>,
    /// `[R_U; R_Z]`
    pub residual: Vec<f64>,
    /// Reference load on the free DOFs.
    pub load: Vec<f64>,
    /// Bordering row `[0, g_prev]`.
    pub constraint_row: Vec<f64>,
    pub r_lambda: f64,
    /// Dissipation increment of the trial state.
    pub de: f64,
}

/// Result of one bordered update.
#[derive(Debug, Clone)]
pub struct BorderedUpdate {
    pub dx: Vec<f64>,
    pub dlambda: f64,
    pub k_lambda: f64,
    pub s_i: f64,
    pub s_ii: f64,
}

/// Increment of one load step relative to its start state.
#[derive(Debug, Clone)]
pub struct StepProblem<'a> {
    pub model: &'a Model,
    pub start: &'a GlobalState,
    pub dofs: DofMap,
    pub g_prev: Vec<f64>,
    pub load: Vec<f64>,
    pub form: ResidualForm,
    pub row: ConstraintRow,
}

impl<'a> StepProblem<'a> {
    pub fn new(model: &'a Model, start: &'a GlobalState, form: ResidualForm) -> Self {
        let dofs = DofMap::new(&model.constrained, start.z.len());
        let g_prev = crack_forces(model, &start.elements, &start.z);
        let load = dofs.restrict_nodal(&model.load);
        Self {
            model,
            start,
            dofs,
            g_prev,
            load,
            form,
            row: ConstraintRow::Probe,
        }
    }

    pub fn with_row(mut self, row: ConstraintRow) -> Self {
        self.row = row;
        self
    }

    /// Nodal and crack vectors of the trial state `start + dx`.
    pub fn trial(&self, dx: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = self.start.u.clone();
        let mut z = self.start.z.clone();
        self.dofs.add_increment(dx, &mut u, &mut z);
        (u, z)
    }

    pub fn crack_forces_at(&self, z: &[f64]) -> Vec<f64> {
        crack_forces(self.model, &self.start.elements, z)
    }

    /// Residuals and tangent at `start + dx` with load factor `start.lambda + dlambda`.
    pub fn linearize(&self, dx: &[f64], dlambda: f64, a: f64) -> Linearization {
        let (u, z) = self.trial(dx);
        let asm = assemble(self.model, &self.dofs, &self.start.elements, &u, &z, self.form);
        let lambda = self.start.lambda + dlambda;
        let residual: Vec<f64> = self
            .load
            .iter()
            .zip(&asm.internal)
            .map(|(f, fi)| lambda * f - fi)
            .collect();
        let dz = self.dofs.crack_part(dx);
        let de = incremental_dissipation(&self.start.z, &self.g_prev, dz, &asm.crack_forces);
        let mut row = vec![0.0; self.dofs.len()];
        let nu = self.dofs.n_free_u();
        row[nu..].copy_from_slice(&self.g_prev);
        if self.row == ConstraintRow::Tangent {
            for s in &self.start.elements {
                let Some(c) = s.crack else { continue };
                let zeta = Vector2::new(z[c.offset], z[c.offset + 1]);
                let jac = tangent(zeta, &self.model.law, c.history.as_ref()) * c.crack.area_factor();
                let jt_z = jac.transpose() * Vector2::new(self.start.z[c.offset], self.start.z[c.offset + 1]);
                row[nu + c.offset] -= jt_z[0];
                row[nu + c.offset + 1] -= jt_z[1];
            }
        }
        Linearization {
            k_sym: asm.k_sym,
            residual,
            load: self.load.clone(),
            constraint_row: row,
            r_lambda: 2.0 * a - 2.0 * de,
            de,
        }
    }

    /// One bordered update from a linearization at `start + dx`.
    pub fn bordered_update(
        &self,
        solver: &mut SymmetricSolver,
        lin: &Linearization,
        dx: &[f64],
    ) -> Result<BorderedUpdate, SolverError> {
        let minus_f: Vec<f64> = lin.load.iter().map(|f| -f).collect();
        let (x_i, x_ii) = linear_solve_2rhs(solver, &lin.k_sym, &lin.residual, &minus_f)?;
        let s_i = dot(&lin.constraint_row, &x_i);
        let s_ii = dot(&lin.constraint_row, &x_ii);
        let k_lambda = match self.row {
            ConstraintRow::Probe => numeric_k_lambda(
                &self.start.z,
                &self.g_prev,
                self.dofs.crack_part(dx),
                self.dofs.crack_part(&x_ii),
                |z| self.crack_forces_at(z),
            ),
            ConstraintRow::Tangent => 0.0,
        };
        let (ddx, ddl) = sherman_morrison_update(&x_i, &x_ii, s_i, s_ii, k_lambda, lin.r_lambda)?;
        if !ddl.is_finite() || ddx.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::BorderedSingular);
        }
        Ok(BorderedUpdate {
            dx: ddx,
            dlambda: ddl,
            k_lambda,
            s_i,
            s_ii,
        })
    }
}

/// Converged increment of one step.
#[derive(Debug, Clone)]
pub struct Increment {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: f64,
    pub de: f64,
    pub iterations: usize,
}

/// Newton iteration for one step with dissipation target `a`.
pub fn solve_increment(
    model: &Model,
    start: &GlobalState,
    a: f64,
    config: &ArcConfig,
    solver: &mut SymmetricSolver,
) -> Result<Increment, SolverError> {
    if start.z.is_empty() {
        return Err(SolverError::NoActiveCracks);
    }
    let problem = StepProblem::new(model, start, config.residual_form).with_row(config.constraint_row);
    let mut dx = vec![0.0; problem.dofs.len()];
    let mut dlambda = 0.0;
    for iteration in 0..=config.max_iterations {
        let lin = problem.linearize(&dx, dlambda, a);
        let lambda = start.lambda + dlambda;
        let force_scale = lambda.abs() * norm(&problem.load);
        let converged = iteration > 0
            && norm(&lin.residual) <= config.tolerance * force_scale
            && (lin.de - a).abs() <= config.tolerance * a;
        if converged {
            let (u, z) = problem.trial(&dx);
            return Ok(Increment {
                u,
                z,
                lambda,
                de: lin.de,
                iterations: iteration,
            });
        }
        if iteration == config.max_iterations {
            break;
        }
        let update = problem.bordered_update(solver, &lin, &dx)?;
        for (d, dd) in dx.iter_mut().zip(&update.dx) {
            *d += dd;
        }
        dlambda += update.dlambda;
    }
    Err(SolverError::NotConverged(config.max_iterations))
}

/// Load-controlled equilibrium with the normal opening of crack entry
/// `control` driven to `target`; the load factor is the extra unknown.
pub fn solve_opening_controlled(
    model: &Model,
    start: &GlobalState,
    control: usize,
    target: f64,
    config: &ArcConfig,
    solver: &mut SymmetricSolver,
) -> Result<Increment, SolverError> {
    let problem = StepProblem::new(model, start, config.residual_form);
    let ci = problem.dofs.crack_dof(control);
    let mut dx = vec![0.0; problem.dofs.len()];
    let mut dlambda = 0.0;
    let minus_f: Vec<f64> = problem.load.iter().map(|f| -f).collect();
    for iteration in 0..=config.max_iterations {
        let lin = problem.linearize(&dx, dlambda, 0.0);
        let lambda = start.lambda + dlambda;
        let gap = target - (start.z[control] + dx[ci]);
        if iteration > 0
            && norm(&lin.residual) <= config.tolerance * lambda.abs() * norm(&problem.load)
            && gap.abs() <= config.tolerance * target.abs()
        {
            let (u, z) = problem.trial(&dx);
            return Ok(Increment {
                u,
                z,
                lambda,
                de: lin.de,
                iterations: iteration,
            });
        }
        if iteration == config.max_iterations {
            break;
        }
        let (x_i, x_ii) = linear_solve_2rhs(solver, &lin.k_sym, &lin.residual, &minus_f)?;
        if x_ii[ci].abs() <= 1e-300 {
            return Err(SolverError::BorderedSingular);
        }
        let ddl = (x_i[ci] - gap) / x_ii[ci];
        for i in 0..dx.len() {
            dx[i] += x_i[i] - ddl * x_ii[i];
        }
        dlambda += ddl;
    }
    Err(SolverError::NotConverged(config.max_iterations))
}

/// Elastic strain energy of a state.
pub fn internal_energy(model: &Model, state: &GlobalState) -> f64 {
    model
        .kernels
        .iter()
        .enumerate()
        .map(|(e, k)| {
            let ue = element_displacements(&model.mesh, e, &state.u);
            let crack = state.elements[e].crack;
            let zeta = state.zeta(e).unwrap_or_else(Vector2::zeros);
            strain_energy(k, crack.as_ref().map(|c| &c.crack), &ue, zeta)
        })
        .sum()
}

/// `Psi = I + E - W` for the current state and accumulated work.
pub fn energy_ledger(model: &Model, state: &GlobalState, work: f64) -> EnergyLedger {
    let internal = internal_energy(model, state);
    EnergyLedger {
        internal,
        dissipated: state.e_cum,
        work,
        psi: internal + state.e_cum - work,
    }
}

/// Trapezoidal work increment of the external load between two states.
pub fn work_increment(load: &[f64], lambda0: f64, u0: &[f64], lambda1: f64, u1: &[f64]) -> f64 {
    let du: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| a - b).collect();
    0.5 * (lambda0 + lambda1) * dot(load, &du)
}

/// Outcome of the elastic phase.
#[derive(Debug, Clone)]
pub struct ElasticPhase {
    /// Load factor at which the first element reaches the tensile strength.
    pub lambda_crit: f64,
    /// Report at the end of the linear branch, before any crack is active.
    pub report: StepReport,
    /// Elements activated, in order.
    pub activated: Vec<usize>,
}

/// Driver owning the model, the committed state and the energy trajectory.
#[derive(Debug)]
pub struct Simulation {
    pub model: Model,
    pub config: ArcConfig,
    pub state: GlobalState,
    pub control: Option<Control>,
    work: f64,
    step: usize,
    solver: SymmetricSolver,
}

impl Simulation {
    pub fn new(model: Model, config: ArcConfig) -> Self {
        let state = GlobalState::new(&model);
        Self {
            model,
            config,
            state,
            control: None,
            work: 0.0,
            step: 0,
            solver: SymmetricSolver::new(),
        }
    }

    pub fn with_control(mut self, control: Control) -> Self {
        self.control = Some(control);
        self
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn work(&self) -> f64 {
        self.work
    }

    pub fn ledger(&self) -> EnergyLedger {
        energy_ledger(&self.model, &self.state, self.work)
    }

    pub fn control_displacement(&self) -> f64 {
        self.control
            .map(|c| self.state.u[2 * c.node + c.direction.index()])
            .unwrap_or(0.0)
    }

    /// Total fracture energy available to the cracks.
    pub fn energy_estimate(&self) -> f64 {
        match self.config.estimate {
            EnergyEstimate::CrackArea => {
                let area: f64 = self
                    .state
                    .elements
                    .iter()
                    .filter_map(|s| s.crack.map(|c| c.crack.area))
                    .sum();
                self.model.law.fracture_energy() * area
            }
            EnergyEstimate::Budget(total) => total,
        }
    }

    /// Dissipation to prescribe for the next step.
    pub fn next_arc_length(&self) -> f64 {
        match self.config.arc_length {
            ArcLength::Fixed(a) => a,
            ArcLength::Fraction(frac) => frac * (self.energy_estimate() - self.state.e_cum).max(0.0),
        }
    }

    fn report(
        &self,
        target: f64,
        de: f64,
        iterations: usize,
        cuts: usize,
        row: ConstraintRow,
        activated: Vec<usize>,
    ) -> StepReport {
        StepReport {
            step: self.step,
            lambda: self.state.lambda,
            control_displacement: self.control_displacement(),
            target,
            de,
            e_cum: self.state.e_cum,
            iterations,
            cuts,
            row,
            ledger: self.ledger(),
            activated,
        }
    }

    fn commit(&mut self, inc: Increment, add_dissipation: bool) {
        self.work += work_increment(&self.model.load, self.state.lambda, &self.state.u, inc.lambda, &inc.u);
        self.state.u = inc.u;
        self.state.z = inc.z;
        self.state.lambda = inc.lambda;
        if add_dissipation {
            self.state.e_cum += inc.de;
        }
        for s in &mut self.state.elements {
            if let Some(c) = s.crack.as_mut() {
                let zeta = Vector2::new(self.state.z[c.offset], self.state.z[c.offset + 1]);
                c.history = CrackHistory::committed(&self.model.law, c.history, zeta);
            }
        }
    }

    fn candidates(&self, u: &[f64], elements: &[ElementState]) -> Vec<CrackCandidate> {
        screen(
            &self.model.mesh,
            &self.model.kernels,
            elements,
            u,
            self.model.law.tensile_strength(),
        )
    }

    /// Linear branch up to the first crack, followed by opening-controlled
    /// seating of that crack slightly past the threshold opening.
    pub fn elastic_phase(&mut self) -> Result<ElasticPhase, SolverError> {
        if self.state.n_cracks() > 0 || self.step > 0 {
            return Err(SolverError::ElasticPhaseDone);
        }
        let dofs = DofMap::new(&self.model.constrained, 0);
        let f = dofs.restrict_nodal(&self.model.load);
        let zero = vec![0.0; self.state.u.len()];
        let asm = assemble(&self.model, &dofs, &self.state.elements, &zero, &[], self.config.residual_form);
        self.solver.factorize(&asm.k_sym)?;
        let x = self.solver.solve(&asm.k_sym, &f)?;
        let mut unit = zero.clone();
        dofs.add_increment(&x, &mut unit, &mut []);

        let ft = self.model.law.tensile_strength();
        let mut lambda_crit = f64::INFINITY;
        for (e, k) in self.model.kernels.iter().enumerate() {
            let strain = k.geometry.center_strain(&element_displacements(&self.model.mesh, e, &unit));
            let (phi, _) = crate::cracking::rankine(&strain, &k.c, 0.0);
            if phi > 0.0 {
                lambda_crit = lambda_crit.min(ft / phi);
            }
        }
        if !lambda_crit.is_finite() {
            return Err(SolverError::NoCrackingUnderLoad);
        }
        let lambda = lambda_crit * (1.0 + CRITICAL_OVERSHOOT);
        let u: Vec<f64> = unit.iter().map(|v| v * lambda).collect();
        self.commit(
            Increment {
                u,
                z: Vec::new(),
                lambda,
                de: 0.0,
                iterations: 1,
            },
            false,
        );
        let report = self.report(0.0, 0.0, 1, 0, self.config.constraint_row, Vec::new());

        let candidates = self.candidates(&self.state.u, &self.state.elements);
        let first = select_next(&candidates).ok_or(SolverError::NoCrackingUnderLoad)?;
        let normal = candidates.iter().find(|c| c.element == first).unwrap().normal;
        let mut start = self.state.clone();
        activate(&self.model.mesh, &mut start.elements, first, normal, &mut start.z)?;
        let mut activated = vec![first];
        let target = SEAT_OPENING_RATIO * self.model.law.threshold_opening();
        let seat_config = ArcConfig {
            max_iterations: self.config.max_iterations.max(50),
            ..self.config
        };
        loop {
            let inc = solve_opening_controlled(&self.model, &start, 0, target, &seat_config, &mut self.solver)?;
            let mut trial = start.clone();
            trial.u = inc.u.clone();
            let candidates = self.candidates(&trial.u, &start.elements);
            match select_next(&candidates) {
                Some(e) if activated.len() < self.config.max_activations_per_step => {
                    let normal = candidates.iter().find(|c| c.element == e).unwrap().normal;
                    activate(&self.model.mesh, &mut start.elements, e, normal, &mut start.z)?;
                    let offset = start.elements[e].crack.as_ref().expect("just activated").offset;
                    let zeta = rise_opening(&self.model, &start, e, self.config.residual_form);
                    start.z[offset] = zeta[0];
                    start.z[offset + 1] = zeta[1];
                    activated.push(e);
                }
                Some(_) => return Err(SolverError::TooManyActivations(self.config.max_activations_per_step)),
                None => {
                    self.state.elements = start.elements;
                    self.state.z = start.z;
                    self.commit(inc, false);
                    break;
                }
            }
        }
        Ok(ElasticPhase {
            lambda_crit,
            report,
            activated,
        })
    }

    /// One committed arc-length step, including any activations it triggers.
    pub fn step(&mut self) -> Result<StepReport, SolverError> {
        if self.state.n_cracks() == 0 {
            return Err(SolverError::NoActiveCracks);
        }
        let a0 = self.next_arc_length();
        let step = self.step + 1;
        let mut reason = String::new();
        let mut rows = vec![self.config.constraint_row];
        if self.config.row_fallback && self.config.constraint_row == ConstraintRow::Probe {
            rows.push(ConstraintRow::Tangent);
        }
        for cut in 0..=self.config.max_cuts {
            let a = a0 / 2f64.powi(cut as i32);
            for &row in &rows {
                match self.try_step(a, row) {
                    Ok((inc, start, activated)) => {
                        self.state.elements = start.elements;
                        self.state.z = start.z;
                        let (iterations, de) = (inc.iterations, inc.de);
                        self.commit(inc, true);
                        self.step = step;
                        return Ok(self.report(a, de, iterations, cut, row, activated));
                    }
                    Err(e @ (SolverError::Element(_) | SolverError::Cracking(_))) => return Err(e),
                    Err(e) => reason = e.to_string(),
                }
            }
        }
        Err(SolverError::StepDiverged {
            step,
            cuts: self.config.max_cuts,
            reason,
        })
    }

    fn try_step(
        &mut self,
        a: f64,
        row: ConstraintRow,
    ) -> Result<(Increment, GlobalState, Vec<usize>), SolverError> {
        let mut start = self.state.clone();
        let mut activated = Vec::new();
        let config = ArcConfig {
            constraint_row: row,
            ..self.config
        };
        loop {
            let inc = solve_increment(&self.model, &start, a, &config, &mut self.solver)?;
            let candidates = self.candidates(&inc.u, &start.elements);
            match select_next(&candidates) {
                None => return Ok((inc, start, activated)),
                Some(_) if activated.len() >= self.config.max_activations_per_step => {
                    return Err(SolverError::TooManyActivations(self.config.max_activations_per_step))
                }
                Some(e) => {
                    let normal = candidates.iter().find(|c| c.element == e).unwrap().normal;
                    activate(&self.model.mesh, &mut start.elements, e, normal, &mut start.z)?;
                    let offset = start.elements[e].crack.as_ref().expect("just activated").offset;
                    let zeta = rise_opening(&self.model, &start, e, config.residual_form);
                    start.z[offset] = zeta[0];
                    start.z[offset + 1] = zeta[1];
                    activated.push(e);
                }
            }
        }
    }

    /// Whether the dissipated energy has reached 99% of the estimate.
    pub fn exhausted(&self) -> bool {
        self.state.e_cum >= 0.99 * self.energy_estimate()
    }
}

/// Opening of a freshly activated crack that balances the element at the
/// start-state displacements on the reversible rise branch, capped at `zeta0`.
/// Starting from this instead of zero lets the first increment of the crack
/// see its actual traction, so its first-step dissipation is not lost.
fn rise_opening(model: &Model, state: &GlobalState, e: usize, form: ResidualForm) -> Vector2<f64> {
    let c = state.elements[e].crack.as_ref().expect("cracked element");
    let kernel = &model.kernels[e];
    let ue = element_displacements(&model.mesh, e, &state.u);
    let nd = ue.len();
    let d = Matrix2::identity() * model.law.initial_stiffness();
    let m = element_matrices(kernel, Some((&c.crack, &d)));
    let kzz = Matrix2::new(m.k_sym[(nd, nd)], m.k_sym[(nd, nd + 1)], m.k_sym[(nd + 1, nd)], m.k_sym[(nd + 1, nd + 1)]);
    let Some(inv) = kzz.try_inverse() else {
        return Vector2::zeros();
    };
    let zero = Vector2::zeros();
    let r = internal_residual(kernel, Some((&c.crack, zero)), &ue, zero, form)
        .crack
        .expect("cracked element has a crack residual");
    // The crack block of the internal force is -r, linear in zeta on the rise.
    let zeta = inv * r;
    let zeta0 = model.law.threshold_opening();
    let norm = zeta.norm();
    if norm > zeta0 {
        zeta * (zeta0 / norm)
    } else {
        zeta
    }
}

/// Dense copy of a sparse matrix, for small oracles and diagnostics.
pub fn to_dense(a: &CsMat<f64>) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(a.rows(), a.cols());
    for (v, (r, c)) in a.iter() {
        m[(r, c)] += *v;
    }
    m
}

/// `K_sym x` on the free DOFs.
pub fn apply(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    mat_vec(a, x)
}
