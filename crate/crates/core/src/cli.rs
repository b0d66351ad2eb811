//! Run driver: configuration, orchestration of the solver and the files it
//! leaves behind (`history.csv`, `ledger.csv`, VTK snapshots).
//!
//! A run config is a small TOML document:
//!
//! ```toml
//! [mesh]
//! path = "bar.mesh"
//!
//! [material]
//! E = 30000.0
//! nu = 0.2
//! ft = 3.0
//! gf = 0.1
//!
//! [arc]
//! policy = "fixed"      # or "fraction"
//! a = 0.05
//! max_steps = 40
//!
//! [control]
//! node = 3
//! direction = "x"
//!
//! [output]
//! dir = "out"
//! snapshot_every = 1
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::Deserialize;
use thiserror::Error;

use crate::element::ResidualForm;
use crate::material::{traction, CohesiveLaw, Elasticity, MaterialError};
use crate::mesh::{parse_mesh, Direction, ElementKind, MeshError};
use crate::solver::{
    ArcConfig, ArcLength, ConstraintRow, Control, EnergyEstimate, Model, Simulation, SolverError, StepReport,
};

/// Environment variable that replaces `[output] dir`.
pub const OUTPUT_DIR_ENV: &str = "CRACKPATH_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("solver failure: {0}")]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Mesh(_) => 3,
            RunError::Solver(_) => 4,
            RunError::Io { .. } => 1,
        }
    }
}

impl From<MaterialError> for RunError {
    fn from(e: MaterialError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<MeshError> for RunError {
    fn from(e: MeshError) -> Self {
        RunError::Mesh(e.to_string())
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    pub nu: f64,
    pub ft: f64,
    pub gf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Fraction,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    #[default]
    CrackArea,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormName {
    #[default]
    Consistent,
    CenterPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RowName {
    #[default]
    Probe,
    Tangent,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArcSection {
    pub policy: Policy,
    pub fraction: f64,
    pub a: Option<f64>,
    pub estimate: EstimateMode,
    pub budget: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_steps: usize,
    pub max_cuts: usize,
    pub max_activations_per_step: usize,
    pub residual_form: FormName,
    pub constraint_row: RowName,
    pub row_fallback: bool,
}

impl Default for ArcSection {
    fn default() -> Self {
        let d = ArcConfig::default();
        Self {
            policy: Policy::Fraction,
            fraction: 0.01,
            a: None,
            estimate: EstimateMode::CrackArea,
            budget: None,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            max_steps: d.max_steps,
            max_cuts: d.max_cuts,
            max_activations_per_step: d.max_activations_per_step,
            residual_form: FormName::Consistent,
            constraint_row: RowName::Probe,
            row_fallback: d.row_fallback,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionName {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub node: usize,
    pub direction: DirectionName,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Snapshot every k committed steps; 0 disables snapshots.
    pub snapshot_every: usize,
    /// Displacement magnification of the snapshot geometry.
    pub scale: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("output"),
            snapshot_every: 1,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSection,
    pub material: MaterialSection,
    #[serde(default)]
    pub arc: ArcSection,
    pub control: ControlSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory that relative paths refer to.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, RunError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn validate(&self) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::Config(m.to_string()));
        let arc = &self.arc;
        match arc.policy {
            Policy::Fixed => match arc.a {
                Some(a) if a > 0.0 && a.is_finite() => {}
                _ => return bad("[arc] policy = \"fixed\" needs a positive `a`"),
            },
            Policy::Fraction => {
                if !(arc.fraction > 0.0 && arc.fraction <= 1.0) {
                    return bad("[arc] fraction must lie in (0, 1]");
                }
            }
        }
        if arc.estimate == EstimateMode::Budget && !matches!(arc.budget, Some(b) if b > 0.0 && b.is_finite()) {
            return bad("[arc] estimate = \"budget\" needs a positive `budget`");
        }
        if !(arc.tolerance > 0.0 && arc.tolerance < 1.0) {
            return bad("[arc] tolerance must lie in (0, 1)");
        }
        if arc.max_iterations == 0 {
            return bad("[arc] max_iterations must be positive");
        }
        if !(self.output.scale.is_finite()) {
            return bad("[output] scale must be finite");
        }
        Elasticity::new(self.material.youngs_modulus, self.material.nu)?;
        CohesiveLaw::new(self.material.ft, self.material.gf)?;
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn mesh_path(&self) -> PathBuf {
        self.resolve(&self.mesh.path)
    }

    /// Output directory after applying the environment override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.resolve(&self.output.dir),
        }
    }

    pub fn control(&self) -> Control {
        Control {
            node: self.control.node,
            direction: match self.control.direction {
                DirectionName::X => Direction::X,
                DirectionName::Y => Direction::Y,
            },
        }
    }

    pub fn arc_config(&self) -> ArcConfig {
        let arc = &self.arc;
        ArcConfig {
            arc_length: match arc.policy {
                Policy::Fixed => ArcLength::Fixed(arc.a.unwrap_or(0.0)),
                Policy::Fraction => ArcLength::Fraction(arc.fraction),
            },
            estimate: match arc.estimate {
                EstimateMode::CrackArea => EnergyEstimate::CrackArea,
                EstimateMode::Budget => EnergyEstimate::Budget(arc.budget.unwrap_or(0.0)),
            },
            tolerance: arc.tolerance,
            max_iterations: arc.max_iterations,
            max_steps: arc.max_steps,
            max_cuts: arc.max_cuts,
            max_activations_per_step: arc.max_activations_per_step,
            residual_form: match arc.residual_form {
                FormName::Consistent => ResidualForm::Consistent,
                FormName::CenterPoint => ResidualForm::CenterPoint,
            },
            constraint_row: match arc.constraint_row {
                RowName::Probe => ConstraintRow::Probe,
                RowName::Tangent => ConstraintRow::Tangent,
            },
            row_fallback: arc.row_fallback,
        }
    }

    /// Reads the mesh and builds the model, checking the control node.
    pub fn build_model(&self) -> Result<Model, RunError> {
        let path = self.mesh_path();
        let text = fs::read_to_string(&path)
            .map_err(|e| RunError::Config(format!("cannot read mesh {}: {e}", path.display())))?;
        let (mesh, bcs) = parse_mesh(&text)?;
        if self.control.node >= mesh.n_nodes() {
            return Err(RunError::Config(format!(
                "[control] node {} does not exist (mesh has {} nodes)",
                self.control.node,
                mesh.n_nodes()
            )));
        }
        let elasticity = Elasticity::new(self.material.youngs_modulus, self.material.nu)?;
        let law = CohesiveLaw::new(self.material.ft, self.material.gf)?;
        Model::new(mesh, bcs, elasticity, law).map_err(|e| match e {
            SolverError::Element(e) => RunError::Mesh(e.to_string()),
            SolverError::ZeroLoad => RunError::Mesh(e.to_string()),
            other => RunError::Solver(other),
        })
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxSteps,
    EnergyExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub termination: Termination,
    pub lambda: f64,
    pub e_cum: f64,
    pub output_dir: PathBuf,
}

/// Per-element crack data of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackField {
    pub element: usize,
    pub centroid: [f64; 2],
    pub normal: [f64; 2],
    pub zeta_n: f64,
    pub zeta_t: f64,
    pub zeta_eq: f64,
    pub traction_eq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    /// Two entries per node.
    pub displacement: Vec<f64>,
    pub cracks: Vec<CrackField>,
}

impl Snapshot {
    pub fn capture(sim: &Simulation) -> Self {
        let cracks = sim
            .state
            .elements
            .iter()
            .enumerate()
            .filter_map(|(e, s)| {
                let c = s.crack?;
                let zeta = Vector2::new(sim.state.z[c.offset], sim.state.z[c.offset + 1]);
                let t = traction(zeta, &sim.model.law, c.history.as_ref());
                Some(CrackField {
                    element: e,
                    centroid: sim.model.kernels[e].geometry.centroid,
                    normal: [c.crack.normal[0], c.crack.normal[1]],
                    zeta_n: zeta[0],
                    zeta_t: zeta[1],
                    zeta_eq: t.zeta_eq(),
                    traction_eq: t.traction_eq(),
                })
            })
            .collect();
        Self {
            step: sim.steps_taken(),
            displacement: sim.state.u.clone(),
            cracks,
        }
    }
}

type CellScalar = fn(&CrackField) -> f64;

/// Legacy ASCII VTK unstructured grid of the corner-node polygons.
pub fn snapshot_vtk(model: &Model, snapshot: &Snapshot, scale: f64) -> String {
    let mesh = &model.mesh;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "crackpath step {}", snapshot.step);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for (i, n) in mesh.nodes.iter().enumerate() {
        let ux = snapshot.displacement[2 * i];
        let uy = snapshot.displacement[2 * i + 1];
        let _ = writeln!(s, "{:.16e} {:.16e} 0", n.x + scale * ux, n.y + scale * uy);
    }
    let size: usize = mesh.elements.iter().map(|e| e.kind.n_corners() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", mesh.elements.len(), size);
    for e in &mesh.elements {
        let corners = e.corners();
        let ids: Vec<String> = corners.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "{} {}", corners.len(), ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.elements.len());
    for e in &mesh.elements {
        let _ = writeln!(
            s,
            "{}",
            match e.kind {
                ElementKind::Q8 => 9,
                ElementKind::T6 => 5,
            }
        );
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
    let _ = writeln!(s, "VECTORS displacement double");
    for i in 0..mesh.n_nodes() {
        let _ = writeln!(
            s,
            "{:.16e} {:.16e} 0",
            snapshot.displacement[2 * i],
            snapshot.displacement[2 * i + 1]
        );
    }
    let n_cells = mesh.elements.len();
    let mut fields = vec![CrackField {
        element: 0,
        centroid: [0.0; 2],
        normal: [0.0; 2],
        zeta_n: 0.0,
        zeta_t: 0.0,
        zeta_eq: 0.0,
        traction_eq: 0.0,
    }; n_cells];
    for c in &snapshot.cracks {
        fields[c.element] = *c;
    }
    let _ = writeln!(s, "CELL_DATA {n_cells}");
    let scalars: [(&str, CellScalar); 4] = [
        ("zeta_n", |c| c.zeta_n),
        ("zeta_t", |c| c.zeta_t),
        ("zeta_eq", |c| c.zeta_eq),
        ("t_eq", |c| c.traction_eq),
    ];
    for (name, get) in scalars {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for c in &fields {
            let _ = writeln!(s, "{:.16e}", get(c));
        }
    }
    let _ = writeln!(s, "VECTORS normal double");
    for c in &fields {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", c.normal[0], c.normal[1]);
    }
    s
}

/// Total reference force along the control direction.
pub fn control_force(model: &Model, control: Control) -> f64 {
    let d = control.direction.index();
    model.load.iter().skip(d).step_by(2).sum::<f64>().abs()
}

pub const HISTORY_HEADER: &str = "step,lambda,load,control_displacement,dE,E_cum,iterations";
pub const LEDGER_HEADER: &str = "step,I,E,W,Psi";

pub fn history_row(r: &StepReport, force: f64) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        r.step,
        r.lambda,
        r.lambda * force,
        r.control_displacement,
        r.de,
        r.e_cum,
        r.iterations
    )
}

pub fn ledger_row(r: &StepReport) -> String {
    let l = &r.ledger;
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.step, l.internal, l.dissipated, l.work, l.psi
    )
}

struct Outputs {
    dir: PathBuf,
    history: BufWriter<File>,
    ledger: BufWriter<File>,
    force: f64,
    snapshot_every: usize,
    scale: f64,
}

impl Outputs {
    fn create(dir: PathBuf, force: f64, output: &OutputSection) -> Result<Self, RunError> {
        fs::create_dir_all(&dir).map_err(io_error(&dir))?;
        let open = |name: &str, header: &str| -> Result<BufWriter<File>, RunError> {
            let path = dir.join(name);
            let mut w = BufWriter::new(File::create(&path).map_err(io_error(&path))?);
            writeln!(w, "{header}").map_err(io_error(&path))?;
            Ok(w)
        };
        Ok(Self {
            history: open("history.csv", HISTORY_HEADER)?,
            ledger: open("ledger.csv", LEDGER_HEADER)?,
            dir,
            force,
            snapshot_every: output.snapshot_every,
            scale: output.scale,
        })
    }

    fn record(&mut self, sim: &Simulation, r: &StepReport) -> Result<(), RunError> {
        let hp = self.dir.join("history.csv");
        writeln!(self.history, "{}", history_row(r, self.force)).map_err(io_error(&hp))?;
        self.history.flush().map_err(io_error(&hp))?;
        let lp = self.dir.join("ledger.csv");
        writeln!(self.ledger, "{}", ledger_row(r)).map_err(io_error(&lp))?;
        self.ledger.flush().map_err(io_error(&lp))?;
        if self.snapshot_every > 0 && r.step.is_multiple_of(self.snapshot_every) {
            let snap = Snapshot::capture(sim);
            let path = self.dir.join(format!("snapshot_{:04}.vtk", r.step));
            fs::write(&path, snapshot_vtk(&sim.model, &snap, self.scale)).map_err(io_error(&path))?;
        }
        Ok(())
    }
}

/// Validates a config and its mesh without writing anything.
pub fn check(config: &RunConfig) -> Result<Model, RunError> {
    config.build_model()
}

/// Runs the elastic phase and the arc-length loop, writing results as they
/// are committed. On a solver failure the files written so far are kept.
pub fn run(config: &RunConfig) -> Result<RunSummary, RunError> {
    let model = config.build_model()?;
    let control = config.control();
    let force = control_force(&model, control);
    let arc = config.arc_config();
    let mut sim = Simulation::new(model, arc).with_control(control);
    let dir = config.output_dir();
    let mut out = Outputs::create(dir.clone(), force, &config.output)?;

    let elastic = sim.elastic_phase()?;
    out.record(&sim, &elastic.report)?;
    let mut termination = Termination::MaxSteps;
    while sim.steps_taken() < arc.max_steps {
        let report = sim.step()?;
        out.record(&sim, &report)?;
        if sim.exhausted() {
            termination = Termination::EnergyExhausted;
            break;
        }
    }
    Ok(RunSummary {
        steps: sim.steps_taken(),
        termination,
        lambda: sim.state.lambda,
        e_cum: sim.state.e_cum,
        output_dir: dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[mesh]
path = "m.mesh"

[material]
E = 30000.0
nu = 0.2
ft = 3.0
gf = 0.1

[control]
node = 1
direction = "x"
"#;

    #[test]
    fn defaults_fill_optional_sections() {
        let c = RunConfig::parse(MINIMAL, Path::new("/tmp/x")).unwrap();
        assert_eq!(c.arc, ArcSection::default());
        assert_eq!(c.output, OutputSection::default());
        assert_eq!(c.mesh_path(), PathBuf::from("/tmp/x/m.mesh"));
        assert_eq!(c.arc_config().arc_length, ArcLength::Fraction(0.01));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cases = [
            MINIMAL.replace("nu = 0.2", "nu = 0.7"),
            MINIMAL.replace("gf = 0.1", "gf = -1.0"),
            format!("{MINIMAL}\n[arc]\npolicy = \"fixed\"\n"),
            format!("{MINIMAL}\n[arc]\nfraction = 1.5\n"),
            format!("{MINIMAL}\n[arc]\nunknown = 1\n"),
            MINIMAL.replace("[mesh]", "[meshes]"),
            MINIMAL.replace("\"x\"", "\"z\""),
        ];
        for text in cases {
            let err = RunConfig::parse(&text, Path::new(".")).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{err}");
        }
    }

    #[test]
    fn fixed_policy_maps_to_arc_length() {
        let text = format!("{MINIMAL}\n[arc]\npolicy = \"fixed\"\na = 0.25\nmax_steps = 5\nconstraint_row = \"tangent\"\n");
        let c = RunConfig::parse(&text, Path::new(".")).unwrap();
        let arc = c.arc_config();
        assert_eq!(arc.arc_length, ArcLength::Fixed(0.25));
        assert_eq!(arc.max_steps, 5);
        assert_eq!(arc.constraint_row, ConstraintRow::Tangent);
    }

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let codes = [
            RunError::Config(String::new()).exit_code(),
            RunError::Mesh(String::new()).exit_code(),
            RunError::Solver(SolverError::NoActiveCracks).exit_code(),
        ];
        assert_eq!(codes, [2, 3, 4]);
    }
}
