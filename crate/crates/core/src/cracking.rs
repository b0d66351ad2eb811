//! Crack orientation, Rankine-type screening and the activation strategy.
//!
//! Elements bordering an existing crack are always preferred over isolated
//! ones, and only one element is activated at a time.

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

use crate::element::{
    characteristic_length, element_displacements, oriented_normal, ActiveCrack, ElementError, ElementKernel,
    ElementState,
};
use crate::mesh::Mesh;

#[derive(Debug, Error, PartialEq)]
pub enum CrackingError {
    #[error("element {0} is already cracked")]
    AlreadyCracked(usize),
    #[error(transparent)]
    Element(#[from] ElementError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CandidateClass {
    /// Shares an edge with a cracked element.
    Propagation,
    Initiation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackCandidate {
    pub element: usize,
    pub phi: f64,
    pub normal: Vector2<f64>,
    pub class: CandidateClass,
}

/// Largest principal strain and its unit direction for a Voigt strain
/// `(eps_x, eps_y, gamma_xy)`. Isotropic states return `n = (1, 0)`.
pub fn principal_direction(strain: &Vector3<f64>) -> (f64, Vector2<f64>) {
    let (ex, ey, g) = (strain[0], strain[1], strain[2]);
    let mean = 0.5 * (ex + ey);
    let half_diff = 0.5 * (ex - ey);
    let radius = half_diff.hypot(0.5 * g);
    let scale = ex.abs() + ey.abs() + g.abs();
    if radius <= 1e-14 * scale || radius == 0.0 {
        return (mean + radius, Vector2::new(1.0, 0.0));
    }
    let e1 = mean + radius;
    // two candidate eigenvector forms; the longer one is better conditioned
    let a = Vector2::new(0.5 * g, e1 - ex);
    let b = Vector2::new(e1 - ey, 0.5 * g);
    let v = if a.norm_squared() >= b.norm_squared() { a } else { b };
    (e1, oriented_normal(v))
}

/// Screening value `n . (C eps) . n - f_t` along the principal direction.
pub fn rankine(strain: &Vector3<f64>, c: &Matrix3<f64>, tensile_strength: f64) -> (f64, Vector2<f64>) {
    let (_, n) = principal_direction(strain);
    let s = c * strain;
    let normal_stress = n[0] * n[0] * s[0] + n[1] * n[1] * s[1] + 2.0 * n[0] * n[1] * s[2];
    (normal_stress - tensile_strength, n)
}

/// Candidates among the uncracked elements for the nodal displacements `u`.
pub fn screen(
    mesh: &Mesh,
    kernels: &[ElementKernel],
    states: &[ElementState],
    u: &[f64],
    tensile_strength: f64,
) -> Vec<CrackCandidate> {
    let mut out = Vec::new();
    for (e, kernel) in kernels.iter().enumerate() {
        if states[e].is_cracked() {
            continue;
        }
        let strain = kernel.geometry.center_strain(&element_displacements(mesh, e, u));
        let (phi, normal) = rankine(&strain, &kernel.c, tensile_strength);
        if phi > 0.0 && phi.is_finite() {
            let class = if mesh.neighbors(e).iter().any(|&m| states[m].is_cracked()) {
                CandidateClass::Propagation
            } else {
                CandidateClass::Initiation
            };
            out.push(CrackCandidate {
                element: e,
                phi,
                normal,
                class,
            });
        }
    }
    out
}

/// The next element to crack: the strongest propagation candidate, else the
/// strongest initiation candidate. Ties go to the lowest element id.
pub fn select_next(candidates: &[CrackCandidate]) -> Option<usize> {
    candidates
        .iter()
        .filter(|c| c.phi > 0.0)
        .min_by(|a, b| {
            a.class
                .cmp(&b.class)
                .then(b.phi.total_cmp(&a.phi))
                .then(a.element.cmp(&b.element))
        })
        .map(|c| c.element)
}

/// Activates a crack with normal `normal` in `element`. Two zero openings are
/// appended to the global crack vector `z`.
pub fn activate(
    mesh: &Mesh,
    states: &mut [ElementState],
    element: usize,
    normal: Vector2<f64>,
    z: &mut Vec<f64>,
) -> Result<ActiveCrack, CrackingError> {
    if states[element].is_cracked() {
        return Err(CrackingError::AlreadyCracked(element));
    }
    let crack = characteristic_length(mesh, element, normal)?;
    let active = ActiveCrack {
        crack,
        history: None,
        offset: z.len(),
    };
    z.extend([0.0, 0.0]);
    states[element].crack = Some(active);
    Ok(active)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::ElementGeometry;
    use crate::material::{elasticity_matrix, Elasticity};
    use crate::mesh::parse_mesh;
    use nalgebra::{Matrix2, Rotation2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn cand(element: usize, phi: f64, class: CandidateClass) -> CrackCandidate {
        CrackCandidate {
            element,
            phi,
            normal: Vector2::new(1.0, 0.0),
            class,
        }
    }

    #[test]
    fn principal_direction_examples() {
        let (e1, n) = principal_direction(&Vector3::new(1e-3, 0.0, 0.0));
        assert_eq!(e1, 1e-3);
        assert_eq!(n, Vector2::new(1.0, 0.0));
        let (e1, n) = principal_direction(&Vector3::new(0.0, 0.0, 2e-3));
        assert!((e1 - 1e-3).abs() < 1e-18);
        let s = 0.5f64.sqrt();
        assert!((n - Vector2::new(s, s)).norm() < 1e-15);
        let (e1, n) = principal_direction(&Vector3::new(4e-4, 4e-4, 0.0));
        assert_eq!(e1, 4e-4);
        assert_eq!(n, Vector2::new(1.0, 0.0));
        let (_, n) = principal_direction(&Vector3::new(0.0, 1e-3, 0.0));
        assert_eq!(n, Vector2::new(0.0, 1.0));
    }

    #[test]
    fn principal_direction_matches_eigen_solver() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..10_000 {
            let v = Vector3::new(
                rng.random_range(-1e-3..1e-3),
                rng.random_range(-1e-3..1e-3),
                rng.random_range(-2e-3..2e-3),
            );
            let (e1, n) = principal_direction(&v);
            let eig = Matrix2::new(v[0], 0.5 * v[2], 0.5 * v[2], v[1]).symmetric_eigen();
            let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
            let max = eig.eigenvalues[k];
            assert!((e1 - max).abs() <= 1e-12 * max.abs().max(1e-3), "{e1} vs {max}");
            let axis = eig.eigenvectors.column(k);
            let cos = (axis[0] * n[0] + axis[1] * n[1]).abs();
            assert!((cos - 1.0).abs() < 1e-9, "axis mismatch for {v:?}");
            assert!((n.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rankine_boundary_and_linearity() {
        let c = elasticity_matrix(&Elasticity::new(30e3, 0.0).unwrap());
        let ft = 3.0;
        let (phi, _) = rankine(&Vector3::new(ft / 30e3, 0.0, 0.0), &c, ft);
        assert!(phi.abs() < 1e-12);
        let (phi, _) = rankine(&Vector3::new(1.5 * ft / 30e3, 0.0, 0.0), &c, ft);
        assert!((phi - 0.5 * ft).abs() < 1e-12);
    }

    #[test]
    fn phi_is_invariant_under_frame_rotation() {
        let c = elasticity_matrix(&Elasticity::new(30e3, 0.2).unwrap());
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let v = Vector3::new(
                rng.random_range(-1e-3..1e-3),
                rng.random_range(-1e-3..1e-3),
                rng.random_range(-2e-3..2e-3),
            );
            let r = Rotation2::new(rng.random_range(0.0..std::f64::consts::TAU));
            let t = Matrix2::new(v[0], 0.5 * v[2], 0.5 * v[2], v[1]);
            let tr = r.matrix() * t * r.matrix().transpose();
            let rotated = Vector3::new(tr[(0, 0)], tr[(1, 1)], 2.0 * tr[(0, 1)]);
            let (a, _) = rankine(&v, &c, 3.0);
            let (b, _) = rankine(&rotated, &c, 3.0);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(3.0));
        }
    }

    #[test]
    fn propagation_is_checked_first() {
        let c = [
            cand(4, 5.0, CandidateClass::Initiation),
            cand(9, 0.1, CandidateClass::Propagation),
        ];
        assert_eq!(select_next(&c), Some(9));
        assert_eq!(select_next(&[]), None);
        let ties = [
            cand(7, 1.0, CandidateClass::Initiation),
            cand(3, 1.0, CandidateClass::Initiation),
        ];
        assert_eq!(select_next(&ties), Some(3));
        let best = [
            cand(1, 0.2, CandidateClass::Initiation),
            cand(2, 0.7, CandidateClass::Initiation),
        ];
        assert_eq!(select_next(&best), Some(2));
    }

    proptest! {
        #[test]
        fn selected_candidate_is_strictly_positive(
            phis in proptest::collection::vec((-2.0f64..2.0, any::<bool>()), 0..12)
        ) {
            let list: Vec<_> = phis
                .iter()
                .enumerate()
                .map(|(i, &(phi, prop))| {
                    cand(i, phi, if prop { CandidateClass::Propagation } else { CandidateClass::Initiation })
                })
                .collect();
            if let Some(id) = select_next(&list) {
                let chosen = list[id];
                prop_assert!(chosen.phi > 0.0);
                for other in &list {
                    if other.phi > 0.0 && other.class == chosen.class {
                        prop_assert!(other.phi <= chosen.phi);
                    }
                    if other.phi > 0.0 {
                        prop_assert!(other.class >= chosen.class);
                    }
                }
            } else {
                prop_assert!(list.iter().all(|c| c.phi <= 0.0));
            }
        }
    }

    const TWO_Q8: &str = "\
node 0 0 0
node 1 1 0
node 2 2 0
node 3 0 1
node 4 1 1
node 5 2 1
node 6 0.5 0
node 7 1.5 0
node 8 0.5 1
node 9 1.5 1
node 10 0 0.5
node 11 1 0.5
node 12 2 0.5
element 0 q8 0 1 4 3 6 11 8 10
element 1 q8 1 2 5 4 7 12 9 11
nodeset right 2 5 12
nodeset left 0 3 10
fix left x
load right 1 0
";

    #[test]
    fn screening_classes_follow_adjacency() {
        let (mesh, _) = parse_mesh(TWO_Q8).unwrap();
        let c = elasticity_matrix(&Elasticity::new(30e3, 0.0).unwrap());
        let kernels: Vec<_> = (0..2)
            .map(|e| ElementKernel::new(ElementGeometry::new(&mesh, e).unwrap(), c))
            .collect();
        let u: Vec<f64> = mesh.nodes.iter().flat_map(|n| [2e-4 * n.x, 0.0]).collect();
        let mut states = vec![ElementState::default(); 2];
        let found = screen(&mesh, &kernels, &states, &u, 3.0);
        assert_eq!(found.len(), 2);
        assert!(found.iter().all(|c| c.class == CandidateClass::Initiation));
        assert!((found[0].phi - 3.0).abs() < 1e-9);

        let mut z = Vec::new();
        let active = activate(&mesh, &mut states, 0, found[0].normal, &mut z).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
        assert_eq!(active.offset, 0);
        assert_eq!(2 * mesh.n_nodes() + z.len(), 28);
        assert_eq!(
            activate(&mesh, &mut states, 0, found[0].normal, &mut z),
            Err(CrackingError::AlreadyCracked(0))
        );
        let found = screen(&mesh, &kernels, &states, &u, 3.0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].element, 1);
        assert_eq!(found[0].class, CandidateClass::Propagation);
    }

    #[test]
    fn activation_freezes_the_normal() {
        let (mesh, _) = parse_mesh(TWO_Q8).unwrap();
        let mut states = vec![ElementState::default(); 2];
        let mut z = Vec::new();
        let s = 0.5f64.sqrt();
        activate(&mesh, &mut states, 1, Vector2::new(-s, -s), &mut z).unwrap();
        let crack = states[1].crack.unwrap().crack;
        assert!((crack.normal - Vector2::new(s, s)).norm() < 1e-15);
        assert!((crack.length - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }
}
