//! Element-level machinery of the cracking elements: strain-displacement
//! matrices, the enhanced crack-opening matrix, characteristic length, element
//! stiffness blocks and internal residuals.
//!
//! A cracked element owns two extra unknowns `zeta = (zeta_n, zeta_t)`. The
//! elastic strain is `eps_bar = B U + B_zeta zeta`, where `B_zeta` smears the
//! opening over the characteristic length `l_c = V / A`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix3x2, Matrix3xX, Vector2, Vector3};
use thiserror::Error;

use crate::material::CrackHistory;
use crate::mesh::{jacobian, polygon_area_centroid, quadrature, shape_values, ElementKind, Mesh};

#[derive(Debug, Error, PartialEq)]
pub enum ElementError {
    #[error("element {0}: singular or inverted Jacobian")]
    InvertedElement(usize),
    #[error("element {0}: equivalent crack chord is degenerate")]
    DegenerateChord(usize),
}

/// Strain-displacement matrix at `xi` (Voigt rows `eps_x, eps_y, gamma_xy`)
/// and the Jacobian determinant there.
pub fn b_matrix(mesh: &Mesh, element: usize, xi: [f64; 2]) -> Result<(Matrix3xX<f64>, f64), ElementError> {
    let topo = &mesh.elements[element];
    let coords = mesh.element_coords(element);
    let shape = shape_values(topo.kind, xi);
    let j = jacobian(&coords, &shape.gradients);
    let det = j.determinant();
    if !(det > 0.0) {
        return Err(ElementError::InvertedElement(element));
    }
    let inv_t = j
        .try_inverse()
        .ok_or(ElementError::InvertedElement(element))?
        .transpose();
    let n = topo.kind.n_nodes();
    let mut b = Matrix3xX::zeros(2 * n);
    for (i, g) in shape.gradients.iter().enumerate() {
        let dx = inv_t[(0, 0)] * g[0] + inv_t[(0, 1)] * g[1];
        let dy = inv_t[(1, 0)] * g[0] + inv_t[(1, 1)] * g[1];
        b[(0, 2 * i)] = dx;
        b[(1, 2 * i + 1)] = dy;
        b[(2, 2 * i)] = dy;
        b[(2, 2 * i + 1)] = dx;
    }
    Ok((b, det))
}

/// Element displacement vector gathered from the global nodal vector.
pub fn element_displacements(mesh: &Mesh, element: usize, u: &[f64]) -> DVector<f64> {
    let nodes = &mesh.elements[element].nodes;
    DVector::from_iterator(
        2 * nodes.len(),
        nodes.iter().flat_map(|&n| [u[2 * n], u[2 * n + 1]]),
    )
}

/// Strain-displacement matrix and integration weight (`det J * w * t`).
#[derive(Debug, Clone)]
pub struct IntegrationPoint {
    pub b: Matrix3xX<f64>,
    pub weight: f64,
}

/// Precomputed geometry of one element.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub id: usize,
    pub kind: ElementKind,
    pub thickness: f64,
    pub points: Vec<IntegrationPoint>,
    /// `B` at the center point.
    pub center_b: Matrix3xX<f64>,
    /// Integrated volume `sum(w det J t)`.
    pub volume: f64,
    /// Centroid of the corner polygon.
    pub centroid: [f64; 2],
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, element: usize) -> Result<Self, ElementError> {
        let topo = &mesh.elements[element];
        let rule = quadrature(topo.kind);
        let mut points = Vec::with_capacity(rule.points.len());
        for q in &rule.points {
            let (b, det) = b_matrix(mesh, element, q.xi)?;
            points.push(IntegrationPoint {
                b,
                weight: det * q.weight * topo.thickness,
            });
        }
        let (center_b, _) = b_matrix(mesh, element, rule.center)?;
        let volume = points.iter().map(|p| p.weight).sum();
        let (_, centroid) = polygon_area_centroid(&mesh.corner_polygon(element));
        Ok(Self {
            id: element,
            kind: topo.kind,
            thickness: topo.thickness,
            points,
            center_b,
            volume,
            centroid,
        })
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.kind.n_nodes()
    }

    /// Total strain at the center point.
    pub fn center_strain(&self, u: &DVector<f64>) -> Vector3<f64> {
        &self.center_b * u
    }
}

/// Frame and size of the equivalent crack of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementCrack {
    pub normal: Vector2<f64>,
    pub tangent: Vector2<f64>,
    /// `l_c = V / A`
    pub length: f64,
    /// Equivalent crack area `A` (chord length times thickness).
    pub area: f64,
    /// Element volume `V`.
    pub volume: f64,
}

impl ElementCrack {
    /// `V / l_c`, which equals the crack area `A`.
    pub fn area_factor(&self) -> f64 {
        self.volume / self.length
    }
}

/// Applies the sign convention `n_x > 0`, or `n_y > 0` when `n_x = 0`.
pub fn oriented_normal(n: Vector2<f64>) -> Vector2<f64> {
    let n = n.normalize();
    if n[0] > 0.0 || (n[0] == 0.0 && n[1] > 0.0) {
        n
    } else {
        -n
    }
}

/// Tangent `t = (-n_y, n_x)`.
pub fn tangent_of(n: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-n[1], n[0])
}

/// Enhanced-strain matrix mapping `(zeta_n, zeta_t)` to Voigt strain.
pub fn b_zeta(crack: &ElementCrack) -> Matrix3x2<f64> {
    let n = crack.normal;
    let t = crack.tangent;
    Matrix3x2::new(
        n[0] * n[0],
        n[0] * t[0],
        n[1] * n[1],
        n[1] * t[1],
        2.0 * n[0] * n[1],
        n[0] * t[1] + n[1] * t[0],
    ) * (-1.0 / crack.length)
}

/// Length of the chord cut from the convex polygon by the line through
/// `anchor` with direction `dir`.
fn chord_length(poly: &[[f64; 2]], anchor: [f64; 2], dir: Vector2<f64>) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let scale = poly
        .iter()
        .map(|p| (p[0] - anchor[0]).abs() + (p[1] - anchor[1]).abs())
        .fold(0.0, f64::max);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let e = Vector2::new(b[0] - a[0], b[1] - a[1]);
        let w = Vector2::new(a[0] - anchor[0], a[1] - anchor[1]);
        // anchor + s dir = a + u e
        let denom = dir[0] * (-e[1]) - dir[1] * (-e[0]);
        if denom.abs() <= 1e-14 * e.norm() {
            // edge parallel to the line; collinear edges contribute endpoints
            if (w[0] * dir[1] - w[1] * dir[0]).abs() <= 1e-12 * scale {
                for p in [a, b] {
                    let s = (p[0] - anchor[0]) * dir[0] + (p[1] - anchor[1]) * dir[1];
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
            continue;
        }
        let s = (w[0] * (-e[1]) - w[1] * (-e[0])) / denom;
        let u = (dir[0] * w[1] - dir[1] * w[0]) / denom;
        if (-1e-12..=1.0 + 1e-12).contains(&u) {
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    if hi > lo {
        hi - lo
    } else {
        0.0
    }
}

/// Equivalent crack of an element for the unit normal `n`.
///
/// The crack line has direction `t` and passes through the centroid for Q8.
/// For T6 it passes through the midpoint of the edge whose midpoint lies
/// closest to the centroid line.
pub fn characteristic_length(mesh: &Mesh, element: usize, n: Vector2<f64>) -> Result<ElementCrack, ElementError> {
    let normal = oriented_normal(n);
    let tangent = tangent_of(normal);
    let topo = &mesh.elements[element];
    let poly = mesh.corner_polygon(element);
    let (area2d, centroid) = polygon_area_centroid(&poly);
    let anchor = match topo.kind {
        ElementKind::Q8 => centroid,
        ElementKind::T6 => {
            let mut best = (f64::INFINITY, centroid);
            for i in 0..poly.len() {
                let a = poly[i];
                let b = poly[(i + 1) % poly.len()];
                let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let dist = ((m[0] - centroid[0]) * tangent[1] - (m[1] - centroid[1]) * tangent[0]).abs();
                if dist < best.0 * (1.0 - 1e-12) {
                    best = (dist, m);
                }
            }
            best.1
        }
    };
    let chord = chord_length(&poly, anchor, tangent);
    let volume = area2d * topo.thickness;
    let area = chord * topo.thickness;
    if !(area >= 1e-12 * volume.sqrt()) || area == 0.0 {
        return Err(ElementError::DegenerateChord(element));
    }
    Ok(ElementCrack {
        normal,
        tangent,
        length: volume / area,
        area,
        volume,
    })
}

/// Active crack carried by an element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveCrack {
    pub crack: ElementCrack,
    pub history: Option<CrackHistory>,
    /// Offset of `(zeta_n, zeta_t)` in the global crack-opening vector.
    pub offset: usize,
}

/// Solver-owned per-element state. The crack frame is frozen at activation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementState {
    pub crack: Option<ActiveCrack>,
}

impl ElementState {
    pub fn is_cracked(&self) -> bool {
        self.crack.is_some()
    }
}

/// How the residual of a cracked element is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualForm {
    /// Full quadrature of `B^T C (B U + B_zeta zeta)`; exact derivative is `K_sym`.
    #[default]
    Consistent,
    /// Center representation: the elastic strain is evaluated once at the
    /// center point and the nodal force is `int(B^T) C eps_bar`.
    CenterPoint,
}

/// Element geometry combined with its elasticity, with the constant blocks
/// that do not depend on the crack state.
#[derive(Debug, Clone)]
pub struct ElementKernel {
    pub geometry: ElementGeometry,
    pub c: Matrix3<f64>,
    /// `int B^T C B`
    pub k_uu: DMatrix<f64>,
    /// `int B^T dV C`, shape `2n x 3`.
    pub bt_c: DMatrix<f64>,
}

impl ElementKernel {
    pub fn new(geometry: ElementGeometry, c: Matrix3<f64>) -> Self {
        let nd = geometry.n_dofs();
        let mut k_uu = DMatrix::zeros(nd, nd);
        let mut bt = DMatrix::zeros(nd, 3);
        for p in &geometry.points {
            let b = DMatrix::from_column_slice(3, nd, p.b.as_slice());
            let cb = DMatrix::from_column_slice(3, 3, c.as_slice()) * &b;
            k_uu += b.transpose() * cb * p.weight;
            bt += b.transpose() * p.weight;
        }
        let bt_c = bt * DMatrix::from_column_slice(3, 3, c.as_slice());
        Self {
            geometry,
            c,
            k_uu,
            bt_c,
        }
    }

    fn center_b_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, self.geometry.n_dofs(), self.geometry.center_b.as_slice())
    }
}

fn dyn3x2(m: &Matrix3x2<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 2, m.as_slice())
}

fn dyn3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

/// Symmetric tangent `K_sym` and the unsymmetric center-representation `K`.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    pub k_sym: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

/// Element stiffness blocks. For a cracked element `crack` carries the crack
/// frame and the current cohesive tangent `D`; both matrices then have
/// `2n + 2` rows with the crack unknowns last.
pub fn element_matrices(kernel: &ElementKernel, crack: Option<(&ElementCrack, &Matrix2<f64>)>) -> ElementMatrices {
    let nd = kernel.geometry.n_dofs();
    let Some((crack, d)) = crack else {
        return ElementMatrices {
            k_sym: kernel.k_uu.clone(),
            k: kernel.k_uu.clone(),
        };
    };
    let c = dyn3(&kernel.c);
    let bz = dyn3x2(&b_zeta(crack));
    let v = crack.volume;
    let k_uz = &kernel.bt_c * &bz;
    let k_zz_elastic = bz.transpose() * &c * &bz * v;
    let d_block = DMatrix::from_column_slice(2, 2, d.as_slice()) * crack.area_factor();

    let mut k_sym = DMatrix::zeros(nd + 2, nd + 2);
    k_sym.view_mut((0, 0), (nd, nd)).copy_from(&kernel.k_uu);
    k_sym.view_mut((0, nd), (nd, 2)).copy_from(&k_uz);
    k_sym.view_mut((nd, 0), (2, nd)).copy_from(&k_uz.transpose());
    k_sym
        .view_mut((nd, nd), (2, 2))
        .copy_from(&(&k_zz_elastic + &d_block));

    let b1 = kernel.center_b_dyn();
    let mut k = DMatrix::zeros(nd + 2, nd + 2);
    k.view_mut((0, 0), (nd, nd)).copy_from(&(&kernel.bt_c * &b1));
    k.view_mut((0, nd), (nd, 2)).copy_from(&k_uz);
    k.view_mut((nd, 0), (2, nd))
        .copy_from(&(bz.transpose() * &c * &b1 * v));
    k.view_mut((nd, nd), (2, 2)).copy_from(&k_zz_elastic);
    ElementMatrices { k_sym, k }
}

/// Internal nodal forces and, for cracked elements, the crack residual
/// `-V B_zeta^T sigma - (V / l_c) T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementResidual {
    pub nodal: DVector<f64>,
    pub crack: Option<Vector2<f64>>,
}

/// Internal residual of one element. `crack` carries the frame and the
/// traction `T(zeta)` evaluated by the caller.
pub fn internal_residual(
    kernel: &ElementKernel,
    crack: Option<(&ElementCrack, Vector2<f64>)>,
    u: &DVector<f64>,
    zeta: Vector2<f64>,
    form: ResidualForm,
) -> ElementResidual {
    let Some((crack, traction)) = crack else {
        return ElementResidual {
            nodal: &kernel.k_uu * u,
            crack: None,
        };
    };
    let bz = b_zeta(crack);
    let enhanced = bz * zeta;
    let (nodal, mean_stress_volume) = match form {
        ResidualForm::Consistent => {
            // int sigma dV = (int B^T dV C)^T U + V C B_zeta zeta
            let stress_integral = kernel.bt_c.transpose() * u;
            let stress_integral = Vector3::new(stress_integral[0], stress_integral[1], stress_integral[2])
                + kernel.c * enhanced * crack.volume;
            let enhanced_dyn = DVector::from_column_slice(enhanced.as_slice());
            (&kernel.k_uu * u + &kernel.bt_c * enhanced_dyn, stress_integral)
        }
        ResidualForm::CenterPoint => {
            let strain = kernel.geometry.center_strain(u) + enhanced;
            let sigma = kernel.c * strain;
            let nodal = &kernel.bt_c * DVector::from_column_slice(strain.as_slice());
            (nodal, sigma * crack.volume)
        }
    };
    let crack_residual = -(bz.transpose() * mean_stress_volume) - traction * crack.area_factor();
    ElementResidual {
        nodal,
        crack: Some(crack_residual),
    }
}

/// Elastic strain energy `1/2 int eps_bar^T C eps_bar`.
pub fn strain_energy(kernel: &ElementKernel, crack: Option<&ElementCrack>, u: &DVector<f64>, zeta: Vector2<f64>) -> f64 {
    let enhanced = crack.map(|c| b_zeta(c) * zeta).unwrap_or_else(Vector3::zeros);
    kernel
        .geometry
        .points
        .iter()
        .map(|p| {
            let eps = &p.b * u + enhanced;
            0.5 * eps.dot(&(kernel.c * eps)) * p.weight
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{elasticity_matrix, tangent, traction, CohesiveLaw, Elasticity};
    use crate::mesh::{parse_mesh, ElementTopology, Node};
    use std::collections::BTreeMap;

    fn rect_q8(a: f64, b: f64) -> Mesh {
        let xy = [
            [0.0, 0.0],
            [a, 0.0],
            [a, b],
            [0.0, b],
            [a / 2.0, 0.0],
            [a, b / 2.0],
            [a / 2.0, b],
            [0.0, b / 2.0],
        ];
        Mesh::new(
            xy.iter()
                .enumerate()
                .map(|(id, p)| Node { id, x: p[0], y: p[1] })
                .collect(),
            vec![ElementTopology {
                id: 0,
                kind: ElementKind::Q8,
                nodes: (0..8).collect(),
                thickness: 1.0,
            }],
            BTreeMap::new(),
        )
        .unwrap()
    }

    fn field(mesh: &Mesh, f: impl Fn(f64, f64) -> [f64; 2]) -> DVector<f64> {
        let mut u = DVector::zeros(2 * mesh.n_nodes());
        for n in &mesh.nodes {
            let v = f(n.x, n.y);
            u[2 * n.id] = v[0];
            u[2 * n.id + 1] = v[1];
        }
        u
    }

    fn kernel(mesh: &Mesh) -> ElementKernel {
        let c = elasticity_matrix(&Elasticity::new(30e3, 0.2).unwrap());
        ElementKernel::new(ElementGeometry::new(mesh, 0).unwrap(), c)
    }

    #[test]
    fn rigid_modes_give_zero_strain() {
        let mesh = rect_q8(1.3, 0.7);
        let translation = field(&mesh, |_, _| [0.2, -0.4]);
        let rotation = field(&mesh, |x, y| [-0.01 * y, 0.01 * x]);
        for xi in [[0.3, -0.2], [0.0, 0.0], [-0.9, 0.8]] {
            let (b, _) = b_matrix(&mesh, 0, xi).unwrap();
            assert!((&b * &translation).norm() < 1e-14);
            assert!((&b * &rotation).norm() < 1e-14);
        }
    }

    #[test]
    fn linear_field_is_reproduced() {
        let mesh = rect_q8(1.0, 1.0);
        let u = field(&mesh, |x, _| [x, 0.0]);
        for xi in [[0.3, -0.2], [0.0, 0.0], [-0.9, 0.8]] {
            let (b, _) = b_matrix(&mesh, 0, xi).unwrap();
            let eps = &b * &u;
            assert!((eps - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn b_zeta_hand_values() {
        let c1 = ElementCrack {
            normal: Vector2::new(1.0, 0.0),
            tangent: Vector2::new(0.0, 1.0),
            length: 1.0,
            area: 1.0,
            volume: 1.0,
        };
        assert_eq!(b_zeta(&c1), Matrix3x2::new(-1.0, 0.0, 0.0, 0.0, 0.0, -1.0));
        let c2 = ElementCrack {
            normal: Vector2::new(0.0, 1.0),
            tangent: Vector2::new(-1.0, 0.0),
            length: 2.0,
            ..c1
        };
        assert_eq!(b_zeta(&c2), Matrix3x2::new(0.0, 0.0, -0.5, 0.0, 0.0, 0.5));
        let c3 = ElementCrack { length: 4.0, ..c2 };
        assert_eq!(b_zeta(&c3) * 2.0, b_zeta(&c2));
    }

    #[test]
    fn characteristic_length_of_rectangles() {
        let sq = rect_q8(2.0, 2.0);
        let c = characteristic_length(&sq, 0, Vector2::new(1.0, 0.0)).unwrap();
        assert!((c.area - 2.0).abs() < 1e-14);
        assert!((c.volume - 4.0).abs() < 1e-14);
        assert!((c.length - 2.0).abs() < 1e-14);
        let rect = rect_q8(3.0, 1.5);
        let c = characteristic_length(&rect, 0, Vector2::new(1.0, 0.0)).unwrap();
        assert!((c.length - 3.0).abs() < 1e-14);
        let s = 0.5f64.sqrt();
        let c = characteristic_length(&sq, 0, Vector2::new(s, s)).unwrap();
        assert!((c.area - 2.0 * 2.0f64.sqrt()).abs() < 1e-13);
        assert!((c.length - 2.0 / 2.0f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn normal_sign_convention() {
        let n = oriented_normal(Vector2::new(-0.6, 0.8));
        assert!((n - Vector2::new(0.6, -0.8)).norm() < 1e-15);
        assert_eq!(oriented_normal(Vector2::new(0.0, -1.0)), Vector2::new(0.0, 1.0));
        assert_eq!(tangent_of(Vector2::new(0.0, 1.0)), Vector2::new(-1.0, 0.0));
    }

    #[test]
    fn t6_chord_passes_through_an_edge_midpoint() {
        let text = "\
node 0 0 0
node 1 2 0
node 2 0 2
node 3 1 0
node 4 1 1
node 5 0 1
element 0 t6 0 1 2 3 4 5
nodeset a 1
load a 1 0
";
        let (mesh, _) = parse_mesh(text).unwrap();
        // vertical crack line; edge 2-0 (x = 0) is parallel, edge 0-1 midpoint (1,0) lies 1/3 away
        let c = characteristic_length(&mesh, 0, Vector2::new(1.0, 0.0)).unwrap();
        // line x = 1 from (1,0) to (1,1)
        assert!((c.area - 1.0).abs() < 1e-14);
        assert!((c.volume - 2.0).abs() < 1e-14);
        assert!((c.length - 2.0).abs() < 1e-14);
    }

    #[test]
    fn uncracked_stiffness_has_three_rigid_modes() {
        let mesh = rect_q8(1.0, 1.0);
        let m = element_matrices(&kernel(&mesh), None);
        assert_eq!(m.k_sym, m.k);
        let eig = m.k_sym.clone().symmetric_eigenvalues();
        let max = eig.amax();
        let zeros = eig.iter().filter(|v| v.abs() < 1e-10 * max).count();
        assert_eq!(zeros, 3);
        assert!(eig.iter().all(|v| *v > -1e-10 * max));
    }

    #[test]
    fn cracked_stiffness_is_positive_definite_in_the_rise() {
        let mesh = rect_q8(1.0, 1.0);
        let k = kernel(&mesh);
        let crack = characteristic_length(&mesh, 0, Vector2::new(1.0, 0.0)).unwrap();
        let law = CohesiveLaw::new(3.0, 0.1).unwrap();
        let d = tangent(Vector2::new(1e-5, 0.0), &law, None);
        let m = element_matrices(&k, Some((&crack, &d)));
        assert!((&m.k_sym - m.k_sym.transpose()).amax() <= 1e-12 * m.k_sym.amax());
        let eig = m.k_sym.clone().symmetric_eigenvalues();
        let max = eig.amax();
        assert_eq!(eig.iter().filter(|v| v.abs() < 1e-10 * max).count(), 3);
        assert!(eig.iter().all(|v| *v > -1e-10 * max));
    }

    #[test]
    fn center_and_full_integration_agree_on_constant_strain() {
        let mesh = rect_q8(1.2, 0.8);
        let k = kernel(&mesh);
        let crack = characteristic_length(&mesh, 0, Vector2::new(0.8, 0.6)).unwrap();
        let d = Matrix2::zeros();
        let m = element_matrices(&k, Some((&crack, &d)));
        let u = field(&mesh, |x, y| [1e-3 * x + 2e-4 * y, -3e-4 * x + 5e-4 * y]);
        let mut x = DVector::zeros(18);
        x.rows_mut(0, 16).copy_from(&u);
        x[16] = 2e-4;
        x[17] = -1e-4;
        let a = &m.k * &x;
        let b = &m.k_sym * &x;
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn unloaded_element_has_zero_residual() {
        let mesh = rect_q8(1.0, 1.0);
        let k = kernel(&mesh);
        let crack = characteristic_length(&mesh, 0, Vector2::new(1.0, 0.0)).unwrap();
        for form in [ResidualForm::Consistent, ResidualForm::CenterPoint] {
            let r = internal_residual(&k, Some((&crack, Vector2::zeros())), &DVector::zeros(16), Vector2::zeros(), form);
            assert_eq!(r.nodal.amax(), 0.0);
            assert_eq!(r.crack.unwrap(), Vector2::zeros());
        }
    }

    #[test]
    fn uniform_stretch_gives_consistent_edge_loads() {
        // u_x = eps x, u_y = -nu eps y: uniaxial stress sigma_x = E eps on a unit square
        let mesh = rect_q8(1.0, 1.0);
        let k = kernel(&mesh);
        let eps = 1e-4;
        let u = field(&mesh, |x, y| [eps * x, -0.2 * eps * y]);
        let r = internal_residual(&k, None, &u, Vector2::zeros(), ResidualForm::Consistent);
        let sigma = 30e3 * eps;
        // right edge: corners 1/6, mid-side 2/3 of the edge resultant
        assert!((r.nodal[2] - sigma / 6.0).abs() < 1e-12);
        assert!((r.nodal[4] - sigma / 6.0).abs() < 1e-12);
        assert!((r.nodal[10] - 2.0 * sigma / 3.0).abs() < 1e-12);
        assert!((r.nodal[0] + sigma / 6.0).abs() < 1e-12);
        assert!((r.nodal[14] + 2.0 * sigma / 3.0).abs() < 1e-12);
        for i in (1..16).step_by(2) {
            assert!(r.nodal[i].abs() < 1e-12);
        }
    }

    #[test]
    fn crack_residual_vanishes_at_scalar_equilibrium() {
        let mesh = rect_q8(1.0, 1.0);
        let c = elasticity_matrix(&Elasticity::new(30e3, 0.0).unwrap());
        let k = ElementKernel::new(ElementGeometry::new(&mesh, 0).unwrap(), c);
        let crack = characteristic_length(&mesh, 0, Vector2::new(1.0, 0.0)).unwrap();
        let law = CohesiveLaw::new(3.0, 0.1).unwrap();
        let eps = 5e-3;
        let u = field(&mesh, |x, _| [eps * x, 0.0]);
        // bisection oracle on E (eps - zeta / l_c) = T(zeta)
        let g = |z: f64| 30e3 * (eps - z / crack.length) - law.envelope(z);
        let (mut lo, mut hi) = (law.threshold_opening(), eps * crack.length);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let zeta = Vector2::new(0.5 * (lo + hi), 0.0);
        let t = traction(zeta, &law, None).traction;
        for form in [ResidualForm::Consistent, ResidualForm::CenterPoint] {
            let r = internal_residual(&k, Some((&crack, t)), &u, zeta, form);
            assert!(r.crack.unwrap().norm() < 1e-9, "{form:?}: {:?}", r.crack);
        }
    }

    #[test]
    fn consistent_residual_derivative_is_the_symmetric_tangent() {
        let mesh = rect_q8(1.1, 0.9);
        let k = kernel(&mesh);
        let crack = characteristic_length(&mesh, 0, Vector2::new(0.9, 0.2)).unwrap();
        let law = CohesiveLaw::new(3.0, 0.1).unwrap();
        let u0 = field(&mesh, |x, y| [2e-4 * x + 1e-4 * x * y, -1e-4 * y + 3e-5 * x]);
        let z0 = Vector2::new(4e-3, 1e-3);
        let eval = |u: &DVector<f64>, z: Vector2<f64>| {
            let t = traction(z, &law, None).traction;
            let r = internal_residual(&k, Some((&crack, t)), u, z, ResidualForm::Consistent);
            let mut out = DVector::zeros(18);
            out.rows_mut(0, 16).copy_from(&r.nodal);
            let c = r.crack.unwrap();
            out[16] = -c[0];
            out[17] = -c[1];
            out
        };
        let d = tangent(z0, &law, None);
        let m = element_matrices(&k, Some((&crack, &d)));
        let h = 1e-9;
        for j in 0..18 {
            let (mut up, mut um) = (u0.clone(), u0.clone());
            let (mut zp, mut zm) = (z0, z0);
            if j < 16 {
                up[j] += h;
                um[j] -= h;
            } else {
                zp[j - 16] += h;
                zm[j - 16] -= h;
            }
            let col = (eval(&up, zp) - eval(&um, zm)) / (2.0 * h);
            let err = (&col - m.k_sym.column(j)).amax();
            assert!(err < 1e-5 * m.k_sym.amax(), "column {j}: {err}");
        }
    }

    #[test]
    fn elastic_plus_enhanced_strain_reconstructs_total_strain() {
        let mesh = rect_q8(1.0, 2.0);
        let geom = ElementGeometry::new(&mesh, 0).unwrap();
        let crack = characteristic_length(&mesh, 0, Vector2::new(0.3, 0.7)).unwrap();
        let u = field(&mesh, |x, y| [1e-3 * x * y, 2e-4 * x - 1e-4 * y * y]);
        let zeta = Vector2::new(3e-4, -2e-4);
        let total = geom.center_strain(&u);
        let elastic = total + b_zeta(&crack) * zeta;
        let enhanced = -b_zeta(&crack) * zeta;
        assert!((elastic + enhanced - total).norm() < 1e-18);
    }
}
