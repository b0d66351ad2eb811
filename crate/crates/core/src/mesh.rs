//! Mesh and boundary-condition ingestion for 8-node serendipity quadrilaterals
//! (Q8) and 6-node quadratic triangles (T6).
//!
//! The native text format is line oriented, `#` starts a comment:
//!
//! ```text
//! thickness 1.0
//! node 0 0.0 0.0
//! element 0 q8 0 1 2 3 4 5 6 7
//! nodeset left 0 3 7
//! fix left x
//! load right 10.0 0.0
//! ```
//!
//! Node lists are corner nodes first (counter-clockwise), then the mid-side
//! nodes in edge order. `thickness` applies to the elements declared after it.
//! A `load` row is split equally among the nodes of its set.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use nalgebra::Matrix2;
use thiserror::Error;

/// Relative tolerance for mid-side nodes lying on the straight edge.
const MIDPOINT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate node id {0}")]
    DuplicateNode(usize),
    #[error("duplicate element id {0}")]
    DuplicateElement(usize),
    #[error("{what} ids must be dense 0..{count}, missing id {missing}")]
    SparseIds {
        what: &'static str,
        count: usize,
        missing: usize,
    },
    #[error("element {element}: unknown node {node}")]
    UnknownNode { element: usize, node: usize },
    #[error("node set `{set}`: unknown node {node}")]
    UnknownSetNode { set: String, node: usize },
    #[error("line {line}: unknown node set `{set}`")]
    UnknownNodeSet { line: usize, set: String },
    #[error("element {0}: node ids are not distinct")]
    RepeatedNode(usize),
    #[error("element {0}: inverted or degenerate (non-positive Jacobian)")]
    InvertedElement(usize),
    #[error("element {0}: mid-side node is off the straight edge")]
    CurvedEdge(usize),
    #[error("mesh has no elements")]
    Empty,
    #[error("reference load vector is zero")]
    ZeroLoad,
}

/// Element family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Q8,
    T6,
}

impl ElementKind {
    pub fn n_nodes(self) -> usize {
        match self {
            ElementKind::Q8 => 8,
            ElementKind::T6 => 6,
        }
    }

    pub fn n_corners(self) -> usize {
        match self {
            ElementKind::Q8 => 4,
            ElementKind::T6 => 3,
        }
    }

    /// Local edges as `(corner a, corner b, mid-side node)`.
    pub fn edges(self) -> &'static [(usize, usize, usize)] {
        match self {
            ElementKind::Q8 => &[(0, 1, 4), (1, 2, 5), (2, 3, 6), (3, 0, 7)],
            ElementKind::T6 => &[(0, 1, 3), (1, 2, 4), (2, 0, 5)],
        }
    }

    /// Parametric coordinates of the element nodes.
    pub fn reference_nodes(self) -> &'static [[f64; 2]] {
        match self {
            ElementKind::Q8 => &[
                [-1.0, -1.0],
                [1.0, -1.0],
                [1.0, 1.0],
                [-1.0, 1.0],
                [0.0, -1.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [-1.0, 0.0],
            ],
            ElementKind::T6 => &[
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [0.5, 0.0],
                [0.5, 0.5],
                [0.0, 0.5],
            ],
        }
    }

    /// Parametric center used for the center representation of the strain.
    pub fn center(self) -> [f64; 2] {
        match self {
            ElementKind::Q8 => [0.0, 0.0],
            ElementKind::T6 => [1.0 / 3.0, 1.0 / 3.0],
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementKind::Q8 => write!(f, "q8"),
            ElementKind::T6 => write!(f, "t6"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementTopology {
    pub id: usize,
    pub kind: ElementKind,
    pub nodes: Vec<usize>,
    pub thickness: f64,
}

impl ElementTopology {
    pub fn corners(&self) -> &[usize] {
        &self.nodes[..self.kind.n_corners()]
    }
}

/// In-plane displacement direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    X,
    Y,
}

impl Direction {
    pub fn index(self) -> usize {
        match self {
            Direction::X => 0,
            Direction::Y => 1,
        }
    }
}

/// Homogeneous Dirichlet constraint on one nodal degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dirichlet {
    pub node: usize,
    pub direction: Direction,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<Dirichlet>,
    /// Nodal reference forces `f`, keyed by node id.
    pub reference_load: BTreeMap<usize, [f64; 2]>,
}

impl BoundaryConditions {
    /// Dense reference load vector, two entries per node.
    pub fn load_vector(&self, n_nodes: usize) -> Vec<f64> {
        let mut f = vec![0.0; 2 * n_nodes];
        for (&node, force) in &self.reference_load {
            f[2 * node] += force[0];
            f[2 * node + 1] += force[1];
        }
        f
    }

    /// Per-DOF constraint mask, two entries per node.
    pub fn constrained_mask(&self, n_nodes: usize) -> Vec<bool> {
        let mut mask = vec![false; 2 * n_nodes];
        for d in &self.dirichlet {
            mask[2 * d.node + d.direction.index()] = true;
        }
        mask
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<ElementTopology>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    adjacency: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds a validated mesh. Ids must already be dense and sorted.
    pub fn new(
        nodes: Vec<Node>,
        elements: Vec<ElementTopology>,
        node_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, MeshError> {
        if elements.is_empty() {
            return Err(MeshError::Empty);
        }
        check_dense("node", nodes.iter().map(|n| n.id), nodes.len())?;
        check_dense("element", elements.iter().map(|e| e.id), elements.len())?;
        for (set, ids) in &node_sets {
            if let Some(&node) = ids.iter().find(|&&id| id >= nodes.len()) {
                return Err(MeshError::UnknownSetNode {
                    set: set.clone(),
                    node,
                });
            }
        }
        let mut mesh = Mesh {
            nodes,
            elements,
            node_sets,
            adjacency: Vec::new(),
        };
        for element in &mesh.elements {
            mesh.validate_element(element)?;
        }
        mesh.adjacency = mesh.build_adjacency();
        Ok(mesh)
    }

    fn validate_element(&self, e: &ElementTopology) -> Result<(), MeshError> {
        if e.nodes.len() != e.kind.n_nodes() {
            return Err(MeshError::Syntax {
                line: 0,
                message: format!("element {} needs {} nodes", e.id, e.kind.n_nodes()),
            });
        }
        if let Some(&node) = e.nodes.iter().find(|&&n| n >= self.nodes.len()) {
            return Err(MeshError::UnknownNode {
                element: e.id,
                node,
            });
        }
        let distinct: BTreeSet<_> = e.nodes.iter().collect();
        if distinct.len() != e.nodes.len() {
            return Err(MeshError::RepeatedNode(e.id));
        }
        let xy = self.element_coords(e.id);
        for &(a, b, m) in e.kind.edges() {
            let len = ((xy[b][0] - xy[a][0]).powi(2) + (xy[b][1] - xy[a][1]).powi(2)).sqrt();
            let mx = 0.5 * (xy[a][0] + xy[b][0]);
            let my = 0.5 * (xy[a][1] + xy[b][1]);
            let off = ((xy[m][0] - mx).powi(2) + (xy[m][1] - my).powi(2)).sqrt();
            if len == 0.0 {
                return Err(MeshError::InvertedElement(e.id));
            }
            if off > MIDPOINT_TOL * len {
                return Err(MeshError::CurvedEdge(e.id));
            }
        }
        let mut points: Vec<[f64; 2]> = quadrature(e.kind).points.iter().map(|q| q.xi).collect();
        points.push(e.kind.center());
        for xi in points {
            let shape = shape_values(e.kind, xi);
            if jacobian(&xy, &shape.gradients).determinant() <= 0.0 {
                return Err(MeshError::InvertedElement(e.id));
            }
        }
        Ok(())
    }

    fn build_adjacency(&self) -> Vec<Vec<usize>> {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for e in &self.elements {
            for &(a, b, _) in e.kind.edges() {
                let (na, nb) = (e.nodes[a], e.nodes[b]);
                by_edge.entry((na.min(nb), na.max(nb))).or_default().push(e.id);
            }
        }
        let mut adjacency = vec![BTreeSet::new(); self.elements.len()];
        for shared in by_edge.values() {
            for &i in shared {
                for &j in shared {
                    if i != j {
                        adjacency[i].insert(j);
                    }
                }
            }
        }
        adjacency
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Elements sharing an edge with `element`, sorted by id.
    pub fn neighbors(&self, element: usize) -> &[usize] {
        &self.adjacency[element]
    }

    pub fn element_coords(&self, element: usize) -> Vec<[f64; 2]> {
        self.elements[element]
            .nodes
            .iter()
            .map(|&n| [self.nodes[n].x, self.nodes[n].y])
            .collect()
    }

    /// Corner-node polygon of an element, counter-clockwise.
    pub fn corner_polygon(&self, element: usize) -> Vec<[f64; 2]> {
        self.elements[element]
            .corners()
            .iter()
            .map(|&n| [self.nodes[n].x, self.nodes[n].y])
            .collect()
    }

    pub fn node_set(&self, name: &str) -> Option<&[usize]> {
        self.node_sets.get(name).map(Vec::as_slice)
    }
}

fn check_dense(
    what: &'static str,
    ids: impl Iterator<Item = usize>,
    count: usize,
) -> Result<(), MeshError> {
    for (expected, id) in ids.enumerate() {
        if id != expected {
            return Err(MeshError::SparseIds {
                what,
                count,
                missing: expected,
            });
        }
    }
    Ok(())
}

/// Signed area and centroid of a simple polygon.
pub fn polygon_area_centroid(poly: &[[f64; 2]]) -> (f64, [f64; 2]) {
    let mut area = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let cross = p[0] * q[1] - q[0] * p[1];
        area += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    area *= 0.5;
    (area, [cx / (6.0 * area), cy / (6.0 * area)])
}

/// Shape-function values and parametric gradients at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

/// Serendipity Q8 or quadratic T6 shape functions at `xi`.
pub fn shape_values(kind: ElementKind, xi: [f64; 2]) -> ShapeValues {
    let [r, s] = xi;
    match kind {
        ElementKind::Q8 => {
            let mut values = Vec::with_capacity(8);
            let mut gradients = Vec::with_capacity(8);
            for &[ri, si] in kind.reference_nodes() {
                if ri != 0.0 && si != 0.0 {
                    values.push(0.25 * (1.0 + r * ri) * (1.0 + s * si) * (r * ri + s * si - 1.0));
                    gradients.push([
                        0.25 * ri * (1.0 + s * si) * (2.0 * r * ri + s * si),
                        0.25 * si * (1.0 + r * ri) * (r * ri + 2.0 * s * si),
                    ]);
                } else if ri == 0.0 {
                    values.push(0.5 * (1.0 - r * r) * (1.0 + s * si));
                    gradients.push([-r * (1.0 + s * si), 0.5 * si * (1.0 - r * r)]);
                } else {
                    values.push(0.5 * (1.0 + r * ri) * (1.0 - s * s));
                    gradients.push([0.5 * ri * (1.0 - s * s), -s * (1.0 + r * ri)]);
                }
            }
            ShapeValues { values, gradients }
        }
        ElementKind::T6 => {
            let l1 = 1.0 - r - s;
            ShapeValues {
                values: vec![
                    l1 * (2.0 * l1 - 1.0),
                    r * (2.0 * r - 1.0),
                    s * (2.0 * s - 1.0),
                    4.0 * l1 * r,
                    4.0 * r * s,
                    4.0 * s * l1,
                ],
                gradients: vec![
                    [1.0 - 4.0 * l1, 1.0 - 4.0 * l1],
                    [4.0 * r - 1.0, 0.0],
                    [0.0, 4.0 * s - 1.0],
                    [4.0 * (l1 - r), -4.0 * r],
                    [4.0 * s, 4.0 * r],
                    [-4.0 * s, 4.0 * (l1 - s)],
                ],
            }
        }
    }
}

/// Jacobian `dx/dxi` of the isoparametric map.
pub fn jacobian(coords: &[[f64; 2]], gradients: &[[f64; 2]]) -> Matrix2<f64> {
    let mut j = Matrix2::zeros();
    for (x, g) in coords.iter().zip(gradients) {
        j[(0, 0)] += x[0] * g[0];
        j[(0, 1)] += x[0] * g[1];
        j[(1, 0)] += x[1] * g[0];
        j[(1, 1)] += x[1] * g[1];
    }
    j
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePoint {
    pub xi: [f64; 2],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<QuadraturePoint>,
    /// Point of the center representation. For Q8 it coincides with
    /// `points[center_index]`; for T6 it is the centroid, outside the rule.
    pub center: [f64; 2],
    pub center_index: Option<usize>,
}

/// 3x3 Gauss rule for Q8, 3-point interior rule (degree 2) for T6.
pub fn quadrature(kind: ElementKind) -> Quadrature {
    match kind {
        ElementKind::Q8 => {
            let a = (3.0f64 / 5.0).sqrt();
            let abscissae = [(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)];
            let mut points = Vec::with_capacity(9);
            for &(s, ws) in &abscissae {
                for &(r, wr) in &abscissae {
                    points.push(QuadraturePoint {
                        xi: [r, s],
                        weight: wr * ws,
                    });
                }
            }
            Quadrature {
                points,
                center: [0.0, 0.0],
                center_index: Some(4),
            }
        }
        ElementKind::T6 => {
            let w = 1.0 / 6.0;
            let points = [[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]]
                .iter()
                .map(|&xi| QuadraturePoint { xi, weight: w })
                .collect();
            Quadrature {
                points,
                center: [1.0 / 3.0, 1.0 / 3.0],
                center_index: None,
            }
        }
    }
}

struct PendingSet {
    line: usize,
    set: String,
}

/// Parses the native mesh format into a validated mesh and its boundary
/// conditions.
pub fn parse_mesh(text: &str) -> Result<(Mesh, BoundaryConditions), MeshError> {
    let mut nodes: BTreeMap<usize, Node> = BTreeMap::new();
    let mut elements: BTreeMap<usize, ElementTopology> = BTreeMap::new();
    let mut node_sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut fixes: Vec<(PendingSet, Vec<Direction>)> = Vec::new();
    let mut loads: Vec<(PendingSet, [f64; 2])> = Vec::new();
    let mut thickness = 1.0;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let syntax = |message: String| MeshError::Syntax { line, message };
        let int = |tok: &str| {
            tok.parse::<usize>()
                .map_err(|_| syntax(format!("expected a non-negative integer, found `{tok}`")))
        };
        let real = |tok: &str| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| syntax(format!("expected a finite number, found `{tok}`")))
        };
        match tokens[0] {
            "node" => {
                if tokens.len() != 4 {
                    return Err(syntax("usage: node <id> <x> <y>".into()));
                }
                let id = int(tokens[1])?;
                let node = Node {
                    id,
                    x: real(tokens[2])?,
                    y: real(tokens[3])?,
                };
                if nodes.insert(id, node).is_some() {
                    return Err(MeshError::DuplicateNode(id));
                }
            }
            "element" => {
                if tokens.len() < 3 {
                    return Err(syntax("usage: element <id> q8|t6 <nodes...>".into()));
                }
                let id = int(tokens[1])?;
                let kind = match tokens[2] {
                    "q8" | "Q8" => ElementKind::Q8,
                    "t6" | "T6" => ElementKind::T6,
                    other => return Err(syntax(format!("unknown element kind `{other}`"))),
                };
                if tokens.len() != 3 + kind.n_nodes() {
                    return Err(syntax(format!(
                        "{kind} element needs {} node ids",
                        kind.n_nodes()
                    )));
                }
                let ids = tokens[3..].iter().map(|t| int(t)).collect::<Result<Vec<_>, _>>()?;
                let element = ElementTopology {
                    id,
                    kind,
                    nodes: ids,
                    thickness,
                };
                if elements.insert(id, element).is_some() {
                    return Err(MeshError::DuplicateElement(id));
                }
            }
            "thickness" => {
                if tokens.len() != 2 {
                    return Err(syntax("usage: thickness <t>".into()));
                }
                thickness = real(tokens[1])?;
                if thickness <= 0.0 {
                    return Err(syntax("thickness must be positive".into()));
                }
            }
            "nodeset" => {
                if tokens.len() < 3 {
                    return Err(syntax("usage: nodeset <name> <ids...>".into()));
                }
                let ids = tokens[2..].iter().map(|t| int(t)).collect::<Result<Vec<_>, _>>()?;
                let set = node_sets.entry(tokens[1].to_string()).or_default();
                for id in ids {
                    if !set.contains(&id) {
                        set.push(id);
                    }
                }
            }
            "fix" => {
                if tokens.len() != 3 {
                    return Err(syntax("usage: fix <nodeset> x|y|xy".into()));
                }
                let dirs = match tokens[2] {
                    "x" => vec![Direction::X],
                    "y" => vec![Direction::Y],
                    "xy" => vec![Direction::X, Direction::Y],
                    other => return Err(syntax(format!("unknown direction `{other}`"))),
                };
                fixes.push((
                    PendingSet {
                        line,
                        set: tokens[1].to_string(),
                    },
                    dirs,
                ));
            }
            "load" => {
                if tokens.len() != 4 {
                    return Err(syntax("usage: load <nodeset> <fx> <fy>".into()));
                }
                loads.push((
                    PendingSet {
                        line,
                        set: tokens[1].to_string(),
                    },
                    [real(tokens[2])?, real(tokens[3])?],
                ));
            }
            other => return Err(syntax(format!("unknown keyword `{other}`"))),
        }
    }

    let mesh = Mesh::new(
        nodes.into_values().collect(),
        elements.into_values().collect(),
        node_sets,
    )?;

    let resolve = |pending: &PendingSet| {
        mesh.node_set(&pending.set)
            .ok_or_else(|| MeshError::UnknownNodeSet {
                line: pending.line,
                set: pending.set.clone(),
            })
    };

    let mut bcs = BoundaryConditions::default();
    let mut seen = BTreeSet::new();
    for (pending, dirs) in &fixes {
        for &node in resolve(pending)? {
            for &direction in dirs {
                if seen.insert((node, direction)) {
                    bcs.dirichlet.push(Dirichlet {
                        node,
                        direction,
                        value: 0.0,
                    });
                }
            }
        }
    }
    for (pending, force) in &loads {
        let set = resolve(pending)?;
        let share = 1.0 / set.len() as f64;
        for &node in set {
            let entry = bcs.reference_load.entry(node).or_insert([0.0, 0.0]);
            entry[0] += force[0] * share;
            entry[1] += force[1] * share;
        }
    }
    if bcs
        .reference_load
        .values()
        .all(|f| f[0] == 0.0 && f[1] == 0.0)
    {
        return Err(MeshError::ZeroLoad);
    }
    Ok((mesh, bcs))
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT_Q8: &str = "\
node 0 0 0
node 1 1 0
node 2 1 1
node 3 0 1
node 4 0.5 0
node 5 1 0.5
node 6 0.5 1
node 7 0 0.5
element 0 q8 0 1 2 3 4 5 6 7
nodeset right 1 2 5
nodeset left 0 3 7
fix left x
load right 1 0
";

    #[test]
    fn single_q8_has_no_neighbors() {
        let (mesh, bcs) = parse_mesh(UNIT_Q8).unwrap();
        assert_eq!(mesh.elements.len(), 1);
        assert!(mesh.neighbors(0).is_empty());
        assert_eq!(bcs.dirichlet.len(), 3);
        let f = bcs.load_vector(mesh.n_nodes());
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_q8_sharing_an_edge_are_adjacent() {
        let text = "\
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
nodeset r 2 5 12
load r 1 0
";
        let (mesh, _) = parse_mesh(text).unwrap();
        assert_eq!(mesh.neighbors(0), &[1]);
        assert_eq!(mesh.neighbors(1), &[0]);
    }

    #[test]
    fn unknown_node_is_rejected() {
        let text = UNIT_Q8.replace("element 0 q8 0 1 2 3 4 5 6 7", "element 0 q8 0 1 2 3 4 5 6 99");
        assert_eq!(
            parse_mesh(&text).unwrap_err(),
            MeshError::UnknownNode {
                element: 0,
                node: 99
            }
        );
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = format!("{UNIT_Q8}node 8 abc 0\n");
        match parse_mesh(&text).unwrap_err() {
            MeshError::Syntax { line, .. } => assert_eq!(line, 14),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_sparse_ids() {
        let dup = format!("{UNIT_Q8}node 3 0 1\n");
        assert_eq!(parse_mesh(&dup).unwrap_err(), MeshError::DuplicateNode(3));
        let sparse = UNIT_Q8.replace("node 7 0 0.5", "node 9 0 0.5");
        assert!(matches!(
            parse_mesh(&sparse).unwrap_err(),
            MeshError::SparseIds { what: "node", .. }
        ));
    }

    #[test]
    fn clockwise_element_is_inverted() {
        let text = UNIT_Q8.replace("element 0 q8 0 1 2 3 4 5 6 7", "element 0 q8 0 3 2 1 7 6 5 4");
        assert_eq!(parse_mesh(&text).unwrap_err(), MeshError::InvertedElement(0));
    }

    #[test]
    fn curved_t6_edge_is_rejected() {
        let text = "\
node 0 0 0
node 1 1 0
node 2 0 1
node 3 0.5 0.01
node 4 0.5 0.5
node 5 0 0.5
element 0 t6 0 1 2 3 4 5
nodeset a 1
load a 1 0
";
        assert_eq!(parse_mesh(text).unwrap_err(), MeshError::CurvedEdge(0));
    }

    #[test]
    fn unknown_set_and_zero_load() {
        let text = UNIT_Q8.replace("fix left x", "fix bottom y");
        assert!(matches!(
            parse_mesh(&text).unwrap_err(),
            MeshError::UnknownNodeSet { line: 12, .. }
        ));
        let text = UNIT_Q8.replace("load right 1 0", "load right 0 0");
        assert_eq!(parse_mesh(&text).unwrap_err(), MeshError::ZeroLoad);
    }

    #[test]
    fn overlapping_fix_sets_are_deduplicated() {
        let text = format!("{UNIT_Q8}nodeset corner 0\nfix corner xy\n");
        let (_, bcs) = parse_mesh(&text).unwrap();
        // left: 3 x-fixes, corner adds only the y-fix of node 0
        assert_eq!(bcs.dirichlet.len(), 4);
    }

    #[test]
    fn shape_kronecker_and_partition() {
        for kind in [ElementKind::Q8, ElementKind::T6] {
            for (k, &xi) in kind.reference_nodes().iter().enumerate() {
                let s = shape_values(kind, xi);
                for (i, v) in s.values.iter().enumerate() {
                    let expected = if i == k { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-15, "{kind} N{i} at node {k}");
                }
            }
        }
    }

    #[test]
    fn quadrature_weights_sum_to_reference_area() {
        let q8: f64 = quadrature(ElementKind::Q8).points.iter().map(|p| p.weight).sum();
        let t6: f64 = quadrature(ElementKind::T6).points.iter().map(|p| p.weight).sum();
        assert!((q8 - 4.0).abs() < 1e-14);
        assert!((t6 - 0.5).abs() < 1e-15);
        let q = quadrature(ElementKind::Q8);
        assert_eq!(q.points[q.center_index.unwrap()].xi, [0.0, 0.0]);
    }

    #[test]
    fn gauss_rule_integrates_xi2_eta2_exactly() {
        let integral: f64 = quadrature(ElementKind::Q8)
            .points
            .iter()
            .map(|p| p.weight * p.xi[0].powi(2) * p.xi[1].powi(2))
            .sum();
        // (2/3)^2
        assert!((integral - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn polygon_area_of_unit_square() {
        let (a, c) = polygon_area_centroid(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert_eq!(a, 1.0);
        assert_eq!(c, [0.5, 0.5]);
    }
}
