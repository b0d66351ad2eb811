//! Generators for the benchmark meshes used by the examples and tests. Each
//! generator emits the native mesh text so it can be written to disk and fed
//! to the command-line driver unchanged.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::mesh::Direction;

/// Mesh text plus a convenient control point.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub text: String,
    pub control_node: usize,
    pub control_direction: Direction,
}

/// Incremental mesh writer. Mid-side nodes are always placed at the chord
/// midpoint so that every edge is straight.
#[derive(Debug, Default, Clone)]
pub struct MeshBuilder {
    nodes: Vec<[f64; 2]>,
    elements: Vec<(&'static str, Vec<usize>)>,
    keys: HashMap<(i64, i64), usize>,
    sets: BTreeMap<String, Vec<usize>>,
    fixes: Vec<(String, &'static str)>,
    loads: BTreeMap<usize, [f64; 2]>,
    thickness: f64,
}

impl MeshBuilder {
    pub fn new(thickness: f64) -> Self {
        Self {
            thickness,
            ..Self::default()
        }
    }

    /// Node for lattice key `key`, created at `xy` on first use.
    pub fn node(&mut self, key: (i64, i64), xy: [f64; 2]) -> usize {
        if let Some(&id) = self.keys.get(&key) {
            return id;
        }
        self.nodes.push(xy);
        self.keys.insert(key, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        self.nodes[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    fn midpoint(&self, a: usize, b: usize) -> [f64; 2] {
        let (p, q) = (self.nodes[a], self.nodes[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    /// A Q8 over counter-clockwise corner keys and positions. Mid-side keys
    /// are the averages of the corner keys, so neighbours share them.
    pub fn q8(&mut self, corners: [((i64, i64), [f64; 2]); 4]) -> usize {
        let c: Vec<usize> = corners.iter().map(|&(k, xy)| self.node(k, xy)).collect();
        let mut nodes = c.clone();
        for i in 0..4 {
            let (ka, kb) = (corners[i].0, corners[(i + 1) % 4].0);
            let key = ((ka.0 + kb.0) / 2, (ka.1 + kb.1) / 2);
            let xy = self.midpoint(c[i], c[(i + 1) % 4]);
            nodes.push(self.node(key, xy));
        }
        self.elements.push(("q8", nodes));
        self.elements.len() - 1
    }

    /// A T6 over counter-clockwise corner keys and positions.
    pub fn t6(&mut self, corners: [((i64, i64), [f64; 2]); 3]) -> usize {
        let c: Vec<usize> = corners.iter().map(|&(k, xy)| self.node(k, xy)).collect();
        let mut nodes = c.clone();
        for i in 0..3 {
            let (ka, kb) = (corners[i].0, corners[(i + 1) % 3].0);
            let key = ((ka.0 + kb.0) / 2, (ka.1 + kb.1) / 2);
            let xy = self.midpoint(c[i], c[(i + 1) % 3]);
            nodes.push(self.node(key, xy));
        }
        self.elements.push(("t6", nodes));
        self.elements.len() - 1
    }

    /// Nodes whose coordinates satisfy `pred`.
    pub fn select(&self, pred: impl Fn([f64; 2]) -> bool) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| pred(self.nodes[i])).collect()
    }

    pub fn node_set(&mut self, name: &str, ids: Vec<usize>) {
        self.sets.insert(name.to_string(), ids);
    }

    pub fn fix(&mut self, set: &str, dirs: &'static str) {
        self.fixes.push((set.to_string(), dirs));
    }

    pub fn point_load(&mut self, node: usize, force: [f64; 2]) {
        let f = self.loads.entry(node).or_insert([0.0, 0.0]);
        f[0] += force[0];
        f[1] += force[1];
    }

    /// Consistent nodal loads of a uniform traction on every boundary edge
    /// whose two corners satisfy `pred`.
    pub fn edge_traction(&mut self, pred: impl Fn([f64; 2]) -> bool, traction: [f64; 2]) {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        for (kind, nodes) in &self.elements {
            let n = if *kind == "q8" { 4 } else { 3 };
            for i in 0..n {
                let (a, b, m) = (nodes[i], nodes[(i + 1) % n], nodes[n + i]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
                edges.push((a, b, m));
            }
        }
        for (a, b, m) in edges {
            if count[&(a.min(b), a.max(b))] != 1 || !pred(self.nodes[a]) || !pred(self.nodes[b]) {
                continue;
            }
            let (p, q) = (self.nodes[a], self.nodes[b]);
            let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt() * self.thickness;
            let f = |w: f64| [traction[0] * len * w, traction[1] * len * w];
            self.point_load(a, f(1.0 / 6.0));
            self.point_load(b, f(1.0 / 6.0));
            self.point_load(m, f(2.0 / 3.0));
        }
    }

    /// Native mesh text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "thickness {}", self.thickness);
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "node {i} {:?} {:?}", p[0], p[1]);
        }
        for (i, (kind, nodes)) in self.elements.iter().enumerate() {
            let ids: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "element {i} {kind} {}", ids.join(" "));
        }
        for (name, ids) in &self.sets {
            let ids: Vec<String> = ids.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "nodeset {name} {}", ids.join(" "));
        }
        for (set, dirs) in &self.fixes {
            let _ = writeln!(s, "fix {set} {dirs}");
        }
        for (node, f) in &self.loads {
            let _ = writeln!(s, "nodeset f{node} {node}");
            let _ = writeln!(s, "load f{node} {:?} {:?}", f[0], f[1]);
        }
        s
    }
}

/// Structured Q8 grid on `[0, lx] x [0, ly]`, keeping cells where `keep` holds.
fn q8_grid(b: &mut MeshBuilder, nx: usize, ny: usize, lx: f64, ly: f64, keep: impl Fn(usize, usize) -> bool) {
    let (dx, dy) = (lx / nx as f64, ly / ny as f64);
    let at = |i: usize, j: usize| ((2 * i) as i64, (2 * j) as i64);
    let xy = |i: usize, j: usize| [i as f64 * dx, j as f64 * dy];
    for j in 0..ny {
        for i in 0..nx {
            if keep(i, j) {
                b.q8([
                    (at(i, j), xy(i, j)),
                    (at(i + 1, j), xy(i + 1, j)),
                    (at(i + 1, j + 1), xy(i + 1, j + 1)),
                    (at(i, j + 1), xy(i, j + 1)),
                ]);
            }
        }
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Uniaxial tension specimen: `nx` Q8 elements of size `dx` by `height` in a
/// row. The left end is fixed in x, its lower corner in y, and the right end
/// carries a total reference force of 1 in x.
pub fn tension_bar(nx: usize, dx: f64, height: f64, thickness: f64) -> Fixture {
    let mut b = MeshBuilder::new(thickness);
    let length = nx as f64 * dx;
    q8_grid(&mut b, nx, 1, length, height, |_, _| true);
    let left = b.select(|p| near(p[0], 0.0));
    b.node_set("left", left);
    b.fix("left", "x");
    let pin = b.select(|p| near(p[0], 0.0) && near(p[1], 0.0));
    b.node_set("pin", pin);
    b.fix("pin", "y");
    b.edge_traction(|p| near(p[0], length), [1.0 / (height * thickness), 0.0]);
    let control = b.select(|p| near(p[0], length) && near(p[1], 0.0))[0];
    Fixture {
        text: b.to_text(),
        control_node: control,
        control_direction: Direction::X,
    }
}

/// One square Q8 of side `h` under uniaxial tension.
pub fn single_element(h: f64) -> Fixture {
    tension_bar(1, h, h, 1.0)
}

/// Structured strip of T6 elements, two per cell, under uniaxial tension.
pub fn t6_strip(nx: usize, ny: usize, lx: f64, ly: f64) -> Fixture {
    let mut b = MeshBuilder::new(1.0);
    let (dx, dy) = (lx / nx as f64, ly / ny as f64);
    let at = |i: usize, j: usize| (((2 * i) as i64, (2 * j) as i64), [i as f64 * dx, j as f64 * dy]);
    for j in 0..ny {
        for i in 0..nx {
            b.t6([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            b.t6([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    let left = b.select(|p| near(p[0], 0.0));
    b.node_set("left", left);
    b.fix("left", "x");
    let pin = b.select(|p| near(p[0], 0.0) && near(p[1], 0.0));
    b.node_set("pin", pin);
    b.fix("pin", "y");
    b.edge_traction(|p| near(p[0], lx), [1.0 / ly, 0.0]);
    let control = b.select(|p| near(p[0], lx) && near(p[1], 0.0))[0];
    Fixture {
        text: b.to_text(),
        control_node: control,
        control_direction: Direction::X,
    }
}

/// Geometry of the double-notched four-point bending beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub columns: usize,
    pub rows: usize,
    pub length: f64,
    pub height: f64,
    pub thickness: f64,
    /// Columns removed to form each notch, counted from either end.
    pub notch_column: usize,
    /// Rows removed from the bottom at each notch.
    pub notch_rows: usize,
    /// Column of the left load point, counted from the left end.
    pub load_column: usize,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            columns: 40,
            rows: 8,
            length: 400.0,
            height: 80.0,
            thickness: 50.0,
            notch_column: 15,
            notch_rows: 2,
            load_column: 13,
        }
    }
}

/// Beam on two end supports, loaded downward by two symmetric patches on
/// the top face, with two bottom notches inside the constant-moment zone.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamFixture {
    pub fixture: Fixture,
    /// x coordinates of the notch centres.
    pub notch_x: [f64; 2],
    pub notch_depth: f64,
}

pub fn notched_beam(p: BeamParams) -> BeamFixture {
    let mut b = MeshBuilder::new(p.thickness);
    let (dx, dy) = (p.length / p.columns as f64, p.height / p.rows as f64);
    let right_notch = p.columns - 1 - p.notch_column;
    q8_grid(&mut b, p.columns, p.rows, p.length, p.height, |i, j| {
        !((i == p.notch_column || i == right_notch) && j < p.notch_rows)
    });
    let support_l = b.select(|q| near(q[0], 0.0) && near(q[1], 0.0));
    let support_r = b.select(|q| near(q[0], p.length) && near(q[1], 0.0));
    b.node_set("support_left", support_l);
    b.fix("support_left", "xy");
    b.node_set("support_right", support_r);
    b.fix("support_right", "y");
    // load patches one element wide centred on the load columns
    let x_l = (p.load_column as f64 + 0.5) * dx;
    let x_r = p.length - x_l;
    let w = 0.5 * dx + 1e-9;
    let traction = -1.0 / (2.0 * dx * p.thickness);
    b.edge_traction(
        |q| near(q[1], p.height) && ((q[0] - x_l).abs() <= w || (q[0] - x_r).abs() <= w),
        [0.0, traction],
    );
    let control = b.select(|q| near(q[1], p.height) && near(q[0], x_l))[0];
    BeamFixture {
        fixture: Fixture {
            text: b.to_text(),
            control_node: control,
            control_direction: Direction::Y,
        },
        notch_x: [
            (p.notch_column as f64 + 0.5) * dx,
            (right_notch as f64 + 0.5) * dx,
        ],
        notch_depth: p.notch_rows as f64 * dy,
    }
}

/// Square plate with a central circular hole meshed as an O-grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateParams {
    pub width: f64,
    pub radius: f64,
    /// Elements along each side of the square.
    pub per_side: usize,
    /// Element rings between hole and boundary.
    pub rings: usize,
    pub thickness: f64,
    /// Inclination of the top traction from the vertical, in degrees.
    pub angle_deg: f64,
}

impl Default for PlateParams {
    fn default() -> Self {
        Self {
            width: 200.0,
            radius: 40.0,
            per_side: 12,
            rings: 4,
            thickness: 1.0,
            angle_deg: 0.0,
        }
    }
}

/// The top edge carries a unit-resultant traction, the bottom edge is fixed
/// vertically and its left corner horizontally.
pub fn perforated_plate(p: PlateParams) -> Fixture {
    let mut b = MeshBuilder::new(p.thickness);
    let half = 0.5 * p.width;
    let n = 4 * p.per_side;
    // outer boundary point for perimeter parameter k, counter-clockwise from the bottom-right corner
    let outer = |k: usize| -> [f64; 2] {
        let k = k % n;
        let (side, r) = (k / p.per_side, (k % p.per_side) as f64 / p.per_side as f64);
        let s = -half + r * p.width;
        match side {
            0 => [half, s],
            1 => [-s, half],
            2 => [-half, -s],
            _ => [s, -half],
        }
    };
    let point = |i: usize, k: usize| -> [f64; 2] {
        let o = outer(k);
        let theta = o[1].atan2(o[0]);
        let h = [p.radius * theta.cos(), p.radius * theta.sin()];
        let t = (i as f64 / p.rings as f64).powf(1.2);
        [h[0] + t * (o[0] - h[0]), h[1] + t * (o[1] - h[1])]
    };
    let key = |i: usize, k: usize| ((2 * i) as i64, (2 * (k % n)) as i64);
    for k in 0..n {
        for i in 0..p.rings {
            // the wrap-around column gets its mid-side keys from the unwrapped index
            let corners = [
                (key(i, k), point(i, k)),
                (key(i + 1, k), point(i + 1, k)),
                (key(i + 1, k + 1), point(i + 1, k + 1)),
                (key(i, k + 1), point(i, k + 1)),
            ];
            if k + 1 == n {
                b.q8_wrapped(corners, n as i64);
            } else {
                b.q8(corners);
            }
        }
    }
    let bottom = b.select(|q| near(q[1], -half));
    b.node_set("bottom", bottom);
    b.fix("bottom", "y");
    let corner = b.select(|q| near(q[1], -half) && near(q[0], -half));
    b.node_set("corner", corner);
    b.fix("corner", "x");
    let a = p.angle_deg.to_radians();
    let s = 1.0 / (p.width * p.thickness);
    b.edge_traction(|q| near(q[1], half), [s * a.sin(), s * a.cos()]);
    let control = b.select(|q| near(q[1], half) && near(q[0], half))[0];
    Fixture {
        text: b.to_text(),
        control_node: control,
        control_direction: Direction::Y,
    }
}

impl MeshBuilder {
    /// Q8 whose second key coordinate wraps with period `2 * period`.
    fn q8_wrapped(&mut self, corners: [((i64, i64), [f64; 2]); 4], period: i64) -> usize {
        let c: Vec<usize> = corners.iter().map(|&(k, xy)| self.node(k, xy)).collect();
        let mut nodes = c.clone();
        for i in 0..4 {
            let (ka, kb) = (corners[i].0, corners[(i + 1) % 4].0);
            let mut kb1 = kb.1;
            if (kb1 - ka.1).abs() > 2 {
                kb1 += if kb1 < ka.1 { 2 * period } else { -2 * period };
            }
            let mid = ((ka.0 + kb.0) / 2, ((ka.1 + kb1) / 2).rem_euclid(2 * period));
            let xy = self.midpoint(c[i], c[(i + 1) % 4]);
            nodes.push(self.node(mid, xy));
        }
        self.elements.push(("q8", nodes));
        self.elements.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::parse_mesh;

    fn total_load(text: &str) -> [f64; 2] {
        let (_, bcs) = parse_mesh(text).unwrap();
        bcs.reference_load
            .values()
            .fold([0.0, 0.0], |a, f| [a[0] + f[0], a[1] + f[1]])
    }

    #[test]
    fn single_element_is_valid_with_unit_resultant() {
        let f = single_element(50.0);
        let (mesh, bcs) = parse_mesh(&f.text).unwrap();
        assert_eq!(mesh.elements.len(), 1);
        assert_eq!(mesh.n_nodes(), 8);
        let t = total_load(&f.text);
        assert!((t[0] - 1.0).abs() < 1e-14 && t[1] == 0.0);
        assert_eq!(bcs.reference_load.len(), 3);
        assert!((bcs.reference_load[&f.control_node][0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn bar_neighbours_form_a_chain() {
        let f = tension_bar(5, 100.0, 50.0, 1.0);
        let (mesh, _) = parse_mesh(&f.text).unwrap();
        assert_eq!(mesh.elements.len(), 5);
        assert_eq!(mesh.neighbors(0), &[1]);
        assert_eq!(mesh.neighbors(2), &[1, 3]);
    }

    #[test]
    fn t6_strip_is_valid() {
        let f = t6_strip(2, 1, 2.0, 1.0);
        let (mesh, _) = parse_mesh(&f.text).unwrap();
        assert_eq!(mesh.elements.len(), 4);
        assert_eq!(mesh.n_nodes(), 15);
        assert!((total_load(&f.text)[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn beam_has_two_notches() {
        let p = BeamParams::default();
        let beam = notched_beam(p);
        let (mesh, _) = parse_mesh(&beam.fixture.text).unwrap();
        assert_eq!(mesh.elements.len(), p.columns * p.rows - 2 * p.notch_rows);
        let t = total_load(&beam.fixture.text);
        assert!((t[1] + 1.0).abs() < 1e-12);
        assert!((beam.notch_x[0] + beam.notch_x[1] - p.length).abs() < 1e-9);
    }

    #[test]
    fn plate_o_grid_closes_on_itself() {
        let p = PlateParams::default();
        let f = perforated_plate(p);
        let (mesh, _) = parse_mesh(&f.text).unwrap();
        assert_eq!(mesh.elements.len(), 4 * p.per_side * p.rings);
        // (2 rings + 1) * 2n corner-and-mid nodes per ring line, plus radial mid nodes
        let n = 4 * p.per_side;
        assert_eq!(mesh.n_nodes(), (p.rings + 1) * 2 * n + p.rings * n);
        for e in 0..mesh.elements.len() {
            assert!(mesh.neighbors(e).len() >= 2);
        }
        let t = total_load(&f.text);
        assert!((t[1] - 1.0).abs() < 1e-12);
    }
}
