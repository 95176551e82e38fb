//! Triangulations of axis-aligned rectangles with cotangent edge weights.
//!
//! The mesh is the geometric substrate for P1 assembly and for the discrete
//! maximum principle: the gradient bilinear form decomposes over edges as
//! `(grad u, grad v) = sum_K sum_{E in K} w_E^K (du_E)(dv_E)` with
//! `w_E^K = cot(theta_E^K) / 2` in 2-D, where `theta_E^K` is the angle of `K`
//! opposite the edge `E`. Nonnegativity of the summed weights is the Delaunay
//! condition.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Axis-aligned rectangle `(x0, y0) .. (x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// The unit square `(0,1)^2`.
    pub fn unit() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    /// The square `(-1,1)^2` used by most of the bundled experiments.
    pub fn symmetric() -> Self {
        Rect::new(-1.0, -1.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// A conforming triangulation.
///
/// Immutable after construction; shared read-only across concurrent solves.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Node coordinates.
    pub nodes: Vec<[f64; 2]>,
    /// Vertex-index triples, counterclockwise.
    pub elements: Vec<[usize; 3]>,
    /// Undirected edges as sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// Summed cotangent weight per edge (over all adjacent elements).
    pub edge_weights: Vec<f64>,
    /// Indices of nodes on the boundary.
    pub boundary_nodes: Vec<usize>,
}

/// Per-edge result of [`check_delaunay`].
#[derive(Debug, Clone)]
pub struct DelaunayReport {
    /// `true` where the summed edge weight is nonnegative (tolerance -1e-12).
    pub edge_pass: Vec<bool>,
    /// Smallest edge weight encountered.
    pub min_weight: f64,
    /// `true` iff every edge passes.
    pub all_pass: bool,
}

const DELAUNAY_TOL: f64 = -1e-12;

fn signed_area(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]))
}

/// Cotangent of the interior angle at `apex` in the triangle `(apex, q, r)`.
///
/// Computed from dot and cross products of the vertex coordinates; the angle
/// itself is never formed.
fn cot_at(apex: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    let a = [q[0] - apex[0], q[1] - apex[1]];
    let b = [r[0] - apex[0], r[1] - apex[1]];
    let dot = a[0] * b[0] + a[1] * b[1];
    let cross = (a[0] * b[1] - a[1] * b[0]).abs();
    dot / cross
}

impl Mesh {
    /// Builds a mesh from nodes and counterclockwise elements, deriving edges,
    /// summed cotangent weights and the boundary.
    pub fn from_parts(nodes: Vec<[f64; 2]>, elements: Vec<[usize; 3]>) -> Result<Self> {
        for (k, el) in elements.iter().enumerate() {
            let area = signed_area(nodes[el[0]], nodes[el[1]], nodes[el[2]]);
            if area <= 0.0 {
                return Err(Error::DegenerateElement { element: k, area });
            }
        }

        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_weights: Vec<f64> = Vec::new();
        let mut edge_count: Vec<usize> = Vec::new();

        for el in &elements {
            for (i, j, opp) in [
                (el[0], el[1], el[2]),
                (el[1], el[2], el[0]),
                (el[2], el[0], el[1]),
            ] {
                let key = if i < j { [i, j] } else { [j, i] };
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_weights.push(0.0);
                    edge_count.push(0);
                    edges.len() - 1
                });
                edge_weights[id] += 0.5 * cot_at(nodes[opp], nodes[i], nodes[j]);
                edge_count[id] += 1;
            }
        }

        let mut boundary = vec![false; nodes.len()];
        for (id, &count) in edge_count.iter().enumerate() {
            match count {
                1 => {
                    boundary[edges[id][0]] = true;
                    boundary[edges[id][1]] = true;
                }
                2 => {}
                n => {
                    return Err(Error::Domain(format!(
                        "edge {:?} shared by {} elements",
                        edges[id], n
                    )))
                }
            }
        }
        let boundary_nodes = (0..nodes.len()).filter(|&i| boundary[i]).collect();

        Ok(Mesh {
            nodes,
            elements,
            edges,
            edge_weights,
            boundary_nodes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Signed area of element `k` (positive by construction).
    pub fn element_area(&self, k: usize) -> f64 {
        let el = self.elements[k];
        signed_area(self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]])
    }

    /// Sum of all element areas.
    pub fn total_area(&self) -> f64 {
        (0..self.num_elements()).map(|k| self.element_area(k)).sum()
    }

    /// Largest element diameter.
    pub fn mesh_size(&self) -> f64 {
        let mut h: f64 = 0.0;
        for el in &self.elements {
            for (i, j) in [(el[0], el[1]), (el[1], el[2]), (el[2], el[0])] {
                let dx = self.nodes[i][0] - self.nodes[j][0];
                let dy = self.nodes[i][1] - self.nodes[j][1];
                h = h.max((dx * dx + dy * dy).sqrt());
            }
        }
        h
    }

    /// Per-element edge weights `w_E^K` of element `k`: for each of the three
    /// edges `(i, j)` the single-element contribution `cot(theta)/2`, where
    /// `theta` is the angle opposite the edge.
    pub fn element_edge_weights(&self, k: usize) -> [(usize, usize, f64); 3] {
        let el = self.elements[k];
        let w = |i: usize, j: usize, opp: usize| {
            (
                i,
                j,
                0.5 * cot_at(self.nodes[opp], self.nodes[i], self.nodes[j]),
            )
        };
        [
            w(el[0], el[1], el[2]),
            w(el[1], el[2], el[0]),
            w(el[2], el[0], el[1]),
        ]
    }
}

/// Uniform right-triangle mesh of `rect` with `nx` by `ny` cells, each cell
/// split along its lower-left to upper-right diagonal.
///
/// Node `(i, j)` has index `j * (nx + 1) + i`, so the stiffness bandwidth is
/// `nx + 2`. On square cells every cell diagonal carries weight zero and the
/// mesh satisfies the Delaunay condition exactly.
pub fn generate_uniform(nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config(format!(
            "cell counts must be at least 1, got nx = {nx}, ny = {ny}"
        )));
    }
    if !(rect.x1 > rect.x0 && rect.y1 > rect.y0) {
        return Err(Error::Config(format!(
            "invalid rectangle ({}, {}) .. ({}, {})",
            rect.x0, rect.y0, rect.x1, rect.y1
        )));
    }

    let dx = rect.width() / nx as f64;
    let dy = rect.height() / ny as f64;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([rect.x0 + i as f64 * dx, rect.y0 + j as f64 * dy]);
        }
    }

    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push([a, b, c]);
            elements.push([a, c, d]);
        }
    }

    Mesh::from_parts(nodes, elements)
}

/// Per-edge Delaunay check: edge `E` passes iff its summed cotangent weight is
/// nonnegative (tolerance -1e-12).
pub fn check_delaunay(mesh: &Mesh) -> DelaunayReport {
    let edge_pass: Vec<bool> = mesh.edge_weights.iter().map(|&w| w >= DELAUNAY_TOL).collect();
    let min_weight = mesh
        .edge_weights
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let all_pass = edge_pass.iter().all(|&p| p);
    DelaunayReport {
        edge_pass,
        min_weight,
        all_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smallest_grid_counts() {
        let mesh = generate_uniform(1, 1, Rect::unit()).unwrap();
        assert_eq!(mesh.num_nodes(), 4);
        assert_eq!(mesh.num_elements(), 2);
        assert_eq!(mesh.edges.len(), 5);
    }

    #[test]
    fn two_by_two_counts() {
        let mesh = generate_uniform(2, 2, Rect::unit()).unwrap();
        assert_eq!(mesh.num_nodes(), 9);
        assert_eq!(mesh.num_elements(), 8);
    }

    #[test]
    fn mesh_size_matches_right_triangle_diameter() {
        // Cells of side 2/133; the diameter of each right triangle is the
        // hypotenuse 2*sqrt(2)/133.
        let mesh = generate_uniform(133, 133, Rect::symmetric()).unwrap();
        let expected = 2.0 * std::f64::consts::SQRT_2 / 133.0;
        assert_relative_eq!(mesh.mesh_size(), expected, max_relative = 1e-12);
        assert!((mesh.mesh_size() - 0.0213).abs() < 5e-4);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_uniform(0, 1, Rect::unit()).is_err());
        assert!(generate_uniform(1, 0, Rect::unit()).is_err());
        assert!(generate_uniform(1, 1, Rect::new(0.0, 0.0, -1.0, 1.0)).is_err());
        assert!(generate_uniform(1, 1, Rect::new(0.0, 0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn area_sums_to_rectangle() {
        let rect = Rect::new(-0.3, 0.2, 1.7, 2.9);
        let mesh = generate_uniform(7, 5, rect).unwrap();
        assert_relative_eq!(mesh.total_area(), rect.area(), max_relative = 1e-12);
    }

    /// Symbolic oracle for square cells: within each right triangle the edge
    /// weights are cot(45)/2 = 1/2 on the two legs and cot(90)/2 = 0 on the
    /// hypotenuse. Summing over adjacent elements: interior axis edges get
    /// 1/2 + 1/2 = 1, boundary axis edges 1/2, and cell diagonals 0.
    #[test]
    fn uniform_square_edge_weights() {
        let mesh = generate_uniform(2, 2, Rect::unit()).unwrap();
        let report = check_delaunay(&mesh);
        assert!(report.all_pass);

        let mut interior_axis = 0;
        let mut boundary_axis = 0;
        let mut diagonal = 0;
        for (e, &w) in mesh.edges.iter().zip(&mesh.edge_weights) {
            let p = mesh.nodes[e[0]];
            let q = mesh.nodes[e[1]];
            let axis = (p[0] - q[0]).abs() < 1e-14 || (p[1] - q[1]).abs() < 1e-14;
            if axis {
                let mid_interior = |a: f64, b: f64| {
                    let m = 0.5 * (a + b);
                    m > 1e-14 && m < 1.0 - 1e-14
                };
                // An axis edge is interior iff it does not lie on the boundary
                // of the square.
                let on_boundary = (p[0] - q[0]).abs() < 1e-14
                    && (p[0] < 1e-14 || p[0] > 1.0 - 1e-14)
                    || (p[1] - q[1]).abs() < 1e-14 && (p[1] < 1e-14 || p[1] > 1.0 - 1e-14);
                if on_boundary {
                    assert_relative_eq!(w, 0.5, max_relative = 1e-12);
                    boundary_axis += 1;
                } else {
                    assert!(mid_interior(p[0], q[0]) || mid_interior(p[1], q[1]));
                    assert_relative_eq!(w, 1.0, max_relative = 1e-12);
                    interior_axis += 1;
                }
            } else {
                assert!(w.abs() < 1e-12, "diagonal weight {w}");
                diagonal += 1;
            }
        }
        assert_eq!(interior_axis, 4);
        assert_eq!(boundary_axis, 8);
        assert_eq!(diagonal, 4);
    }

    /// Two triangles facing a shared edge under 100-degree angles violate the
    /// Delaunay condition: cot(100 deg) < 0 from both sides.
    #[test]
    fn obtuse_pair_fails_delaunay() {
        let half = 0.5;
        let apex_angle: f64 = 100.0_f64.to_radians();
        let x = half / (apex_angle / 2.0).tan();
        let nodes = vec![[0.0, -half], [0.0, half], [x, 0.0], [-x, 0.0]];
        // CCW: (bottom, top, left apex) and (top, bottom, right apex).
        let elements = vec![[0, 1, 3], [1, 0, 2]];
        let mesh = Mesh::from_parts(nodes, elements).unwrap();
        let report = check_delaunay(&mesh);
        assert!(!report.all_pass);
        let shared = mesh
            .edges
            .iter()
            .position(|e| *e == [0, 1])
            .expect("shared edge present");
        assert!(!report.edge_pass[shared]);
        assert_relative_eq!(
            mesh.edge_weights[shared],
            apex_angle.tan().recip(),
            max_relative = 1e-12
        );
        assert!(mesh.edge_weights[shared] < 0.0);
    }

    /// Shearing the uniform grid so every triangle becomes equilateral-like
    /// keeps all angles at 60 degrees or less than 90, so all edges pass.
    #[test]
    fn equilateral_like_mesh_passes() {
        let mut mesh = generate_uniform(4, 4, Rect::unit()).unwrap();
        // Shear against the split diagonal so each right triangle becomes
        // equilateral (all angles 60 degrees).
        let s = -0.5;
        let t = 3.0_f64.sqrt() / 2.0;
        for p in &mut mesh.nodes {
            let (x, y) = (p[0], p[1]);
            p[0] = x + s * y;
            p[1] = t * y;
        }
        let sheared = Mesh::from_parts(mesh.nodes, mesh.elements).unwrap();
        let report = check_delaunay(&sheared);
        assert!(report.all_pass);
        assert!(report.min_weight >= 0.0);
    }

    #[test]
    fn degenerate_element_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let err = Mesh::from_parts(nodes, vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateElement { element: 0, .. }));
    }
}
