//! Mesh containers, JSON format, and validation.
//!
//! The serialized schema is
//!
//! ```json
//! {"vertices": [[x,y], ...],
//!  "edges":    [{"id": 0, "v0": 0, "v1": 1, "curve": {"kind": "line", ...}}, ...],
//!  "cells":    [{"id": 0, "loop": [[edge_id, orient], ...]}, ...]}
//! ```
//!
//! with `orient = +1` when the cell traverses the edge from `v0` to `v1` and
//! `-1` otherwise.  Cell loops run counter-clockwise (positive signed area).
//! Validation checks the combinatorics (closed loops, each edge used by one
//! or two cells, shared edges traversed oppositely), the geometry (curve
//! endpoints coincide with their vertices, regular parametrizations, positive
//! area), and the corner angles (strictly between 0 and 2π — no cusps).

use super::{Curve, CurveSpec, Pt};
use crate::linalg::gauss_legendre;
use serde::{Deserialize, Serialize};

/// One step of a cell's boundary loop: an edge id plus traversal direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, i32)", into = "(usize, i32)")]
pub struct LoopStep {
    pub edge: usize,
    pub forward: bool,
}

impl From<(usize, i32)> for LoopStep {
    fn from((edge, orient): (usize, i32)) -> Self {
        LoopStep { edge, forward: orient >= 0 }
    }
}

impl From<LoopStep> for (usize, i32) {
    fn from(s: LoopStep) -> Self {
        (s.edge, if s.forward { 1 } else { -1 })
    }
}

/// A mesh edge: vertex ids plus parametric geometry with `x(0)` at `v0` and
/// `x(1)` at `v1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub v0: usize,
    pub v1: usize,
    pub curve: CurveSpec,
}

/// A cell: a counter-clockwise closed loop of oriented edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    #[serde(rename = "loop")]
    pub steps: Vec<LoopStep>,
}

impl Cell {
    pub fn n_edges(&self) -> usize {
        self.steps.len()
    }
}

/// A curvilinear polygon mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Pt>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
}

impl Mesh {
    /// Start vertex of a loop step.
    pub fn step_start(&self, s: LoopStep) -> usize {
        let e = &self.edges[s.edge];
        if s.forward {
            e.v0
        } else {
            e.v1
        }
    }

    /// End vertex of a loop step.
    pub fn step_end(&self, s: LoopStep) -> usize {
        let e = &self.edges[s.edge];
        if s.forward {
            e.v1
        } else {
            e.v0
        }
    }

    /// For each edge, the `(cell, forward)` references using it.
    pub fn edge_usage(&self) -> Vec<Vec<(usize, bool)>> {
        let mut usage = vec![Vec::new(); self.edges.len()];
        for cell in &self.cells {
            for &s in &cell.steps {
                if s.edge < usage.len() {
                    usage[s.edge].push((cell.id, s.forward));
                }
            }
        }
        usage
    }

    /// `true` for edges used by exactly one cell (domain boundary).
    pub fn boundary_edges(&self) -> Vec<bool> {
        self.edge_usage().iter().map(|u| u.len() == 1).collect()
    }

    /// `true` for vertices incident to at least one boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let be = self.boundary_edges();
        let mut bv = vec![false; self.vertices.len()];
        for (e, &is_b) in self.edges.iter().zip(&be) {
            if is_b {
                bv[e.v0] = true;
                bv[e.v1] = true;
            }
        }
        bv
    }

    /// Signed area of one cell by the boundary formula `½∮(x dy − y dx)`,
    /// with a fixed Gauss rule per edge (validation-grade accuracy).
    pub fn cell_signed_area(&self, cell: &Cell) -> f64 {
        let (gx, gw) = gauss_legendre(24);
        let mut area = 0.0;
        for &s in &cell.steps {
            let curve = &self.edges[s.edge].curve;
            for (&xi, &wi) in gx.iter().zip(&gw) {
                let t = 0.5 * (xi + 1.0);
                let x = curve.position(t);
                let v = curve.velocity(t);
                let sign = if s.forward { 1.0 } else { -1.0 };
                area += 0.5 * wi * 0.5 * sign * x.cross(v);
            }
        }
        area
    }

    /// Run [`mesh_validate`] and convert violations into an error.
    pub fn validate(&self) -> crate::Result<()> {
        let report = mesh_validate(self);
        if report.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::InvalidMesh(report.join("; ")))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mesh serialization cannot fail")
    }

    pub fn from_json(s: &str) -> crate::Result<Mesh> {
        serde_json::from_str(s).map_err(|e| crate::Error::Config(format!("bad mesh JSON: {e}")))
    }
}

/// Validate a mesh; returns a list of human-readable violations (empty when
/// the mesh is well-formed).
pub fn mesh_validate(mesh: &Mesh) -> Vec<String> {
    let mut bad = Vec::new();
    for (k, v) in mesh.vertices.iter().enumerate() {
        if !v.x.is_finite() || !v.y.is_finite() {
            bad.push(format!("vertex {k} is not finite"));
        }
    }
    for (k, e) in mesh.edges.iter().enumerate() {
        if e.id != k {
            bad.push(format!("edge {k} has id {}", e.id));
        }
        if e.v0 >= mesh.vertices.len() || e.v1 >= mesh.vertices.len() {
            bad.push(format!("edge {k} references a missing vertex"));
            continue;
        }
        if e.v0 == e.v1 {
            bad.push(format!("edge {k} is a closed contour (v0 == v1)"));
            continue;
        }
        let a = mesh.vertices[e.v0];
        let b = mesh.vertices[e.v1];
        let scale = 1.0 + a.dist(b);
        if e.curve.position(0.0).dist(a) > 1e-12 * scale {
            bad.push(format!("edge {k}: x(0) does not match vertex v0"));
        }
        if e.curve.position(1.0).dist(b) > 1e-12 * scale {
            bad.push(format!("edge {k}: x(1) does not match vertex v1"));
        }
        // Regularity: sampled |x′| bounded away from zero.
        for i in 0..=32 {
            let t = i as f64 / 32.0;
            if e.curve.velocity(t).norm() <= 1e-12 * scale {
                bad.push(format!("edge {k}: |x'({t})| vanishes"));
                break;
            }
        }
    }
    if !bad.is_empty() {
        return bad; // Combinatorial checks below assume sane indices.
    }
    let usage = mesh.edge_usage();
    for (k, u) in usage.iter().enumerate() {
        match u.len() {
            0 => bad.push(format!("edge {k} is not used by any cell")),
            1 => {}
            2 => {
                if u[0].1 == u[1].1 {
                    bad.push(format!(
                        "edge {k} is traversed in the same direction by cells {} and {}",
                        u[0].0, u[1].0
                    ));
                }
            }
            n => bad.push(format!("edge {k} is used by {n} cells")),
        }
    }
    for (k, cell) in mesh.cells.iter().enumerate() {
        if cell.id != k {
            bad.push(format!("cell {k} has id {}", cell.id));
        }
        if cell.steps.is_empty() {
            bad.push(format!("cell {k} has an empty loop"));
            continue;
        }
        let mut seen = std::collections::HashSet::new();
        for &s in &cell.steps {
            if !seen.insert(s.edge) {
                bad.push(format!("cell {k} uses edge {} twice", s.edge));
            }
        }
        let m = cell.steps.len();
        let mut closed = true;
        for i in 0..m {
            if mesh.step_end(cell.steps[i]) != mesh.step_start(cell.steps[(i + 1) % m]) {
                bad.push(format!("cell {k}: loop breaks after step {i}"));
                closed = false;
            }
        }
        if !closed {
            continue;
        }
        let area = mesh.cell_signed_area(cell);
        if area <= 0.0 {
            bad.push(format!("cell {k} has nonpositive signed area {area:.3e} (loop not CCW?)"));
        }
        // Corner angles strictly inside (0, 2π): the turn between the
        // incoming and outgoing tangents must stay away from ±π.
        for i in 0..m {
            let prev = cell.steps[i];
            let next = cell.steps[(i + 1) % m];
            let t_in = traversal_tangent(mesh, prev, 1.0);
            let t_out = traversal_tangent(mesh, next, 0.0);
            let turn = t_in.cross(t_out).atan2(t_in.dot(t_out));
            if (std::f64::consts::PI - turn.abs()) < 1e-9 {
                bad.push(format!(
                    "cell {k}: cusp at corner {} (interior angle 0 or 2π)",
                    mesh.step_start(next)
                ));
            }
        }
    }
    bad
}

/// Unit tangent of a loop step at traversal parameter `s ∈ [0,1]`.
fn traversal_tangent(mesh: &Mesh, step: LoopStep, s: f64) -> Pt {
    let curve = &mesh.edges[step.edge].curve;
    let t = if step.forward { s } else { 1.0 - s };
    let v = curve.velocity(t);
    (if step.forward { v } else { -v }).unit()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single unit square cell.
    fn unit_square_mesh() -> Mesh {
        let vs = vec![Pt::new(0.0, 0.0), Pt::new(1.0, 0.0), Pt::new(1.0, 1.0), Pt::new(0.0, 1.0)];
        let line = |a: Pt, b: Pt| CurveSpec::Line { a, b };
        let edges = vec![
            Edge { id: 0, v0: 0, v1: 1, curve: line(vs[0], vs[1]) },
            Edge { id: 1, v0: 1, v1: 2, curve: line(vs[1], vs[2]) },
            Edge { id: 2, v0: 2, v1: 3, curve: line(vs[2], vs[3]) },
            Edge { id: 3, v0: 3, v1: 0, curve: line(vs[3], vs[0]) },
        ];
        let steps = (0..4).map(|e| LoopStep { edge: e, forward: true }).collect();
        Mesh { vertices: vs, edges, cells: vec![Cell { id: 0, steps }] }
    }

    #[test]
    fn unit_square_validates_with_unit_area() {
        let m = unit_square_mesh();
        assert!(mesh_validate(&m).is_empty());
        assert!((m.cell_signed_area(&m.cells[0]) - 1.0).abs() < 1e-12);
        assert_eq!(m.boundary_edges(), vec![true; 4]);
    }

    #[test]
    fn reversed_loop_is_rejected() {
        let mut m = unit_square_mesh();
        m.cells[0].steps.reverse();
        for s in &mut m.cells[0].steps {
            s.forward = false;
        }
        let report = mesh_validate(&m);
        assert!(report.iter().any(|v| v.contains("nonpositive signed area")));
    }

    #[test]
    fn broken_loop_is_rejected() {
        let mut m = unit_square_mesh();
        m.cells[0].steps.swap(1, 2);
        assert!(!mesh_validate(&m).is_empty());
    }

    #[test]
    fn cusp_is_rejected() {
        // A bigon between a chord and a single-half-wave bump is a valid
        // cell; flattening the bump to a second straight edge degenerates
        // both corners into cusps (and the area to zero).
        let vs = vec![Pt::new(0.0, 0.0), Pt::new(1.0, 0.0)];
        let chord = CurveSpec::Line { a: vs[0], b: vs[1] };
        let bump =
            CurveSpec::SinePerturbedLine { a: vs[0], b: vs[1], amplitude: 0.2, halfwaves: 1 };
        let m = Mesh {
            vertices: vs,
            edges: vec![
                Edge { id: 0, v0: 0, v1: 1, curve: chord.clone() },
                Edge { id: 1, v0: 0, v1: 1, curve: bump },
            ],
            cells: vec![Cell {
                id: 0,
                steps: vec![LoopStep { edge: 0, forward: true }, LoopStep { edge: 1, forward: false }],
            }],
        };
        assert!(mesh_validate(&m).is_empty());
        let mut flat_mesh = m.clone();
        flat_mesh.edges[1].curve = chord;
        let report = mesh_validate(&flat_mesh);
        assert!(report.iter().any(|v| v.contains("cusp") || v.contains("area")));
    }

    #[test]
    fn mesh_json_round_trip_matches_schema() {
        let m = unit_square_mesh();
        let s = m.to_json();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v["vertices"][0].is_array());
        assert_eq!(v["edges"][1]["v0"], 1);
        assert_eq!(v["cells"][0]["loop"][2][0], 2);
        assert_eq!(v["cells"][0]["loop"][2][1], 1);
        let back = Mesh::from_json(&s).unwrap();
        assert!(mesh_validate(&back).is_empty());
        assert_eq!(back.edges.len(), 4);
    }
}
