//! Curvilinear polygon meshes.
//!
//! A mesh is a flat list of vertices, parametric edges, and cells given as
//! oriented edge loops (counter-clockwise).  Edges carry their own curve
//! geometry ([`CurveSpec`]); cells may have any number of edges, curved or
//! straight, convex or not.  [`families`] generates the benchmark mesh
//! families (square, L-shape with a refined curvilinear core cell, pegboard,
//! shuriken, jigsaw, perturbed-triangle), and [`grid`] produces the graded
//! boundary quadrature grids every boundary-integral computation runs on.

mod curve;
pub mod families;
mod grid;
mod mesh;

pub use curve::{Curve, CurveSpec, Hyperbola};
pub use families::{mesh_generate, Family, FamilyParams};
pub use grid::{
    all_edge_grids, boundary_grid, kress_w, kress_w_prime, BoundaryGrid, EdgeGrid, KressParams,
};
pub use mesh::{mesh_validate, Cell, Edge, LoopStep, Mesh};

use serde::{Deserialize, Serialize};

/// A point (or vector) in the plane.  Serializes as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Pt {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Pt {
    fn from(a: [f64; 2]) -> Self {
        Pt { x: a[0], y: a[1] }
    }
}

impl From<Pt> for [f64; 2] {
    fn from(p: Pt) -> Self {
        [p.x, p.y]
    }
}

impl Pt {
    pub const ZERO: Pt = Pt { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Pt {
        Pt { x, y }
    }

    pub fn dot(self, o: Pt) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Scalar cross product `self × o`.
    pub fn cross(self, o: Pt) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Pt) -> f64 {
        (self - o).norm()
    }

    pub fn unit(self) -> Pt {
        self * (1.0 / self.norm())
    }

    /// Clockwise quarter turn `R(x,y) = (y, -x)` — the rotation used in the
    /// edge-frame construction and for outward normals of CCW loops.
    pub fn rot_cw(self) -> Pt {
        Pt { x: self.y, y: -self.x }
    }

    /// Counter-clockwise quarter turn `(x,y) ↦ (-y, x)`.
    pub fn rot_ccw(self) -> Pt {
        Pt { x: -self.y, y: self.x }
    }
}

impl std::ops::Add for Pt {
    type Output = Pt;
    fn add(self, o: Pt) -> Pt {
        Pt { x: self.x + o.x, y: self.y + o.y }
    }
}

impl std::ops::Sub for Pt {
    type Output = Pt;
    fn sub(self, o: Pt) -> Pt {
        Pt { x: self.x - o.x, y: self.y - o.y }
    }
}

impl std::ops::Neg for Pt {
    type Output = Pt;
    fn neg(self) -> Pt {
        Pt { x: -self.x, y: -self.y }
    }
}

impl std::ops::Mul<f64> for Pt {
    type Output = Pt;
    fn mul(self, a: f64) -> Pt {
        Pt { x: self.x * a, y: self.y * a }
    }
}
