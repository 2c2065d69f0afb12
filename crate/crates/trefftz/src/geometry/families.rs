//! Benchmark mesh families.
//!
//! Six generators indexed by a refinement parameter `r`:
//!
//! * `square` — r×r uniform squares on (0,1)²; the plain testing aid.
//! * `lshape` — the L-shaped domain (−1,1)² ∖ [0,1]×[−1,0] meshed as 24r²
//!   small squares of side 1/(3r) around a *fixed-size* L-shaped core cell
//!   K_L = (−1/3,1/3)² ∖ [0,1/3]×[−1/3,0] whose interface sides are
//!   subdivided to match the square lattice (6r+2 edges).  K_L is the last
//!   cell and the target of the `--enrich` bubble.
//! * `pegboard` — r×r blocks, each holding a circular hole boundary: a
//!   two-edge "bigon" disk cell plus two 6-edge half-washers (block minus
//!   half-disk, cut along the horizontal centerline).  Disk radius is
//!   ρ·(block half-width), default ρ = 0.35.
//! * `shuriken` — r×r blocks whose interior lattice edges are sinusoidally
//!   perturbed segments (two half-waves, amplitude α·edge length, default
//!   α = 0.25); boundary edges stay straight.
//! * `jigsaw` — r×r blocks whose interior sides carry a semicircular tab
//!   (diameter `tab`·side, default 0.3): straight–arc–straight, vertical
//!   tabs bulging east and horizontal tabs north, giving puzzle-piece cells.
//! * `ptriangle` — r² blocks split into two curvilinear triangles by the
//!   circular arc through the block's off-diagonal corners with center at
//!   (−a,−a) in block coordinates (default a = 1, radius √5·side).
//!
//! Vertices are numbered lexicographically by (y, x); edge ids sort by
//! (v0, v1).  Translated congruent cells therefore produce structurally
//! identical loops, which the assembly's congruence cache relies on.

use super::{Cell, CurveSpec, Edge, LoopStep, Mesh, Pt};

/// Mesh family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Square,
    Lshape,
    Pegboard,
    Shuriken,
    Jigsaw,
    Ptriangle,
}

impl std::str::FromStr for Family {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Family> {
        Ok(match s {
            "square" => Family::Square,
            "lshape" => Family::Lshape,
            "pegboard" => Family::Pegboard,
            "shuriken" => Family::Shuriken,
            "jigsaw" => Family::Jigsaw,
            "ptriangle" => Family::Ptriangle,
            other => {
                return Err(crate::Error::Config(format!(
                    "unknown family '{other}' (square|lshape|pegboard|shuriken|jigsaw|ptriangle)"
                )))
            }
        })
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Square => "square",
            Family::Lshape => "lshape",
            Family::Pegboard => "pegboard",
            Family::Shuriken => "shuriken",
            Family::Jigsaw => "jigsaw",
            Family::Ptriangle => "ptriangle",
        };
        f.write_str(s)
    }
}

/// Geometry parameters of the families (each used by one family only).
#[derive(Debug, Clone, Copy)]
pub struct FamilyParams {
    /// Pegboard hole radius as a fraction of the block half-width, in (0, ½).
    pub pegboard_rho: f64,
    /// Shuriken sine amplitude as a fraction of the edge length.
    pub shuriken_alpha: f64,
    /// Shuriken half-wave count.
    pub shuriken_halfwaves: u32,
    /// Jigsaw tab diameter as a fraction of the side length, in (0, 1).
    pub jigsaw_tab: f64,
    /// Perturbed-triangle center offset `a > 0`.
    pub ptriangle_a: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            pegboard_rho: 0.35,
            shuriken_alpha: 0.25,
            shuriken_halfwaves: 2,
            jigsaw_tab: 0.3,
            ptriangle_a: 1.0,
        }
    }
}

/// Generate a mesh of the given family at refinement `r`.
pub fn mesh_generate(family: Family, r: usize, params: &FamilyParams) -> crate::Result<Mesh> {
    if r < 1 {
        return Err(crate::Error::Config("mesh parameter r must be ≥ 1".into()));
    }
    let mesh = match family {
        Family::Square => square(r),
        Family::Lshape => lshape(r),
        Family::Pegboard => {
            if !(params.pegboard_rho > 0.0 && params.pegboard_rho < 0.5) {
                return Err(crate::Error::Config("pegboard rho must lie in (0, 1/2)".into()));
            }
            pegboard(r, params.pegboard_rho)
        }
        Family::Shuriken => {
            if params.shuriken_halfwaves == 0 || params.shuriken_alpha < 0.0 {
                return Err(crate::Error::Config("shuriken needs halfwaves ≥ 1, alpha ≥ 0".into()));
            }
            shuriken(r, params.shuriken_alpha, params.shuriken_halfwaves)
        }
        Family::Jigsaw => {
            if !(params.jigsaw_tab > 0.0 && params.jigsaw_tab < 1.0) {
                return Err(crate::Error::Config("jigsaw tab must lie in (0, 1)".into()));
            }
            jigsaw(r, params.jigsaw_tab)
        }
        Family::Ptriangle => {
            if params.ptriangle_a <= 0.0 {
                return Err(crate::Error::Config("ptriangle a must be positive".into()));
            }
            ptriangle(r, params.ptriangle_a)
        }
    };
    Ok(mesh)
}

/// Accumulates vertices/edges/cells with temporary ids, then renumbers:
/// vertices lexicographically by (y, x), edges by (v0, v1, creation order).
struct Builder {
    verts: Vec<Pt>,
    edges: Vec<(usize, usize, CurveSpec)>,
    cells: Vec<Vec<(usize, bool)>>,
}

impl Builder {
    fn new() -> Builder {
        Builder { verts: Vec::new(), edges: Vec::new(), cells: Vec::new() }
    }

    fn vertex(&mut self, p: Pt) -> usize {
        self.verts.push(p);
        self.verts.len() - 1
    }

    fn edge(&mut self, v0: usize, v1: usize, curve: CurveSpec) -> usize {
        self.edges.push((v0, v1, curve));
        self.edges.len() - 1
    }

    fn line(&mut self, v0: usize, v1: usize) -> usize {
        let curve = CurveSpec::Line { a: self.verts[v0], b: self.verts[v1] };
        self.edge(v0, v1, curve)
    }

    fn cell(&mut self, steps: Vec<(usize, bool)>) {
        self.cells.push(steps);
    }

    fn finish(self) -> Mesh {
        let nv = self.verts.len();
        let mut vorder: Vec<usize> = (0..nv).collect();
        vorder.sort_by(|&a, &b| {
            let (pa, pb) = (self.verts[a], self.verts[b]);
            pa.y.total_cmp(&pb.y).then(pa.x.total_cmp(&pb.x))
        });
        let mut vmap = vec![0usize; nv];
        for (rank, &old) in vorder.iter().enumerate() {
            vmap[old] = rank;
        }
        let vertices: Vec<Pt> = vorder.iter().map(|&old| self.verts[old]).collect();
        let ne = self.edges.len();
        let mut eorder: Vec<usize> = (0..ne).collect();
        eorder.sort_by_key(|&k| (vmap[self.edges[k].0], vmap[self.edges[k].1], k));
        let mut emap = vec![0usize; ne];
        for (rank, &old) in eorder.iter().enumerate() {
            emap[old] = rank;
        }
        let edges: Vec<Edge> = eorder
            .iter()
            .enumerate()
            .map(|(id, &old)| {
                let (v0, v1, ref curve) = self.edges[old];
                Edge { id, v0: vmap[v0], v1: vmap[v1], curve: curve.clone() }
            })
            .collect();
        let cells: Vec<Cell> = self
            .cells
            .into_iter()
            .enumerate()
            .map(|(id, steps)| Cell {
                id,
                steps: steps
                    .into_iter()
                    .map(|(e, forward)| LoopStep { edge: emap[e], forward })
                    .collect(),
            })
            .collect();
        Mesh { vertices, edges, cells }
    }
}

fn square(r: usize) -> Mesh {
    let mut b = Builder::new();
    let h = 1.0 / r as f64;
    let vid = |i: usize, j: usize| j * (r + 1) + i;
    for j in 0..=r {
        for i in 0..=r {
            b.vertex(Pt::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut hedge = vec![vec![0usize; r + 1]; r];
    let mut vedge = vec![vec![0usize; r]; r + 1];
    for j in 0..=r {
        for i in 0..r {
            hedge[i][j] = b.line(vid(i, j), vid(i + 1, j));
        }
    }
    for j in 0..r {
        for i in 0..=r {
            vedge[i][j] = b.line(vid(i, j), vid(i, j + 1));
        }
    }
    for bj in 0..r {
        for bi in 0..r {
            b.cell(vec![
                (hedge[bi][bj], true),
                (vedge[bi + 1][bj], true),
                (hedge[bi][bj + 1], false),
                (vedge[bi][bj], false),
            ]);
        }
    }
    b.finish()
}

fn lshape(r: usize) -> Mesh {
    let mut b = Builder::new();
    let n = 6 * r; // lattice cells per direction over (−1,1)²
    let coord = |k: usize| (k as f64 - (3 * r) as f64) / (3 * r) as f64;
    let in_omega = |i: usize, j: usize| !(i >= 3 * r && j < 3 * r);
    let in_core = |i: usize, j: usize| {
        (2 * r..4 * r).contains(&i) && (2 * r..4 * r).contains(&j) && in_omega(i, j)
    };
    let ring = |i: isize, j: isize| {
        i >= 0
            && j >= 0
            && (i as usize) < n
            && (j as usize) < n
            && in_omega(i as usize, j as usize)
            && !in_core(i as usize, j as usize)
    };
    // Vertices: lattice points touching a ring cell, plus the re-entrant
    // corner (0,0) which only K_L and the domain boundary touch.
    let mut vids = vec![vec![usize::MAX; n + 1]; n + 1];
    for j in 0..=n {
        for i in 0..=n {
            let (ii, jj) = (i as isize, j as isize);
            let used = ring(ii - 1, jj - 1)
                || ring(ii, jj - 1)
                || ring(ii - 1, jj)
                || ring(ii, jj)
                || (i == 3 * r && j == 3 * r);
            if used {
                vids[i][j] = b.vertex(Pt::new(coord(i), coord(j)));
            }
        }
    }
    // Unit lattice edges bordering at least one ring cell.
    let mut hedge = vec![vec![usize::MAX; n + 1]; n];
    let mut vedge = vec![vec![usize::MAX; n]; n + 1];
    for j in 0..=n {
        for i in 0..n {
            if ring(i as isize, j as isize - 1) || ring(i as isize, j as isize) {
                hedge[i][j] = b.line(vids[i][j], vids[i + 1][j]);
            }
        }
    }
    for j in 0..n {
        for i in 0..=n {
            if ring(i as isize - 1, j as isize) || ring(i as isize, j as isize) {
                vedge[i][j] = b.line(vids[i][j], vids[i][j + 1]);
            }
        }
    }
    // The core cell's two undivided boundary sides along ∂Ω.
    let long_bottom = b.line(vids[3 * r][3 * r], vids[4 * r][3 * r]); // (0,0) → (1/3,0)
    let long_left = b.line(vids[3 * r][2 * r], vids[3 * r][3 * r]); // (0,−1/3) → (0,0)
    // Ring cells in lattice order.
    for j in 0..n {
        for i in 0..n {
            if ring(i as isize, j as isize) {
                b.cell(vec![
                    (hedge[i][j], true),
                    (vedge[i + 1][j], true),
                    (hedge[i][j + 1], false),
                    (vedge[i][j], false),
                ]);
            }
        }
    }
    // K_L last: CCW from the re-entrant corner (0,0).
    let mut steps = vec![(long_bottom, true)];
    for k in 0..r {
        steps.push((vedge[4 * r][3 * r + k], true));
    }
    for k in 0..2 * r {
        steps.push((hedge[4 * r - 1 - k][4 * r], false));
    }
    for k in 0..2 * r {
        steps.push((vedge[2 * r][4 * r - 1 - k], false));
    }
    for k in 0..r {
        steps.push((hedge[2 * r + k][2 * r], true));
    }
    steps.push((long_left, true));
    b.cell(steps);
    b.finish()
}

fn pegboard(r: usize, rho: f64) -> Mesh {
    let mut b = Builder::new();
    let h = 1.0 / r as f64;
    let rad = 0.5 * rho * h;
    let pi = std::f64::consts::PI;
    let mut corner = vec![vec![0usize; r + 1]; r + 1];
    for j in 0..=r {
        for i in 0..=r {
            corner[i][j] = b.vertex(Pt::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut mid = vec![vec![0usize; r]; r + 1]; // vertical-side midpoints
    for bj in 0..r {
        for i in 0..=r {
            mid[i][bj] = b.vertex(Pt::new(i as f64 * h, (bj as f64 + 0.5) * h));
        }
    }
    let mut hedge = vec![vec![0usize; r + 1]; r];
    for j in 0..=r {
        for i in 0..r {
            hedge[i][j] = b.line(corner[i][j], corner[i + 1][j]);
        }
    }
    let mut vlo = vec![vec![0usize; r]; r + 1];
    let mut vhi = vec![vec![0usize; r]; r + 1];
    for bj in 0..r {
        for i in 0..=r {
            vlo[i][bj] = b.line(corner[i][bj], mid[i][bj]);
            vhi[i][bj] = b.line(mid[i][bj], corner[i][bj + 1]);
        }
    }
    for bj in 0..r {
        for bi in 0..r {
            let c = Pt::new((bi as f64 + 0.5) * h, (bj as f64 + 0.5) * h);
            let west = b.vertex(Pt::new(c.x - rad, c.y));
            let east = b.vertex(Pt::new(c.x + rad, c.y));
            let arc_hi = b.edge(
                east,
                west,
                CurveSpec::CircularArc { center: c, radius: rad, theta0: 0.0, theta1: pi },
            );
            let arc_lo = b.edge(
                west,
                east,
                CurveSpec::CircularArc { center: c, radius: rad, theta0: pi, theta1: 2.0 * pi },
            );
            let segl = b.line(mid[bi][bj], west);
            let segr = b.line(east, mid[bi + 1][bj]);
            // Disk (bigon), then the two half-washers.
            b.cell(vec![(arc_lo, true), (arc_hi, true)]);
            b.cell(vec![
                (segr, false),
                (arc_lo, false),
                (segl, false),
                (vlo[bi][bj], false),
                (hedge[bi][bj], true),
                (vlo[bi + 1][bj], true),
            ]);
            b.cell(vec![
                (segl, true),
                (arc_hi, false),
                (segr, true),
                (vhi[bi + 1][bj], true),
                (hedge[bi][bj + 1], false),
                (vhi[bi][bj], false),
            ]);
        }
    }
    b.finish()
}

fn shuriken(r: usize, alpha: f64, halfwaves: u32) -> Mesh {
    let mut b = Builder::new();
    let h = 1.0 / r as f64;
    let amplitude = alpha * h;
    let mut corner = vec![vec![0usize; r + 1]; r + 1];
    for j in 0..=r {
        for i in 0..=r {
            corner[i][j] = b.vertex(Pt::new(i as f64 * h, j as f64 * h));
        }
    }
    let sine = |a: Pt, bb: Pt| CurveSpec::SinePerturbedLine { a, b: bb, amplitude, halfwaves };
    let mut hedge = vec![vec![0usize; r + 1]; r];
    for j in 0..=r {
        for i in 0..r {
            let (v0, v1) = (corner[i][j], corner[i + 1][j]);
            hedge[i][j] = if j == 0 || j == r {
                b.line(v0, v1)
            } else {
                let c = sine(b.verts[v0], b.verts[v1]);
                b.edge(v0, v1, c)
            };
        }
    }
    let mut vedge = vec![vec![0usize; r]; r + 1];
    for j in 0..r {
        for i in 0..=r {
            let (v0, v1) = (corner[i][j], corner[i][j + 1]);
            vedge[i][j] = if i == 0 || i == r {
                b.line(v0, v1)
            } else {
                let c = sine(b.verts[v0], b.verts[v1]);
                b.edge(v0, v1, c)
            };
        }
    }
    for bj in 0..r {
        for bi in 0..r {
            b.cell(vec![
                (hedge[bi][bj], true),
                (vedge[bi + 1][bj], true),
                (hedge[bi][bj + 1], false),
                (vedge[bi][bj], false),
            ]);
        }
    }
    b.finish()
}

fn jigsaw(r: usize, tab: f64) -> Mesh {
    let mut b = Builder::new();
    let h = 1.0 / r as f64;
    let t1 = 0.5 * (1.0 - tab);
    let t2 = 0.5 * (1.0 + tab);
    let rad = 0.5 * tab * h;
    let pi = std::f64::consts::PI;
    let mut corner = vec![vec![0usize; r + 1]; r + 1];
    for j in 0..=r {
        for i in 0..=r {
            corner[i][j] = b.vertex(Pt::new(i as f64 * h, j as f64 * h));
        }
    }
    // An interior side is straight–tab–straight (3 edges); boundary sides
    // are single straight edges.  Tabs: vertical sides bulge east,
    // horizontal sides north.
    #[derive(Clone, Copy)]
    struct Side3 {
        seg1: usize,
        arc: usize,
        seg2: usize,
    }
    enum Side {
        Straight(usize),
        Tabbed(Side3),
    }
    let mut hside: Vec<Vec<Option<Side>>> = (0..r).map(|_| (0..=r).map(|_| None).collect()).collect();
    let mut vside: Vec<Vec<Option<Side>>> =
        (0..=r).map(|_| (0..r).map(|_| None).collect()).collect();
    for j in 0..=r {
        for i in 0..r {
            let side = if j == 0 || j == r {
                Side::Straight(b.line(corner[i][j], corner[i + 1][j]))
            } else {
                let y = j as f64 * h;
                let p1 = b.vertex(Pt::new((i as f64 + t1) * h, y));
                let p2 = b.vertex(Pt::new((i as f64 + t2) * h, y));
                let c = Pt::new((i as f64 + 0.5) * h, y);
                let seg1 = b.line(corner[i][j], p1);
                let arc = b.edge(
                    p1,
                    p2,
                    CurveSpec::CircularArc { center: c, radius: rad, theta0: pi, theta1: 0.0 },
                );
                let seg2 = b.line(p2, corner[i + 1][j]);
                Side::Tabbed(Side3 { seg1, arc, seg2 })
            };
            hside[i][j] = Some(side);
        }
    }
    for j in 0..r {
        for i in 0..=r {
            let side = if i == 0 || i == r {
                Side::Straight(b.line(corner[i][j], corner[i][j + 1]))
            } else {
                let x = i as f64 * h;
                let p1 = b.vertex(Pt::new(x, (j as f64 + t1) * h));
                let p2 = b.vertex(Pt::new(x, (j as f64 + t2) * h));
                let c = Pt::new(x, (j as f64 + 0.5) * h);
                let seg1 = b.line(corner[i][j], p1);
                let arc = b.edge(
                    p1,
                    p2,
                    CurveSpec::CircularArc {
                        center: c,
                        radius: rad,
                        theta0: -0.5 * pi,
                        theta1: 0.5 * pi,
                    },
                );
                let seg2 = b.line(p2, corner[i][j + 1]);
                Side::Tabbed(Side3 { seg1, arc, seg2 })
            };
            vside[i][j] = Some(side);
        }
    }
    let push_side = |steps: &mut Vec<(usize, bool)>, side: &Side, forward: bool| match side {
        Side::Straight(e) => steps.push((*e, forward)),
        Side::Tabbed(s) => {
            if forward {
                steps.push((s.seg1, true));
                steps.push((s.arc, true));
                steps.push((s.seg2, true));
            } else {
                steps.push((s.seg2, false));
                steps.push((s.arc, false));
                steps.push((s.seg1, false));
            }
        }
    };
    for bj in 0..r {
        for bi in 0..r {
            let mut steps = Vec::new();
            push_side(&mut steps, hside[bi][bj].as_ref().unwrap(), true);
            push_side(&mut steps, vside[bi + 1][bj].as_ref().unwrap(), true);
            push_side(&mut steps, hside[bi][bj + 1].as_ref().unwrap(), false);
            push_side(&mut steps, vside[bi][bj].as_ref().unwrap(), false);
            b.cell(steps);
        }
    }
    b.finish()
}

fn ptriangle(r: usize, a: f64) -> Mesh {
    let mut b = Builder::new();
    let h = 1.0 / r as f64;
    let radius = (a * a + (1.0 + a) * (1.0 + a)).sqrt() * h;
    let theta0 = a.atan2(1.0 + a);
    let theta1 = (1.0 + a).atan2(a);
    let mut corner = vec![vec![0usize; r + 1]; r + 1];
    for j in 0..=r {
        for i in 0..=r {
            corner[i][j] = b.vertex(Pt::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut hedge = vec![vec![0usize; r + 1]; r];
    for j in 0..=r {
        for i in 0..r {
            hedge[i][j] = b.line(corner[i][j], corner[i + 1][j]);
        }
    }
    let mut vedge = vec![vec![0usize; r]; r + 1];
    for j in 0..r {
        for i in 0..=r {
            vedge[i][j] = b.line(corner[i][j], corner[i][j + 1]);
        }
    }
    for bj in 0..r {
        for bi in 0..r {
            let center = Pt::new((bi as f64 - a) * h, (bj as f64 - a) * h);
            let arc = b.edge(
                corner[bi + 1][bj],
                corner[bi][bj + 1],
                CurveSpec::CircularArc { center, radius, theta0, theta1 },
            );
            // Lower-left triangle, then upper-right.
            b.cell(vec![(hedge[bi][bj], true), (arc, true), (vedge[bi][bj], false)]);
            b.cell(vec![(vedge[bi + 1][bj], true), (hedge[bi][bj + 1], false), (arc, false)]);
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{all_edge_grids, boundary_grid, mesh_validate, KressParams};

    fn total_area(mesh: &Mesh, n: usize) -> f64 {
        let grids = all_edge_grids(mesh, KressParams { n_per_edge: n, q: 7 });
        (0..mesh.cells.len()).map(|c| boundary_grid(mesh, c, &grids).area).sum()
    }

    #[test]
    fn all_families_validate_and_tile_their_domains() {
        let params = FamilyParams::default();
        let cases = [
            (Family::Square, 3, 1.0),
            (Family::Lshape, 2, 3.0),
            (Family::Pegboard, 2, 1.0),
            (Family::Shuriken, 3, 1.0),
            (Family::Jigsaw, 3, 1.0),
            (Family::Ptriangle, 2, 1.0),
        ];
        for (family, r, want_area) in cases {
            let mesh = mesh_generate(family, r, &params).unwrap();
            let report = mesh_validate(&mesh);
            assert!(report.is_empty(), "{family} r={r}: {report:?}");
            let area = total_area(&mesh, 32);
            assert!(
                (area - want_area).abs() < 1e-8,
                "{family} r={r}: area {area} vs {want_area}"
            );
        }
    }

    #[test]
    fn pegboard_counts_match_the_reference_example() {
        let mesh = mesh_generate(Family::Pegboard, 4, &FamilyParams::default()).unwrap();
        let bigons = mesh.cells.iter().filter(|c| c.n_edges() == 2).count();
        let washers = mesh.cells.iter().filter(|c| c.n_edges() == 6).count();
        assert_eq!(bigons, 16);
        assert_eq!(washers, 32);
        assert_eq!(mesh.cells.len(), 48);
    }

    #[test]
    fn lshape_core_cell_structure() {
        for r in [1usize, 2, 3] {
            let mesh = mesh_generate(Family::Lshape, r, &FamilyParams::default()).unwrap();
            assert_eq!(mesh.cells.len(), 24 * r * r + 1);
            let core = mesh.cells.last().unwrap();
            assert_eq!(core.n_edges(), 6 * r + 2, "core edge count at r={r}");
            // Exactly 3 core vertices lie on the domain boundary.
            let bv = mesh.boundary_vertices();
            let on_boundary = core
                .steps
                .iter()
                .filter(|&&s| bv[mesh.step_start(s)])
                .count();
            assert_eq!(on_boundary, 3, "core ∂Ω vertices at r={r}");
            // The core is the unique cell with the most edges (the --enrich target).
            let max_edges = mesh.cells.iter().map(|c| c.n_edges()).max().unwrap();
            assert_eq!(max_edges, core.n_edges());
            assert_eq!(
                mesh.cells.iter().filter(|c| c.n_edges() == max_edges).count(),
                1
            );
        }
    }

    #[test]
    fn shuriken_boundary_edges_are_straight() {
        let mesh = mesh_generate(Family::Shuriken, 3, &FamilyParams::default()).unwrap();
        for (e, &is_b) in mesh.edges.iter().zip(&mesh.boundary_edges()) {
            if is_b {
                assert!(matches!(e.curve, CurveSpec::Line { .. }));
            } else {
                assert!(matches!(e.curve, CurveSpec::SinePerturbedLine { .. }));
            }
        }
    }

    #[test]
    fn jigsaw_interior_sides_have_tabs() {
        let mesh = mesh_generate(Family::Jigsaw, 2, &FamilyParams::default()).unwrap();
        // r=2: one interior lattice line each way, 2 sides each, 3 edges per
        // side; boundary: 2·4 straight sides.
        let arcs = mesh
            .edges
            .iter()
            .filter(|e| matches!(e.curve, CurveSpec::CircularArc { .. }))
            .count();
        assert_eq!(arcs, 4);
        assert_eq!(mesh.cells.len(), 4);
        for c in &mesh.cells {
            // Two straight boundary sides + two tabbed sides (3 edges each).
            assert_eq!(c.n_edges(), 8);
        }
    }

    #[test]
    fn ptriangle_reference_arc_passes_through_offdiagonal_corners() {
        let mesh = mesh_generate(Family::Ptriangle, 1, &FamilyParams::default()).unwrap();
        assert_eq!(mesh.cells.len(), 2);
        let arc = mesh
            .edges
            .iter()
            .find(|e| matches!(e.curve, CurveSpec::CircularArc { .. }))
            .unwrap();
        use crate::geometry::Curve;
        assert!(arc.curve.position(0.0).dist(Pt::new(1.0, 0.0)) < 1e-12);
        assert!(arc.curve.position(1.0).dist(Pt::new(0.0, 1.0)) < 1e-12);
        if let CurveSpec::CircularArc { center, radius, .. } = arc.curve {
            assert!(center.dist(Pt::new(-1.0, -1.0)) < 1e-12);
            assert!((radius - 5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_numbering_is_lexicographic() {
        let mesh = mesh_generate(Family::Square, 2, &FamilyParams::default()).unwrap();
        for w in mesh.vertices.windows(2) {
            assert!(w[0].y < w[1].y || (w[0].y == w[1].y && w[0].x < w[1].x));
        }
        for w in mesh.edges.windows(2) {
            assert!((w[0].v0, w[0].v1) <= (w[1].v0, w[1].v1));
        }
    }
}
