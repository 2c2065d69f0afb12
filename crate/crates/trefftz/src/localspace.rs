//! Local Trefftz spaces `V_p(K)` and their element matrices.
//!
//! On a curvilinear polygon K the local space splits as
//!
//! ```text
//! V_p(K) = V_p^K(K) ⊕ V_p^∂K(K),
//! ```
//!
//! where the boundary part consists of harmonic functions with edgewise
//! polynomial traces (one function per cell vertex, plus endpoint-vanishing
//! functions per edge) and the interior part of "bubbles"
//! φ_α = ψ_α + q_α with q_α = Λ((x−z)^α) an anti-Laplacian, ψ_α harmonic
//! with trace −q_α, so that φ_α vanishes on ∂K and Δφ_α = (x−z)^α.  The
//! dimension is
//!
//! ```text
//! dim V_p(K) = C(p,2) + Σ_e dim P_p(e) − #edges.
//! ```
//!
//! Nothing here is known in closed form; each basis function is realized by
//! the trace of its harmonic part together with the trace of its harmonic
//! *conjugate* (solved once per cell by [`ConjugateSolver`]), plus an
//! explicit polynomial part for bubbles.  Every element integral then
//! reduces to a boundary integral:
//!
//! * harmonic × harmonic stiffness: ∫∇ψ_i·∇ψ_j = ∮(∂ψ_i/∂n)ψ_j ds with
//!   ∂ψ_i/∂n = ∂v_i/∂t, integrated by parts to −∮v_i (∂ψ_j/∂t) ds so only
//!   the *analytic* tangential derivative of the trace polynomial and the
//!   solved conjugate values enter — no numerical differentiation;
//! * harmonic × bubble stiffness: exactly 0 (the bubble has zero trace and
//!   the other factor is harmonic), assembled as such;
//! * bubble × bubble stiffness: ∫∇φ_α·∇φ_β = −∫(Δφ_α)φ_β with
//!   Δφ_α = (x−z)^α polynomial; the polynomial×polynomial piece reduces by
//!   ∫_K P dx = ∮∂Λ(P)/∂n ds and the polynomial×harmonic piece by Green's
//!   second identity plus one more integration by parts to eliminate
//!   ∂ψ/∂n in favor of the conjugate values;
//! * loads ∫fφ with polynomial f reduce the same two ways.
//!
//! The same machinery provides the enrichment bubble φ with Δφ = −1 used on
//! cells that do not shrink under refinement; it is L²(∇)-orthogonal to
//! every harmonic function, so enabling it only appends one decoupled
//! diagonal entry to the element matrix.

use crate::bie::{cauchy_eval, ConjugateSolver};
use crate::edgespace::{build_edge_basis, ArcPolyBasis, EdgeBasis, PivotVariant};
use crate::geometry::{BoundaryGrid, EdgeGrid, Mesh, Pt};
use crate::linalg::{DenseMat, Plu};
use crate::polynomial::Poly2;
use std::sync::Arc;

/// Which per-edge trace family the boundary part of the space uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    /// Polynomials in normalized arc length along each edge; the trace
    /// space always has dimension p+1 regardless of the edge's shape.
    Type1,
    /// Restrictions of bivariate polynomials to each edge; the dimension
    /// adapts to the algebraic degree of the edge curve.
    Type2,
}

/// The trace basis of one mesh edge, shared by its adjacent cells.
///
/// Functions 0 and 1 are the endpoint hats (1 at v0 resp. v1 of the stored
/// edge); the rest vanish at both endpoints.  For [`TraceBasis::Poly`] the
/// functions are bivariate polynomials, so both adjacent cells see the same
/// point values without any orientation convention; for [`TraceBasis::Arc`]
/// both cells evaluate in the stored edge's arc-length parameter.
#[derive(Debug, Clone)]
pub enum TraceBasis {
    Arc(ArcPolyBasis),
    Poly(EdgeBasis),
}

impl TraceBasis {
    /// Trace-space dimension on this edge.
    pub fn dim(&self) -> usize {
        match self {
            TraceBasis::Arc(b) => b.len(),
            TraceBasis::Poly(b) => b.dim(),
        }
    }

    /// Number of endpoint-vanishing basis functions.
    pub fn interior_dim(&self) -> usize {
        self.dim() - 2
    }
}

/// Build the shared per-edge trace bases of a mesh.
///
/// For [`ElementType::Type2`] each edge gets a pivoted selection from the
/// hierarchical spanning set over its own quadrature grid (drop tolerance
/// `tau`, pivot `variant`); [`ElementType::Type1`] ignores both and uses
/// the arc-length polynomial basis.
pub fn build_trace_bases(
    mesh: &Mesh,
    grids: &[Arc<EdgeGrid>],
    p: usize,
    etype: ElementType,
    tau: f64,
    variant: PivotVariant,
) -> Vec<TraceBasis> {
    match etype {
        ElementType::Type1 => {
            let b = ArcPolyBasis::new(p);
            mesh.edges.iter().map(|_| TraceBasis::Arc(b.clone())).collect()
        }
        ElementType::Type2 => mesh
            .edges
            .iter()
            .map(|e| {
                let z0 = mesh.vertices[e.v0];
                let z1 = mesh.vertices[e.v1];
                TraceBasis::Poly(build_edge_basis(z0, z1, &grids[e.id], p, tau, variant))
            })
            .collect(),
    }
}

/// What a local basis function is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// The hat of the cell corner starting loop slot `slot`.
    Vertex { slot: usize, vertex: usize },
    /// Endpoint-vanishing trace function `index` (0-based among that
    /// edge's interior functions) on loop slot `slot`.
    EdgeFn { slot: usize, edge: usize, index: usize },
    /// Interior bubble with Δφ = (x−z)^(ax,ay).
    Bubble { ax: u32, ay: u32 },
    /// Interior bubble with Δφ = −1.
    Enrichment,
}

/// One member of the local basis, realized by boundary data.
///
/// `trace` and `conj` are the node values of the harmonic part ψ and its
/// mean-zero conjugate; `g_dt` is the analytic tangential (arc-length)
/// derivative of `trace` along the traversal.  For vertex and edge
/// functions ψ is the whole function and `poly` is zero; for bubbles the
/// function is ψ + `poly` and `trace` = −`poly` on ∂K, so the sum has zero
/// trace.
#[derive(Debug, Clone)]
pub struct LocalBasisFn {
    pub kind: BasisKind,
    pub trace: Vec<f64>,
    pub g_dt: Vec<f64>,
    pub conj: Vec<f64>,
    pub poly: Poly2,
}

/// The assembled local space of one cell.
#[derive(Debug, Clone)]
pub struct LocalSpace {
    pub cell: usize,
    pub p: usize,
    pub etype: ElementType,
    /// Number of leading harmonic (vertex + edge) functions; the rest are
    /// bubbles, with the enrichment bubble last when present.
    pub n_harmonic: usize,
    pub enriched: bool,
    pub fns: Vec<LocalBasisFn>,
}

impl LocalSpace {
    pub fn dim(&self) -> usize {
        self.fns.len()
    }

    /// Evaluate Σ c_i φ_i at an interior point by one Cauchy integral over
    /// the combined harmonic data plus the combined polynomial part.
    pub fn eval_combination(&self, grid: &BoundaryGrid, c: &[f64], z: Pt) -> f64 {
        assert_eq!(c.len(), self.fns.len());
        let n = grid.n_nodes;
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut poly = Poly2::zero(grid.centroid);
        for (ci, f) in c.iter().zip(&self.fns) {
            if *ci == 0.0 {
                continue;
            }
            for k in 0..n {
                u[k] += ci * f.trace[k];
                v[k] += ci * f.conj[k];
            }
            if f.poly.max_abs_coeff() != 0.0 {
                poly = poly.axpy(*ci, &f.poly);
            }
        }
        cauchy_eval(grid, &u, &v, z, 0).re + poly.eval(z)
    }
}

/// Tangential (traversal arc-length) derivative of a trace polynomial at
/// the nodes of one loop slot.
fn poly_trace(grid: &BoundaryGrid, slot: usize, f: &Poly2, trace: &mut [f64], g_dt: &mut [f64]) {
    for i in grid.edge_range(slot) {
        trace[i] = f.eval(grid.x[i]);
        g_dt[i] = f.grad_at(grid.x[i]).dot(grid.tangent[i]);
    }
}

/// Same for an arc-length polynomial on the stored edge parameter.
fn arc_trace(
    grid: &BoundaryGrid,
    slot: usize,
    basis: &ArcPolyBasis,
    k: usize,
    trace: &mut [f64],
    g_dt: &mut [f64],
) {
    let len = grid.edge_len[slot];
    let sign = if grid.forward[slot] { 1.0 } else { -1.0 };
    for i in grid.edge_range(slot) {
        let s = grid.edge_arclen[i] / len;
        trace[i] = basis.eval(k, s);
        g_dt[i] = sign * basis.deriv(k, s) / len;
    }
}

/// Hat-function index on `slot` for the corner at its start (`end = false`)
/// or end (`end = true`), accounting for the traversal direction.
pub(crate) fn hat_index(grid: &BoundaryGrid, slot: usize, end: bool) -> usize {
    if grid.forward[slot] == !end {
        0
    } else {
        1
    }
}

/// Build the local space of one cell: traces and analytic tangential
/// derivatives for every basis function, then all harmonic conjugates in
/// one batched solve.
///
/// `bases` is indexed by mesh edge id ([`build_trace_bases`]); `solver`
/// must have been factored on `grid`.  With `enrich` the Δφ = −1 interior
/// bubble is appended as the last basis function.
pub fn build_local_space(
    grid: &BoundaryGrid,
    solver: &ConjugateSolver,
    bases: &[TraceBasis],
    p: usize,
    enrich: bool,
) -> LocalSpace {
    assert_eq!(solver.n_nodes, grid.n_nodes);
    let n = grid.n_nodes;
    let ne = grid.n_edges;
    let etype = match &bases[grid.edge_ids[0]] {
        TraceBasis::Arc(_) => ElementType::Type1,
        TraceBasis::Poly(_) => ElementType::Type2,
    };
    let mut kinds = Vec::new();
    let mut traces: Vec<Vec<f64>> = Vec::new();
    let mut g_dts: Vec<Vec<f64>> = Vec::new();
    let mut polys: Vec<Poly2> = Vec::new();
    let zero = Poly2::zero(grid.centroid);

    // Vertex hats: on the two adjacent slots, zero elsewhere.
    for slot in 0..ne {
        let prev = (slot + ne - 1) % ne;
        let mut trace = vec![0.0; n];
        let mut g_dt = vec![0.0; n];
        for (sl, end) in [(slot, false), (prev, true)] {
            match &bases[grid.edge_ids[sl]] {
                TraceBasis::Poly(b) => {
                    let f = b.function(hat_index(grid, sl, end)).clone();
                    poly_trace(grid, sl, &f, &mut trace, &mut g_dt);
                }
                TraceBasis::Arc(b) => {
                    arc_trace(grid, sl, b, hat_index(grid, sl, end), &mut trace, &mut g_dt);
                }
            }
        }
        kinds.push(BasisKind::Vertex { slot, vertex: grid.corner_vertex[slot] });
        traces.push(trace);
        g_dts.push(g_dt);
        polys.push(zero.clone());
    }

    // Endpoint-vanishing edge functions, supported on a single slot.
    for slot in 0..ne {
        let edge = grid.edge_ids[slot];
        let tb = &bases[edge];
        for index in 0..tb.interior_dim() {
            let mut trace = vec![0.0; n];
            let mut g_dt = vec![0.0; n];
            match tb {
                TraceBasis::Poly(b) => {
                    let f = b.function(2 + index).clone();
                    poly_trace(grid, slot, &f, &mut trace, &mut g_dt);
                }
                TraceBasis::Arc(b) => {
                    arc_trace(grid, slot, b, 2 + index, &mut trace, &mut g_dt);
                }
            }
            kinds.push(BasisKind::EdgeFn { slot, edge, index });
            traces.push(trace);
            g_dts.push(g_dt);
            polys.push(zero.clone());
        }
    }
    let n_harmonic = kinds.len();

    // Bubbles: ψ_α has trace −q_α, q_α = Λ((x−z)^α) about the centroid.
    let mut bubble = |kind: BasisKind, q: Poly2| {
        let mut trace = vec![0.0; n];
        let mut g_dt = vec![0.0; n];
        for i in 0..n {
            trace[i] = -q.eval(grid.x[i]);
            g_dt[i] = -q.grad_at(grid.x[i]).dot(grid.tangent[i]);
        }
        kinds.push(kind);
        traces.push(trace);
        g_dts.push(g_dt);
        polys.push(q);
    };
    if p >= 2 {
        for d in 0..=(p - 2) {
            for j in 0..=d {
                let m = Poly2::monomial(grid.centroid, d - j, j);
                bubble(BasisKind::Bubble { ax: (d - j) as u32, ay: j as u32 }, m.anti_laplacian());
            }
        }
    }
    if enrich {
        let m = Poly2::constant(grid.centroid, -1.0);
        bubble(BasisKind::Enrichment, m.anti_laplacian());
    }

    let conjs = solver.solve_many(&g_dts);
    let fns = kinds
        .into_iter()
        .zip(traces)
        .zip(g_dts)
        .zip(conjs)
        .zip(polys)
        .map(|((((kind, trace), g_dt), conj), poly)| LocalBasisFn { kind, trace, g_dt, conj, poly })
        .collect();
    LocalSpace { cell: grid.cell, p, etype, n_harmonic, enriched: enrich, fns }
}

/// The standalone Δφ = −1 enrichment bubble of a cell.
pub fn bubble_enrichment(grid: &BoundaryGrid, solver: &ConjugateSolver) -> LocalBasisFn {
    let q = Poly2::constant(grid.centroid, -1.0).anti_laplacian();
    let n = grid.n_nodes;
    let mut trace = vec![0.0; n];
    let mut g_dt = vec![0.0; n];
    for i in 0..n {
        trace[i] = -q.eval(grid.x[i]);
        g_dt[i] = -q.grad_at(grid.x[i]).dot(grid.tangent[i]);
    }
    let conj = solver.solve(&g_dt);
    LocalBasisFn { kind: BasisKind::Enrichment, trace, g_dt, conj, poly: q }
}

/// Element stiffness and load of one local space.
#[derive(Debug, Clone)]
pub struct LocalMatrices {
    /// Symmetrized stiffness ∫_K ∇φ_i·∇φ_j dx.
    pub a: DenseMat,
    /// Load ∫_K f φ_i dx.
    pub b: Vec<f64>,
    /// Max |A − Aᵀ| before symmetrization (quadrature-consistency
    /// diagnostic).
    pub asym: f64,
}

/// ∮ ∂Λ(P)/∂n ds = ∫_K P dx for a polynomial P, on the cell's grid.
pub fn poly_area_integral(grid: &BoundaryGrid, p: &Poly2) -> f64 {
    let q = p.anti_laplacian();
    let mut s = 0.0;
    for i in 0..grid.n_nodes {
        s += grid.weight[i] * q.grad_at(grid.x[i]).dot(grid.normal[i]);
    }
    s
}

/// ∫_K P ψ dx for polynomial P and a harmonic function given by boundary
/// data (`trace`, `conj`): Green's identity with Q = Λ(P) plus one more
/// integration by parts,
///
/// ```text
/// ∫_K P ψ dx = ∮ ψ (∇Q·n) ds + ∮ (∇Q·t) v ds.
/// ```
fn poly_harmonic_integral(grid: &BoundaryGrid, p: &Poly2, trace: &[f64], conj: &[f64]) -> f64 {
    let q = p.anti_laplacian();
    let mut s = 0.0;
    for i in 0..grid.n_nodes {
        let g = q.grad_at(grid.x[i]);
        s += grid.weight[i] * (trace[i] * g.dot(grid.normal[i]) + conj[i] * g.dot(grid.tangent[i]));
    }
    s
}

/// Element stiffness matrix (unit diffusion coefficient); returns the
/// symmetrized matrix and the pre-symmetrization asymmetry.
pub fn local_stiffness(space: &LocalSpace, grid: &BoundaryGrid) -> (DenseMat, f64) {
    let nf = space.fns.len();
    let nh = space.n_harmonic;
    let n = grid.n_nodes;
    let mut a = DenseMat::zeros(nf, nf);
    // Harmonic × harmonic: a_ij = ∮(∂ψ_i/∂n)ψ_j ds = −∮ v_i (∂ψ_j/∂t) ds.
    for i in 0..nh {
        let vi = &space.fns[i].conj;
        for j in 0..nh {
            let gj = &space.fns[j].g_dt;
            let mut s = 0.0;
            for k in 0..n {
                s -= grid.weight[k] * vi[k] * gj[k];
            }
            *a.at_mut(i, j) = s;
        }
    }
    // Harmonic × bubble blocks are exactly zero.  Bubble × bubble:
    // a_ij = −∫(Δφ_i)φ_j dx with Δφ_i = Δq_i polynomial and
    // φ_j = ψ_j + q_j.
    for i in nh..nf {
        let m_i = space.fns[i].poly.laplacian();
        for j in nh..nf {
            let fj = &space.fns[j];
            let pp = poly_area_integral(grid, &m_i.mul(&fj.poly));
            let ph = poly_harmonic_integral(grid, &m_i, &fj.trace, &fj.conj);
            *a.at_mut(i, j) = -(pp + ph);
        }
    }
    // Symmetrize; the asymmetry measures quadrature consistency.
    let mut asym: f64 = 0.0;
    for i in 0..nf {
        for j in (i + 1)..nf {
            let (u, l) = (a.at(i, j), a.at(j, i));
            asym = asym.max((u - l).abs());
            let m = 0.5 * (u + l);
            *a.at_mut(i, j) = m;
            *a.at_mut(j, i) = m;
        }
    }
    (a, asym)
}

/// Element load vector for a polynomial right-hand side f.
pub fn local_load(space: &LocalSpace, grid: &BoundaryGrid, f: &Poly2) -> Vec<f64> {
    let fc = f.recenter(grid.centroid);
    if fc.max_abs_coeff() == 0.0 {
        return vec![0.0; space.fns.len()];
    }
    space
        .fns
        .iter()
        .map(|bf| {
            let mut s = poly_harmonic_integral(grid, &fc, &bf.trace, &bf.conj);
            if bf.poly.max_abs_coeff() != 0.0 {
                s += poly_area_integral(grid, &fc.mul(&bf.poly));
            }
            s
        })
        .collect()
}

/// Stiffness and load in one call.
pub fn local_matrices(space: &LocalSpace, grid: &BoundaryGrid, f: &Poly2) -> LocalMatrices {
    let (a, asym) = local_stiffness(space, grid);
    let b = local_load(space, grid, f);
    LocalMatrices { a, b, asym }
}

/// |Σ c_i φ_i|²_{H¹(K)} = cᵀ A_K c.
pub fn h1_seminorm_sq(a: &DenseMat, c: &[f64]) -> f64 {
    assert_eq!(a.nrows, c.len());
    let mut s = 0.0;
    for i in 0..a.nrows {
        let mut row = 0.0;
        for j in 0..a.ncols {
            row += a.at(i, j) * c[j];
        }
        s += c[i] * row;
    }
    s
}

/// Coefficients of the harmonic sub-basis whose combined trace matches the
/// given boundary values: corner values fix the vertex hats, then each
/// edge's interior functions fit the remainder by weighted least squares on
/// that edge's nodes.  Bubble coefficients are zero.  The returned vector
/// has the space's full dimension.
pub fn fit_harmonic_trace(
    space: &LocalSpace,
    grid: &BoundaryGrid,
    corner_vals: &[f64],
    node_vals: &[f64],
) -> Vec<f64> {
    assert_eq!(corner_vals.len(), grid.n_edges);
    assert_eq!(node_vals.len(), grid.n_nodes);
    let mut c = vec![0.0; space.fns.len()];
    let mut resid = node_vals.to_vec();
    for (i, f) in space.fns.iter().enumerate() {
        if let BasisKind::Vertex { slot, .. } = f.kind {
            c[i] = corner_vals[slot];
            for k in 0..grid.n_nodes {
                resid[k] -= c[i] * f.trace[k];
            }
        }
    }
    // Per-slot normal equations over that edge's interior functions.
    for slot in 0..grid.n_edges {
        let idx: Vec<usize> = space
            .fns
            .iter()
            .enumerate()
            .filter_map(|(i, f)| match f.kind {
                BasisKind::EdgeFn { slot: s, .. } if s == slot => Some(i),
                _ => None,
            })
            .collect();
        if idx.is_empty() {
            continue;
        }
        let m = idx.len();
        let mut g = DenseMat::zeros(m, m);
        let mut rhs = vec![0.0; m];
        for (a, &ia) in idx.iter().enumerate() {
            let ta = &space.fns[ia].trace;
            for (b, &ib) in idx.iter().enumerate().skip(a) {
                let tb = &space.fns[ib].trace;
                let mut s = 0.0;
                for k in grid.edge_range(slot) {
                    s += grid.weight[k] * ta[k] * tb[k];
                }
                *g.at_mut(a, b) = s;
                *g.at_mut(b, a) = s;
            }
            let mut s = 0.0;
            for k in grid.edge_range(slot) {
                s += grid.weight[k] * ta[k] * resid[k];
            }
            rhs[a] = s;
        }
        let plu = Plu::factor(g).expect("edge trace Gram is singular");
        plu.solve_in_place(&mut rhs);
        for (a, &ia) in idx.iter().enumerate() {
            c[ia] = rhs[a];
        }
    }
    c
}
