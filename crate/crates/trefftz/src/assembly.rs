//! Global assembly and solution of the Poisson problem −Δu = f, u = 0.
//!
//! Degrees of freedom are numbered vertices first, then the
//! endpoint-vanishing trace functions edge by edge, then the interior
//! bubbles cell by cell, with the optional Δφ = −1 enrichment bubble last.
//! Every edge carries one shared trace basis, and interior bubbles never
//! reach the boundary, so the global space is conforming by construction
//! and no orientation bookkeeping is needed at assembly time.
//!
//! Element matrices are built once per *congruence class*: cells that are
//! translated copies of one another (all of the lattice families here)
//! share a single boundary-integral build, which is what makes the large
//! refinements affordable.  Cells with very many edges (the single
//! L-shaped element on fine meshes) get a reduced per-edge quadrature so
//! the cell total stays bounded; the pivoted edge-basis selection always
//! runs on the full-resolution edge grid, so both cells adjacent to a
//! shared edge agree on its basis no matter how their quadratures were
//! capped.
//!
//! Homogeneous Dirichlet conditions are imposed by symmetric elimination:
//! the free-dof system is SPD and is solved directly below a size cutoff
//! and by Jacobi-preconditioned conjugate gradients above it.  The
//! discrete energy |û|²_{H¹} = cᵀAc combined with a reference value of
//! |u|²_{H¹} gives the H¹ seminorm error without ever sampling the
//! solution: |u − û|² = |u|² − |û|² by Galerkin orthogonality.

use crate::bie::{boundary_functional, ConjugateSolver};
use crate::edgespace::{build_edge_basis, dim_ppe_expected, ArcPolyBasis, PivotVariant};
use crate::geometry::{
    all_edge_grids, boundary_grid, mesh_generate, BoundaryGrid, Cell, Curve, CurveSpec, EdgeGrid,
    Family, FamilyParams, KressParams, LoopStep, Mesh, Pt,
};
use crate::linalg::{
    dense_sym_extremal_eigs, gauss_legendre, lambda_max, lambda_min, pcg, Csr, DenseMat, Plu,
};
use crate::localspace::{
    build_local_space, hat_index, local_matrices, ElementType, LocalSpace, TraceBasis,
};
use crate::polynomial::{dim_p, Poly2};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

/// Discretization parameters for one assembly.
#[derive(Debug, Clone)]
pub struct AssemblyConfig {
    /// Polynomial degree p ≥ 1 of the local spaces.
    pub p: usize,
    /// Trace family: arc-length polynomials or restricted bivariate ones.
    pub etype: ElementType,
    /// Per-edge quadrature (nodes per edge and grading order).
    pub kress: KressParams,
    /// Drop tolerance for the pivoted edge-basis selection.
    pub tau: f64,
    /// Pivoting variant for the edge-basis selection.
    pub variant: PivotVariant,
    /// Cell receiving the Δφ = −1 enrichment bubble, if any.
    pub enrich_cell: Option<usize>,
    /// Constant right-hand side f.
    pub f_const: f64,
    /// Cap on the total quadrature nodes of one cell; many-edge cells
    /// reduce their per-edge count to stay under it.
    pub node_cap: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            p: 1,
            etype: ElementType::Type2,
            kress: KressParams::default(),
            tau: 1e-12,
            variant: PivotVariant::Plain,
            enrich_cell: None,
            f_const: 1.0,
            node_cap: 6500,
        }
    }
}

/// Number of endpoint-vanishing trace functions an edge contributes.
///
/// This is the dimension formula the pivoted selection is expected to
/// realize; assembly cross-checks the two and fails loudly on mismatch.
pub fn edge_interior_dim(p: usize, etype: ElementType, curve: &CurveSpec) -> usize {
    match etype {
        ElementType::Type1 => p - 1,
        ElementType::Type2 => dim_ppe_expected(p, curve) - 2,
    }
}

/// Global degree-of-freedom numbering and Dirichlet bookkeeping.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub p: usize,
    pub etype: ElementType,
    pub n_vertices: usize,
    /// Start of each edge's interior dofs; edge e owns
    /// `edge_offset[e]..edge_offset[e+1]`.
    pub edge_offset: Vec<usize>,
    /// Start of each cell's bubble dofs, same convention.
    pub cell_offset: Vec<usize>,
    /// Enrichment bubble `(cell, dof)`, numbered last.
    pub enrich: Option<(usize, usize)>,
    pub n_dofs: usize,
    /// Constrained (homogeneous Dirichlet) dofs: boundary vertices and the
    /// interior functions of boundary edges.
    pub dirichlet: Vec<bool>,
    /// Free dof ids in ascending order.
    pub free: Vec<usize>,
    /// Position of each dof in `free` (`usize::MAX` when constrained).
    pub free_index: Vec<usize>,
}

impl DofMap {
    pub fn edge_dofs(&self, e: usize) -> std::ops::Range<usize> {
        self.edge_offset[e]..self.edge_offset[e + 1]
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Global dof of each local basis function of one cell, in the local
    /// build order: vertex hats slot by slot, then edge functions slot by
    /// slot, then bubbles, then the enrichment bubble.
    pub fn cell_layout(&self, mesh: &Mesh, cell: usize) -> Vec<usize> {
        let c = &mesh.cells[cell];
        let mut out = Vec::new();
        for &s in &c.steps {
            out.push(mesh.step_start(s));
        }
        for &s in &c.steps {
            out.extend(self.edge_dofs(s.edge));
        }
        out.extend(self.cell_offset[cell]..self.cell_offset[cell + 1]);
        if let Some((ec, d)) = self.enrich {
            if ec == cell {
                out.push(d);
            }
        }
        out
    }
}

/// Number the dofs of a mesh.
pub fn build_dof_map(
    mesh: &Mesh,
    p: usize,
    etype: ElementType,
    enrich_cell: Option<usize>,
) -> DofMap {
    let nv = mesh.vertices.len();
    let mut edge_offset = Vec::with_capacity(mesh.edges.len() + 1);
    let mut next = nv;
    for e in &mesh.edges {
        edge_offset.push(next);
        next += edge_interior_dim(p, etype, &e.curve);
    }
    edge_offset.push(next);
    let n_bubbles = if p >= 2 { dim_p(p - 2) } else { 0 };
    let mut cell_offset = Vec::with_capacity(mesh.cells.len() + 1);
    for _ in &mesh.cells {
        cell_offset.push(next);
        next += n_bubbles;
    }
    cell_offset.push(next);
    let enrich = enrich_cell.map(|c| {
        let d = next;
        next += 1;
        (c, d)
    });
    let n_dofs = next;
    let mut dirichlet = vec![false; n_dofs];
    for (v, &b) in mesh.boundary_vertices().iter().enumerate() {
        dirichlet[v] = b;
    }
    for (e, &b) in mesh.boundary_edges().iter().enumerate() {
        if b {
            for d in edge_offset[e]..edge_offset[e + 1] {
                dirichlet[d] = true;
            }
        }
    }
    let mut free = Vec::new();
    let mut free_index = vec![usize::MAX; n_dofs];
    for (d, &fixed) in dirichlet.iter().enumerate() {
        if !fixed {
            free_index[d] = free.len();
            free.push(d);
        }
    }
    DofMap {
        p,
        etype,
        n_vertices: nv,
        edge_offset,
        cell_offset,
        enrich,
        n_dofs,
        dirichlet,
        free,
        free_index,
    }
}

// ---------------------------------------------------------------------------
// Congruence classes
// ---------------------------------------------------------------------------

/// Quantization grid for the congruence key: ~3e-11 on O(1) coordinates.
/// Cells whose descriptors agree to that resolution share element matrices
/// to far better than the quadrature accuracy, so a collision is harmless;
/// a spurious split merely costs a duplicate build.
const KEY_QUANTUM: f64 = (1u64 << 35) as f64;

fn qz(v: f64) -> i64 {
    (v * KEY_QUANTUM).round() as i64
}

fn slot_descriptor(mesh: &Mesh, step: LoopStep, refp: Pt, out: &mut Vec<i64>) {
    let e = &mesh.edges[step.edge];
    out.push(step.forward as i64);
    match e.curve {
        CurveSpec::Line { a, b } => {
            out.push(0);
            out.extend_from_slice(&[
                qz(a.x - refp.x),
                qz(a.y - refp.y),
                qz(b.x - refp.x),
                qz(b.y - refp.y),
            ]);
        }
        CurveSpec::CircularArc { center, radius, theta0, theta1 } => {
            out.push(1);
            out.extend_from_slice(&[
                qz(center.x - refp.x),
                qz(center.y - refp.y),
                qz(radius),
                qz(theta0),
                qz(theta1),
            ]);
        }
        CurveSpec::SinePerturbedLine { a, b, amplitude, halfwaves } => {
            out.push(2);
            out.extend_from_slice(&[
                qz(a.x - refp.x),
                qz(a.y - refp.y),
                qz(b.x - refp.x),
                qz(b.y - refp.y),
                qz(amplitude),
                halfwaves as i64,
            ]);
        }
    }
}

/// Translation-invariant shape descriptor of one cell, canonicalized over
/// the loop's cyclic rotations.  Rotated or reflected congruences are not
/// detected (they would only add cache hits, never correctness).
fn congruence_key(mesh: &Mesh, cell: &Cell, n_cell: usize, enrich: bool) -> Vec<i64> {
    let m = cell.steps.len();
    let mut best: Option<Vec<i64>> = None;
    for rot in 0..m {
        let refp = mesh.vertices[mesh.step_start(cell.steps[rot])];
        let mut key = Vec::with_capacity(2 + 8 * m);
        key.push(n_cell as i64);
        key.push(enrich as i64);
        for k in 0..m {
            slot_descriptor(mesh, cell.steps[(rot + k) % m], refp, &mut key);
        }
        if best.as_ref().map_or(true, |b| key < *b) {
            best = Some(key);
        }
    }
    best.expect("cell loops are nonempty")
}

/// Per-edge quadrature size for a cell, reduced (to an even count ≥ 8) when
/// the full count would exceed the cell node cap.
fn cell_quadrature_n(cfg: &AssemblyConfig, n_edges: usize) -> usize {
    let full = cfg.kress.n_per_edge;
    if n_edges * full <= cfg.node_cap {
        full
    } else {
        ((cfg.node_cap / n_edges) & !1usize).max(8)
    }
}

/// One congruence class of cells: the shared element matrices.
#[derive(Debug, Clone)]
pub struct ClassData {
    pub a: DenseMat,
    pub b: Vec<f64>,
    pub asym: f64,
    pub dim: usize,
}

/// Boundary grid, trace bases (by slot), and local space of one cell,
/// built exactly as assembly builds its congruence representative.
fn cell_space(
    mesh: &Mesh,
    cfg: &AssemblyConfig,
    cell_id: usize,
) -> crate::Result<(BoundaryGrid, LocalSpace, Vec<TraceBasis>)> {
    let cell = &mesh.cells[cell_id];
    let n_cell = cell_quadrature_n(cfg, cell.steps.len());
    let params = KressParams { n_per_edge: n_cell, q: cfg.kress.q };
    // Grids only for this cell's edges; the rest of the slots point at a
    // shared dummy that is never read (boundary_grid indexes by edge id).
    let dummy = Arc::new(EdgeGrid::new(mesh, cell.steps[0].edge, params));
    let mut grids: Vec<Arc<EdgeGrid>> = vec![dummy; mesh.edges.len()];
    for &s in &cell.steps {
        grids[s.edge] = Arc::new(EdgeGrid::new(mesh, s.edge, params));
    }
    let placeholder = TraceBasis::Arc(ArcPolyBasis::new(cfg.p));
    let mut bases: Vec<TraceBasis> = vec![placeholder; mesh.edges.len()];
    if cfg.etype == ElementType::Type2 {
        for &s in &cell.steps {
            let e = &mesh.edges[s.edge];
            // The pivoted selection always runs on the full-resolution edge
            // grid: a capped cell must still agree with its uncapped
            // neighbor about which functions span a shared edge.
            let bgrid = if n_cell == cfg.kress.n_per_edge {
                grids[s.edge].clone()
            } else {
                Arc::new(EdgeGrid::new(mesh, s.edge, cfg.kress))
            };
            bases[s.edge] = TraceBasis::Poly(build_edge_basis(
                mesh.vertices[e.v0],
                mesh.vertices[e.v1],
                &bgrid,
                cfg.p,
                cfg.tau,
                cfg.variant,
            ));
        }
    }
    for &s in &cell.steps {
        let expect = edge_interior_dim(cfg.p, cfg.etype, &mesh.edges[s.edge].curve);
        let got = bases[s.edge].interior_dim();
        if got != expect {
            return Err(crate::Error::Solve(format!(
                "cell {cell_id}, edge {}: selected {got} interior trace functions, \
                 dimension formula expects {expect}",
                s.edge
            )));
        }
    }
    let grid = boundary_grid(mesh, cell_id, &grids);
    let solver = ConjugateSolver::new(&grid)?;
    let enrich = cfg.enrich_cell == Some(cell_id);
    let space = build_local_space(&grid, &solver, &bases, cfg.p, enrich);
    let slot_bases = cell.steps.iter().map(|&s| bases[s.edge].clone()).collect();
    Ok((grid, space, slot_bases))
}

fn build_class(mesh: &Mesh, cfg: &AssemblyConfig, cell_id: usize) -> crate::Result<ClassData> {
    let (grid, space, _) = cell_space(mesh, cfg, cell_id)?;
    let f = Poly2::constant(grid.centroid, cfg.f_const);
    let lm = local_matrices(&space, &grid, &f);
    Ok(ClassData { dim: space.dim(), a: lm.a, b: lm.b, asym: lm.asym })
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AssemblyStats {
    pub n_cells: usize,
    pub n_classes: usize,
    pub n_dofs: usize,
    pub n_free: usize,
    /// Worst recorded element-matrix asymmetry before symmetrization.
    pub max_asym: f64,
    /// Cells whose quadrature was reduced by the node cap.
    pub capped_cells: usize,
}

/// The assembled global system.
pub struct Assembled {
    pub dof_map: DofMap,
    /// Full symmetric matrix and load over all dofs (no constraints).
    pub a_full: Csr,
    pub b_full: Vec<f64>,
    /// Free-dof system after symmetric Dirichlet elimination; SPD.
    pub a_free: Csr,
    pub b_free: Vec<f64>,
    /// Element matrices per congruence class and each cell's class.
    pub classes: Vec<ClassData>,
    pub class_of: Vec<usize>,
    pub stats: AssemblyStats,
}

/// Assemble the global system for −Δu = f, u = 0 on ∂Ω.
pub fn assemble(mesh: &Mesh, cfg: &AssemblyConfig) -> crate::Result<Assembled> {
    if cfg.p < 1 {
        return Err(crate::Error::Config("assembly requires p ≥ 1".into()));
    }
    if let Some(c) = cfg.enrich_cell {
        if c >= mesh.cells.len() {
            return Err(crate::Error::Config(format!(
                "enrichment cell {c} out of range ({} cells)",
                mesh.cells.len()
            )));
        }
    }
    let dof_map = build_dof_map(mesh, cfg.p, cfg.etype, cfg.enrich_cell);

    // Group cells into congruence classes; the representative of a class is
    // its first cell in id order, so the grouping is deterministic.
    let keys: Vec<Vec<i64>> = mesh
        .cells
        .par_iter()
        .map(|c| {
            congruence_key(
                mesh,
                c,
                cell_quadrature_n(cfg, c.steps.len()),
                cfg.enrich_cell == Some(c.id),
            )
        })
        .collect();
    let mut reps: Vec<usize> = Vec::new();
    let mut class_of = vec![0usize; mesh.cells.len()];
    {
        let mut index: HashMap<&[i64], usize> = HashMap::new();
        for (c, k) in keys.iter().enumerate() {
            let id = *index.entry(k.as_slice()).or_insert_with(|| {
                reps.push(c);
                reps.len() - 1
            });
            class_of[c] = id;
        }
    }
    let built: Vec<crate::Result<ClassData>> =
        reps.par_iter().map(|&rep| build_class(mesh, cfg, rep)).collect();
    let mut classes = Vec::with_capacity(built.len());
    for (k, d) in built.into_iter().enumerate() {
        classes.push(d.map_err(|e| {
            crate::Error::Solve(format!("element build failed on cell {}: {e}", reps[k]))
        })?);
    }

    // Scatter-add, serially and in cell order: deterministic independent of
    // the thread count (class builds are internally serial as well).
    let mut trip_full: Vec<(usize, usize, f64)> = Vec::new();
    let mut trip_free: Vec<(usize, usize, f64)> = Vec::new();
    let mut b_full = vec![0.0; dof_map.n_dofs];
    let mut capped_cells = 0;
    for cell in 0..mesh.cells.len() {
        let cd = &classes[class_of[cell]];
        if cell_quadrature_n(cfg, mesh.cells[cell].steps.len()) < cfg.kress.n_per_edge {
            capped_cells += 1;
        }
        let layout = dof_map.cell_layout(mesh, cell);
        if layout.len() != cd.dim {
            return Err(crate::Error::Solve(format!(
                "cell {cell}: dof layout has {} entries but the element matrix is {}×{}",
                layout.len(),
                cd.dim,
                cd.dim
            )));
        }
        for (i, &gi) in layout.iter().enumerate() {
            b_full[gi] += cd.b[i];
            let fi = dof_map.free_index[gi];
            for (j, &gj) in layout.iter().enumerate() {
                let v = cd.a.at(i, j);
                if v == 0.0 {
                    continue;
                }
                trip_full.push((gi, gj, v));
                let fj = dof_map.free_index[gj];
                if fi != usize::MAX && fj != usize::MAX {
                    trip_free.push((fi, fj, v));
                }
            }
        }
    }
    let a_full = Csr::from_triplets(dof_map.n_dofs, &trip_full);
    let a_free = Csr::from_triplets(dof_map.n_free(), &trip_free);
    let b_free: Vec<f64> = dof_map.free.iter().map(|&d| b_full[d]).collect();
    let max_asym = classes.iter().map(|c| c.asym).fold(0.0, f64::max);
    let stats = AssemblyStats {
        n_cells: mesh.cells.len(),
        n_classes: classes.len(),
        n_dofs: dof_map.n_dofs,
        n_free: dof_map.n_free(),
        max_asym,
        capped_cells,
    };
    Ok(Assembled { dof_map, a_full, b_full, a_free, b_free, classes, class_of, stats })
}

// ---------------------------------------------------------------------------
// Solve, error, conditioning
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    /// Direct below [`DIRECT_CUTOFF`] free dofs, PCG above.
    Auto,
    Direct,
    Pcg,
}

/// Free-dof count up to which [`SolverChoice::Auto`] factors densely.
pub const DIRECT_CUTOFF: usize = 500;

#[derive(Debug, Clone)]
pub struct Solution {
    /// Coefficients over all dofs (constrained ones are zero).
    pub c: Vec<f64>,
    /// Discrete energy |û|²_{H¹} = cᵀAc.
    pub energy: f64,
    pub method: &'static str,
    pub iterations: usize,
    /// Relative free-system residual ‖Ac − b‖/‖b‖.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve the assembled free system and report the discrete energy.
pub fn solve(asm: &Assembled, choice: SolverChoice, tol: f64) -> crate::Result<Solution> {
    let n = asm.a_free.n;
    if n == 0 {
        return Ok(Solution {
            c: vec![0.0; asm.dof_map.n_dofs],
            energy: 0.0,
            method: "empty",
            iterations: 0,
            residual: 0.0,
        });
    }
    let direct = match choice {
        SolverChoice::Direct => true,
        SolverChoice::Pcg => false,
        SolverChoice::Auto => n <= DIRECT_CUTOFF,
    };
    let (x, iterations, method) = if direct {
        let mut dense = DenseMat::zeros(n, n);
        for i in 0..n {
            for k in asm.a_free.indptr[i]..asm.a_free.indptr[i + 1] {
                *dense.at_mut(i, asm.a_free.indices[k]) = asm.a_free.data[k];
            }
        }
        let plu = Plu::factor(dense).map_err(crate::Error::Solve)?;
        let mut x = asm.b_free.clone();
        plu.solve_in_place(&mut x);
        (x, 1, "direct")
    } else {
        let (x, it) = pcg(&asm.a_free, &asm.b_free, tol, 400_000).map_err(crate::Error::Solve)?;
        (x, it, "pcg")
    };
    let mut ax = vec![0.0; n];
    asm.a_free.matvec(&x, &mut ax);
    let energy = dot(&x, &ax);
    let bnorm = dot(&asm.b_free, &asm.b_free).sqrt();
    let rnorm = ax
        .iter()
        .zip(&asm.b_free)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let residual = if bnorm > 0.0 { rnorm / bnorm } else { rnorm };
    if direct && residual > 1e-9 {
        return Err(crate::Error::Solve(format!(
            "direct solve residual {residual:.3e} exceeds 1e-9 — system near-singular?"
        )));
    }
    let mut c = vec![0.0; asm.dof_map.n_dofs];
    for (fi, &d) in asm.dof_map.free.iter().enumerate() {
        c[d] = x[fi];
    }
    Ok(Solution { c, energy, method, iterations, residual })
}

#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    /// |u − û|_{H¹} = √(|u|² − |û|²), clamped at zero.
    pub error: f64,
    /// Signed defect |u|² − |û|² before clamping.
    pub defect: f64,
    /// Set when the discrete energy exceeds the reference by more than
    /// 1e-10 — an inconsistent reference or a broken assembly.
    pub inconsistent: bool,
}

/// H¹ seminorm error from the energy identity.
pub fn error_h1(reference_energy_sq: f64, discrete_energy: f64) -> ErrorReport {
    let defect = reference_energy_sq - discrete_energy;
    ErrorReport { error: defect.max(0.0).sqrt(), defect, inconsistent: defect < -1e-10 }
}

/// Dense-path cutoff for condition numbers.
const DENSE_EIG_CUTOFF: usize = 1500;

/// κ₂ of the diagonally rescaled matrix D^{-1/2} A D^{-1/2}.
///
/// The rescaling makes the result invariant under row/column scaling (and
/// under appending decoupled unit-diagonal dofs such as the enrichment
/// bubble); small matrices go through a dense symmetric eigensolve, large
/// ones through power iteration for λ_max and inverse iteration with inner
/// CG solves for λ_min.
pub fn condition_number(a: &Csr) -> crate::Result<f64> {
    if a.n == 0 {
        return Ok(1.0);
    }
    if a.diag().iter().any(|&v| v <= 0.0) {
        return Err(crate::Error::Solve(
            "condition number needs a positive diagonal".into(),
        ));
    }
    let r = a.jacobi_rescaled();
    let (lo, hi) = if a.n <= DENSE_EIG_CUTOFF {
        dense_sym_extremal_eigs(&r.to_dense())
    } else {
        let hi = lambda_max(&r, 1e-9, 3000);
        let lo = lambda_min(&r, 1e-6, 80).map_err(crate::Error::Solve)?;
        (lo, hi)
    };
    if lo <= 0.0 {
        return Err(crate::Error::Solve(format!(
            "matrix numerically singular (λ_min = {lo:.3e})"
        )));
    }
    Ok(hi / lo)
}

/// κ₂ (diagonally rescaled) of one cell's element stiffness matrix
/// restricted to its free dofs — the paper's per-element conditioning
/// diagnostic for the non-shrinking cell.
pub fn cell_block_condition(mesh: &Mesh, asm: &Assembled, cell: usize) -> crate::Result<f64> {
    let cd = &asm.classes[asm.class_of[cell]];
    let layout = asm.dof_map.cell_layout(mesh, cell);
    let keep: Vec<usize> = (0..layout.len())
        .filter(|&i| asm.dof_map.free_index[layout[i]] != usize::MAX)
        .collect();
    if keep.is_empty() {
        return Ok(1.0);
    }
    let m = keep.len();
    let mut sub = nalgebra::DMatrix::zeros(m, m);
    for (i, &li) in keep.iter().enumerate() {
        for (j, &lj) in keep.iter().enumerate() {
            sub[(i, j)] = cd.a.at(li, lj);
        }
    }
    rescaled_dense_condition(&mut sub)
}

/// κ₂ of the assembled global matrix restricted to one cell's free dofs
/// (neighbor contributions included) — the alternative block convention,
/// kept for comparison.
pub fn assembled_block_condition(mesh: &Mesh, asm: &Assembled, cell: usize) -> crate::Result<f64> {
    let layout = asm.dof_map.cell_layout(mesh, cell);
    let rows: Vec<usize> = layout
        .iter()
        .filter(|&&d| asm.dof_map.free_index[d] != usize::MAX)
        .map(|&d| asm.dof_map.free_index[d])
        .collect();
    if rows.is_empty() {
        return Ok(1.0);
    }
    let pos: HashMap<usize, usize> = rows.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let m = rows.len();
    let mut sub = nalgebra::DMatrix::zeros(m, m);
    for (i, &fi) in rows.iter().enumerate() {
        for k in asm.a_free.indptr[fi]..asm.a_free.indptr[fi + 1] {
            if let Some(&j) = pos.get(&asm.a_free.indices[k]) {
                sub[(i, j)] = asm.a_free.data[k];
            }
        }
    }
    rescaled_dense_condition(&mut sub)
}

fn rescaled_dense_condition(sub: &mut nalgebra::DMatrix<f64>) -> crate::Result<f64> {
    let m = sub.nrows();
    let mut d = vec![0.0; m];
    for i in 0..m {
        let v = sub[(i, i)];
        if v <= 0.0 {
            return Err(crate::Error::Solve("block has a nonpositive diagonal entry".into()));
        }
        d[i] = v.sqrt();
    }
    for i in 0..m {
        for j in 0..m {
            sub[(i, j)] /= d[i] * d[j];
        }
    }
    let (lo, hi) = dense_sym_extremal_eigs(sub);
    if lo <= 0.0 {
        return Err(crate::Error::Solve(format!(
            "block numerically singular (λ_min = {lo:.3e})"
        )));
    }
    Ok(hi / lo)
}

// ---------------------------------------------------------------------------
// Reference energies
// ---------------------------------------------------------------------------

/// |u|²_{H¹} for −Δu = 1, u = 0 on the unit square: the odd-mode sine
/// series Σ 64/(π⁶ m² n² (m²+n²)) summed with its inner sum in closed form
/// (see the `square_series_reference…` test, which recomputes it).
pub const SQUARE_ENERGY: f64 = 3.514425373863158e-2;

/// The L-shaped domain (−1,1)² ∖ [0,1]×[−1,0] as a single six-edge cell.
fn lshape_domain_mesh() -> Mesh {
    use crate::geometry::Edge;
    let vs = vec![
        Pt::new(-1.0, -1.0),
        Pt::new(0.0, -1.0),
        Pt::new(0.0, 0.0),
        Pt::new(1.0, 0.0),
        Pt::new(1.0, 1.0),
        Pt::new(-1.0, 1.0),
    ];
    let edges = (0..6)
        .map(|k| Edge {
            id: k,
            v0: k,
            v1: (k + 1) % 6,
            curve: CurveSpec::Line { a: vs[k], b: vs[(k + 1) % 6] },
        })
        .collect();
    let steps = (0..6).map(|e| LoopStep { edge: e, forward: true }).collect();
    Mesh { vertices: vs, edges, cells: vec![Cell { id: 0, steps }] }
}

/// |u|²_{H¹} for −Δu = 1, u = 0 on the L-shaped domain, by splitting
/// u = v + w with w = −|x|²/4 (so −Δw = 1) and v harmonic with trace
/// |x|²/4: then |u|² = 1/2 − ∮(∂v/∂n)v ds, and with the conjugate v̂ of v
/// the flux integral becomes −∮ v̂ (∂v/∂t) ds with the tangential
/// derivative (x·t̂)/2 known in closed form — everything reduces to one
/// conjugate solve on the boundary.
pub fn lshape_energy_at(n_per_edge: usize) -> crate::Result<f64> {
    let mesh = lshape_domain_mesh();
    let grids = all_edge_grids(&mesh, KressParams { n_per_edge, q: 7 });
    let grid = boundary_grid(&mesh, 0, &grids);
    let solver = ConjugateSolver::new(&grid)?;
    let g_dt: Vec<f64> = (0..grid.n_nodes).map(|i| 0.5 * grid.x[i].dot(grid.tangent[i])).collect();
    let vhat = solver.solve(&g_dt);
    let prod: Vec<f64> = vhat.iter().zip(&g_dt).map(|(&a, &b)| a * b).collect();
    Ok(0.5 + boundary_functional(&grid, &prod))
}

static LSHAPE_ENERGY: OnceLock<f64> = OnceLock::new();

/// Cached L-shape reference energy at production resolution (converged to
/// ~3·10⁻¹² by n = 128; see the reference-energy test).
pub fn lshape_energy() -> f64 {
    *LSHAPE_ENERGY
        .get_or_init(|| lshape_energy_at(128).expect("L-shape reference solve cannot fail"))
}

/// Reference |u|²_{H¹} for −Δu = 1, u = 0 on a family's domain.  Every
/// family meshes the unit square except the L-shape.
pub fn reference_energy(family: Family) -> f64 {
    match family {
        Family::Lshape => lshape_energy(),
        _ => SQUARE_ENERGY,
    }
}

// ---------------------------------------------------------------------------
// Solution evaluation (tests and diagnostics)
// ---------------------------------------------------------------------------

/// One cell's slice of a global solution, with everything needed to
/// evaluate it inside the cell or on its boundary.
pub struct CellSolution {
    pub cell: usize,
    pub grid: BoundaryGrid,
    pub space: LocalSpace,
    /// Trace bases by loop slot.
    pub slot_bases: Vec<TraceBasis>,
    pub coeffs: Vec<f64>,
}

/// Rebuild one cell's local space and gather its solution coefficients.
pub fn cell_solution(
    mesh: &Mesh,
    cfg: &AssemblyConfig,
    dof_map: &DofMap,
    cell: usize,
    c_full: &[f64],
) -> crate::Result<CellSolution> {
    let (grid, space, slot_bases) = cell_space(mesh, cfg, cell)?;
    let layout = dof_map.cell_layout(mesh, cell);
    let coeffs = layout.iter().map(|&d| c_full[d]).collect();
    Ok(CellSolution { cell, grid, space, slot_bases, coeffs })
}

impl CellSolution {
    /// Value at an interior point (one Cauchy integral).
    pub fn eval(&self, z: Pt) -> f64 {
        self.space.eval_combination(&self.grid, &self.coeffs, z)
    }

    /// Solution trace at curve parameter `t` of mesh edge `edge`, which
    /// must be one of the cell's edges.  Bubbles have zero trace, so only
    /// the vertex and edge functions contribute; both cells adjacent to an
    /// edge evaluate the same shared basis here, which is what the
    /// conformity checks exercise.
    pub fn trace_at(&self, mesh: &Mesh, edge: usize, t: f64) -> f64 {
        let slot = self
            .grid
            .edge_ids
            .iter()
            .position(|&e| e == edge)
            .expect("edge does not belong to this cell");
        let curve = &mesh.edges[edge].curve;
        let x = curve.position(t);
        let tb = &self.slot_bases[slot];
        // Arc-length fraction of the stored edge, for arc-polynomial bases.
        let s = match tb {
            TraceBasis::Poly(_) => 0.0,
            TraceBasis::Arc(_) => {
                let (gx, gw) = gauss_legendre(32);
                let mut a = 0.0;
                for (&xi, &wi) in gx.iter().zip(&gw) {
                    let tt = 0.5 * t * (xi + 1.0);
                    a += 0.5 * t * wi * curve.velocity(tt).norm();
                }
                a / self.grid.edge_len[slot]
            }
        };
        let ne = self.grid.n_edges;
        let eval_fn = |k: usize| match tb {
            TraceBasis::Poly(b) => b.function(k).eval(x),
            TraceBasis::Arc(b) => b.eval(k, s),
        };
        let mut val = 0.0;
        for (f, &c) in self.space.fns.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            match f.kind {
                crate::localspace::BasisKind::Vertex { slot: vs, .. } => {
                    if vs == slot {
                        val += c * eval_fn(hat_index(&self.grid, slot, false));
                    } else if (vs + ne - 1) % ne == slot {
                        val += c * eval_fn(hat_index(&self.grid, slot, true));
                    }
                }
                crate::localspace::BasisKind::EdgeFn { slot: es, index, .. } => {
                    if es == slot {
                        val += c * eval_fn(2 + index);
                    }
                }
                // Zero trace by construction.
                crate::localspace::BasisKind::Bubble { .. }
                | crate::localspace::BasisKind::Enrichment => {}
            }
        }
        val
    }
}

// ---------------------------------------------------------------------------
// Convergence driver
// ---------------------------------------------------------------------------

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub r: usize,
    /// Free dofs (the solved unknowns).
    pub dofs: usize,
    pub energy: f64,
    pub error: f64,
    pub inconsistent: bool,
    pub kappa_global: Option<f64>,
    pub kappa_block: Option<f64>,
    pub wall_ms: f64,
    pub method: &'static str,
    pub iterations: usize,
}

/// Mesh, assemble, and solve one family member; optionally attach the
/// rescaled condition numbers (global, and the big-cell element block for
/// the L-shape family).  `enrich` adds the Δφ = −1 bubble on the last cell,
/// which the generators reserve for the one non-shrinking element
/// (meaningful for the L-shape family).
pub fn solve_family(
    family: Family,
    r: usize,
    params: &FamilyParams,
    cfg: &AssemblyConfig,
    enrich: bool,
    kappa: bool,
    choice: SolverChoice,
    tol: f64,
) -> crate::Result<RunRow> {
    let mesh = mesh_generate(family, r, params)?;
    let mut cfg = cfg.clone();
    cfg.enrich_cell = if enrich { Some(mesh.cells.len() - 1) } else { None };
    let t0 = std::time::Instant::now();
    let asm = assemble(&mesh, &cfg)?;
    let sol = solve(&asm, choice, tol)?;
    let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    let report = error_h1(reference_energy(family), sol.energy);
    let kappa_global = if kappa { Some(condition_number(&asm.a_free)?) } else { None };
    let kappa_block = if kappa && matches!(family, Family::Lshape) {
        Some(cell_block_condition(&mesh, &asm, mesh.cells.len() - 1)?)
    } else {
        None
    };
    Ok(RunRow {
        r,
        dofs: asm.stats.n_free,
        energy: sol.energy,
        error: report.error,
        inconsistent: report.inconsistent,
        kappa_global,
        kappa_block,
        wall_ms,
        method: sol.method,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Edge;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(a: Pt, b: Pt) -> CurveSpec {
        CurveSpec::Line { a, b }
    }

    /// Two unit squares sharing a vertical edge.
    fn two_squares_mesh() -> Mesh {
        let vs = vec![
            Pt::new(0.0, 0.0),
            Pt::new(1.0, 0.0),
            Pt::new(2.0, 0.0),
            Pt::new(0.0, 1.0),
            Pt::new(1.0, 1.0),
            Pt::new(2.0, 1.0),
        ];
        // Stored orientations follow the mesh generators' convention
        // (horizontal edges point +x, vertical edges +y) so the two cells
        // land in one congruence class.
        let pairs = [(0, 1), (1, 2), (1, 4), (2, 5), (0, 3), (3, 4), (4, 5)];
        let edges: Vec<Edge> = pairs
            .iter()
            .enumerate()
            .map(|(id, &(v0, v1))| Edge { id, v0, v1, curve: line(vs[v0], vs[v1]) })
            .collect();
        let fw = |e: usize| LoopStep { edge: e, forward: true };
        let bw = |e: usize| LoopStep { edge: e, forward: false };
        let cells = vec![
            Cell { id: 0, steps: vec![fw(0), fw(2), bw(5), bw(4)] },
            Cell { id: 1, steps: vec![fw(1), fw(3), bw(6), bw(2)] },
        ];
        let mesh = Mesh { vertices: vs, edges, cells };
        mesh.validate().expect("two-squares mesh is valid");
        mesh
    }

    #[test]
    fn edge_interior_dimensions_follow_the_restriction_formula() {
        let l = line(Pt::new(0.0, 0.0), Pt::new(1.0, 0.0));
        let a = CurveSpec::CircularArc {
            center: Pt::new(0.0, 0.0),
            radius: 1.0,
            theta0: 0.0,
            theta1: 1.0,
        };
        let s = CurveSpec::SinePerturbedLine {
            a: Pt::new(0.0, 0.0),
            b: Pt::new(1.0, 0.0),
            amplitude: 0.1,
            halfwaves: 2,
        };
        for p in 1..=3usize {
            assert_eq!(edge_interior_dim(p, ElementType::Type1, &l), p - 1);
            assert_eq!(edge_interior_dim(p, ElementType::Type1, &a), p - 1);
            assert_eq!(edge_interior_dim(p, ElementType::Type2, &l), p - 1);
        }
        // Conic arc: dim P_p(e) = 2p+1; non-algebraic: the full C(p+2,2).
        assert_eq!(edge_interior_dim(1, ElementType::Type2, &a), 1);
        assert_eq!(edge_interior_dim(2, ElementType::Type2, &a), 3);
        assert_eq!(edge_interior_dim(1, ElementType::Type2, &s), 1);
        assert_eq!(edge_interior_dim(2, ElementType::Type2, &s), 4);
    }

    #[test]
    fn dof_layout_matches_the_local_basis_order() {
        use crate::localspace::BasisKind;
        let cases: Vec<(Mesh, AssemblyConfig)> = vec![
            (
                mesh_generate(Family::Pegboard, 1, &FamilyParams::default()).unwrap(),
                AssemblyConfig { p: 2, ..AssemblyConfig::default() },
            ),
            (
                mesh_generate(Family::Lshape, 1, &FamilyParams::default()).unwrap(),
                AssemblyConfig { p: 1, enrich_cell: Some(24), ..AssemblyConfig::default() },
            ),
        ];
        for (mesh, cfg) in &cases {
            assert_eq!(cfg.enrich_cell.map(|c| c + 1).unwrap_or(mesh.cells.len()), mesh.cells.len());
            let dm = build_dof_map(mesh, cfg.p, cfg.etype, cfg.enrich_cell);
            for cell in 0..mesh.cells.len() {
                let (_, space, _) = cell_space(mesh, cfg, cell).unwrap();
                let layout = dm.cell_layout(mesh, cell);
                assert_eq!(layout.len(), space.dim(), "cell {cell} layout length");
                for (f, &dof) in space.fns.iter().zip(&layout) {
                    match f.kind {
                        BasisKind::Vertex { vertex, .. } => assert_eq!(dof, vertex),
                        BasisKind::EdgeFn { edge, index, .. } => {
                            assert_eq!(dof, dm.edge_offset[edge] + index)
                        }
                        BasisKind::Bubble { .. } => {
                            assert!(dm.cell_offset[cell] <= dof && dof < dm.cell_offset[cell + 1])
                        }
                        BasisKind::Enrichment => assert_eq!(Some((cell, dof)), dm.enrich),
                    }
                }
            }
        }
    }

    #[test]
    fn two_squares_assemble_to_the_hand_computed_global_matrix() {
        let mesh = two_squares_mesh();
        let cfg = AssemblyConfig::default();
        let asm = assemble(&mesh, &cfg).unwrap();
        assert_eq!(asm.dof_map.n_dofs, 6);
        assert_eq!(asm.stats.n_classes, 1, "the two unit squares are congruent");
        // The bilinear element matrix in traversal corner order, scattered
        // by the two cells' corner loops.
        let a_k = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        let layouts = [[0usize, 1, 4, 3], [1, 2, 5, 4]];
        let mut expect = [[0.0f64; 6]; 6];
        for l in &layouts {
            for i in 0..4 {
                for j in 0..4 {
                    expect[l[i]][l[j]] += a_k[i][j] / 6.0;
                }
            }
        }
        let dense = asm.a_full.to_dense();
        for i in 0..6 {
            for j in 0..6 {
                assert!(
                    (dense[(i, j)] - expect[i][j]).abs() < 1e-8,
                    "A[{i}][{j}] = {} vs {}",
                    dense[(i, j)],
                    expect[i][j]
                );
            }
        }
        // Load for f = 1 on a unit square: h²/4 per corner.
        for (d, &b) in asm.b_full.iter().enumerate() {
            let touching = layouts.iter().flatten().filter(|&&g| g == d).count();
            assert!((b - 0.25 * touching as f64).abs() < 1e-10, "b[{d}] = {b}");
        }
        // Every vertex touches the boundary, so the free system is empty.
        assert_eq!(asm.stats.n_free, 0);
        let sol = solve(&asm, SolverChoice::Auto, 1e-10).unwrap();
        assert_eq!(sol.energy, 0.0);
    }

    #[test]
    fn single_cell_p2_bubble_reproduces_the_torsion_energy() {
        // On one unit-square cell at p = 2 the only free dof is the bubble
        // with Δφ = 1, whose harmonic lift is exact — so the discrete
        // solution *is* u and the energy matches the series reference.
        let mesh = mesh_generate(Family::Square, 1, &FamilyParams::default()).unwrap();
        let cfg = AssemblyConfig { p: 2, ..AssemblyConfig::default() };
        let asm = assemble(&mesh, &cfg).unwrap();
        assert_eq!(asm.stats.n_free, 1);
        let sol = solve(&asm, SolverChoice::Auto, 1e-12).unwrap();
        assert!(
            (sol.energy - SQUARE_ENERGY).abs() < 1e-10,
            "energy {} vs series {}",
            sol.energy,
            SQUARE_ENERGY
        );
        let rep = error_h1(SQUARE_ENERGY, sol.energy);
        assert!(rep.error < 2e-5);
        assert!(!rep.inconsistent);
    }

    /// Torsion series for the unit square, mode weight 64/(π⁶ m² n² (m²+n²))
    /// over odd m, n, with the inner sum in closed form:
    /// Σ_{n odd} 1/(n²(n²+m²)) = (π²/8 − π tanh(πm/2)/(4m))/m².
    /// Summed smallest terms first so accumulation error stays at the ulp level.
    fn square_series() -> f64 {
        let pi = std::f64::consts::PI;
        let mut total = 0.0;
        let mut m = 39_999u64;
        loop {
            let mf = m as f64;
            let inner = (pi * pi / 8.0 - pi * (pi * mf / 2.0).tanh() / (4.0 * mf)) / (mf * mf);
            total += 64.0 / pi.powi(6) * inner / (mf * mf);
            if m == 1 {
                break;
            }
            m -= 2;
        }
        total
    }

    #[test]
    fn square_series_reference_matches_the_lattice_sum() {
        assert!(
            (square_series() - SQUARE_ENERGY).abs() < 1e-12,
            "series {} vs embedded {}",
            square_series(),
            SQUARE_ENERGY
        );
    }

    #[test]
    fn lshape_reference_energy_matches_the_published_value() {
        let published = 0.21407580269;
        let coarse = lshape_energy_at(128).unwrap();
        let fine = lshape_energy_at(192).unwrap();
        assert!((fine - published).abs() < 5e-10, "fine {fine} vs {published}");
        assert!((coarse - fine).abs() < 1e-10, "n-refinement moved the value");
    }

    #[test]
    fn lshape_r1_matches_the_golden_error_and_conditionings() {
        let row = solve_family(
            Family::Lshape,
            1,
            &FamilyParams::default(),
            &AssemblyConfig::default(),
            true,
            true,
            SolverChoice::Auto,
            1e-10,
        )
        .unwrap();
        assert!(!row.inconsistent);
        let golden_err = 1.3629e-01;
        assert!(
            (row.error - golden_err).abs() < 2e-3 * golden_err,
            "error {} vs golden {}",
            row.error,
            golden_err
        );
        // Conditioning under our stated convention (diagonally rescaled
        // free-dof submatrix; the element block restricted the same way) —
        // frozen here as regression pins.  The published table's 1.2908e+01
        // / 5.7834e+00 follow an unstated convention that none of the ten
        // variants we tried reproduces; the acceptance suite reports that
        // comparison on its own line.
        let kg = row.kappa_global.unwrap();
        assert!((kg - 3.5402).abs() < 1e-2 * 3.5402, "κ(A) = {kg}");
        let kb = row.kappa_block.unwrap();
        assert!((kb - 2.0653).abs() < 1e-2 * 2.0653, "κ(A_L) = {kb}");
    }

    #[test]
    fn lshape_energies_increase_monotonically_under_refinement() {
        // The L-shape spaces are nested across r (the big cell is fixed and
        // its boundary partition refines), so energies must not decrease.
        let mut last = 0.0;
        for r in [1usize, 2, 4] {
            let row = solve_family(
                Family::Lshape,
                r,
                &FamilyParams::default(),
                &AssemblyConfig::default(),
                true,
                false,
                SolverChoice::Auto,
                1e-11,
            )
            .unwrap();
            assert!(row.energy >= last - 1e-11, "energy dropped at r = {r}");
            assert!(row.energy <= lshape_energy() + 1e-9, "energy above the reference");
            last = row.energy;
        }
    }

    #[test]
    fn conforming_traces_agree_from_both_sides_of_interior_edges() {
        let mesh = mesh_generate(Family::Pegboard, 2, &FamilyParams::default()).unwrap();
        let cfg = AssemblyConfig { p: 2, ..AssemblyConfig::default() };
        let asm = assemble(&mesh, &cfg).unwrap();
        let sol = solve(&asm, SolverChoice::Auto, 1e-12).unwrap();
        let usage = mesh.edge_usage();
        let mut cache: HashMap<usize, CellSolution> = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for (e, u) in usage.iter().enumerate() {
            if u.len() != 2 {
                continue;
            }
            for &(cell, _) in u {
                cache.entry(cell).or_insert_with(|| {
                    cell_solution(&mesh, &cfg, &asm.dof_map, cell, &sol.c).unwrap()
                });
            }
            for _ in 0..20 {
                let t: f64 = rng.gen_range(0.05..0.95);
                let a = cache[&u[0].0].trace_at(&mesh, e, t);
                let b = cache[&u[1].0].trace_at(&mesh, e, t);
                assert!(
                    (a - b).abs() < 1e-9,
                    "trace jump {:.3e} on edge {e} at t = {t}",
                    (a - b).abs()
                );
                checked += 1;
            }
        }
        assert!(checked >= 100, "expected several interior edges");
    }

    #[test]
    fn galerkin_identity_and_solver_paths_agree() {
        let mesh = mesh_generate(Family::Lshape, 2, &FamilyParams::default()).unwrap();
        let cfg = AssemblyConfig { enrich_cell: Some(mesh.cells.len() - 1), ..Default::default() };
        let asm = assemble(&mesh, &cfg).unwrap();
        let d = solve(&asm, SolverChoice::Direct, 1e-12).unwrap();
        let p = solve(&asm, SolverChoice::Pcg, 1e-12).unwrap();
        assert!((d.energy - p.energy).abs() < 1e-9, "direct {} vs pcg {}", d.energy, p.energy);
        // At the Galerkin solution cᵀAc = cᵀb.
        let cb: f64 = asm
            .dof_map
            .free
            .iter()
            .enumerate()
            .map(|(fi, &dof)| p.c[dof] * asm.b_free[fi])
            .sum();
        assert!((p.energy - cb).abs() < 1e-9);
        assert!(d.residual < 1e-12);
        assert!(p.residual < 1e-11);
    }

    #[test]
    fn random_spd_system_agrees_between_direct_and_cg() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut m = vec![vec![0.0f64; n]; n];
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        // A = MᵀM + n·I is safely SPD.
        let mut trips = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += m[k][i] * m[k][j];
                }
                if i == j {
                    s += n as f64;
                }
                trips.push((i, j, s));
            }
        }
        let a = Csr::from_triplets(n, &trips);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x_cg, _) = pcg(&a, &b, 1e-12, 10_000).unwrap();
        let mut dense = DenseMat::zeros(n, n);
        for i in 0..n {
            for k in a.indptr[i]..a.indptr[i + 1] {
                *dense.at_mut(i, a.indices[k]) = a.data[k];
            }
        }
        let plu = Plu::factor(dense).unwrap();
        let mut x_d = b.clone();
        plu.solve_in_place(&mut x_d);
        for i in 0..n {
            assert!((x_cg[i] - x_d[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn condition_number_conventions() {
        // Identity: κ = 1.
        let id = Csr::from_triplets(5, &(0..5).map(|i| (i, i, 1.0)).collect::<Vec<_>>());
        assert!((condition_number(&id).unwrap() - 1.0).abs() < 1e-12);
        // Any positive diagonal rescales to the identity: κ = 1.
        let di = Csr::from_triplets(4, &[(0, 0, 2.0), (1, 1, 9.0), (2, 2, 0.5), (3, 3, 7.0)]);
        assert!((condition_number(&di).unwrap() - 1.0).abs() < 1e-12);
        // [[2,1],[1,2]] rescales to [[1,.5],[.5,1]] with eigenvalues 3/2
        // and 1/2: κ = 3.
        let m = Csr::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        assert!((condition_number(&m).unwrap() - 3.0).abs() < 1e-12);
        // Sparse path (n > cutoff) agrees with the dense formula on a
        // banded SPD matrix.
        let n = DENSE_EIG_CUTOFF + 100;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 2.4));
            if i + 1 < n {
                trips.push((i, i + 1, -1.0));
                trips.push((i + 1, i, -1.0));
            }
        }
        let band = Csr::from_triplets(n, &trips);
        let kappa = condition_number(&band).unwrap();
        // Rescaled tridiagonal (2.4 diag, −1 off): eigenvalues in closed
        // form 1 − (2/2.4)cos(kπ/(n+1)).
        let theta = std::f64::consts::PI / (n as f64 + 1.0);
        let exact = (1.0 + (2.0 / 2.4) * theta.cos()) / (1.0 - (2.0 / 2.4) * theta.cos());
        // The extremal eigenvalues sit in clusters with O(1/n²) spacing, so
        // the iterative bounds land on a cluster average: a few percent is
        // the honest accuracy here.
        assert!(
            (kappa - exact).abs() < 5e-2 * exact,
            "sparse κ = {kappa} vs closed form {exact}"
        );
    }

    #[test]
    fn capped_quadrature_cells_still_assemble_consistently() {
        // Force the big L-shaped cell onto a reduced per-edge quadrature
        // and check the energy barely moves.
        let full = solve_family(
            Family::Lshape,
            1,
            &FamilyParams::default(),
            &AssemblyConfig::default(),
            true,
            false,
            SolverChoice::Auto,
            1e-11,
        )
        .unwrap();
        // 280 caps only the 8-edge cell (to 34 nodes per edge) while the
        // 4-edge squares keep the full count.
        let capped_cfg = AssemblyConfig { node_cap: 280, ..AssemblyConfig::default() };
        let mesh = mesh_generate(Family::Lshape, 1, &FamilyParams::default()).unwrap();
        let cfg =
            AssemblyConfig { enrich_cell: Some(mesh.cells.len() - 1), ..capped_cfg.clone() };
        let asm = assemble(&mesh, &cfg).unwrap();
        assert!(asm.stats.capped_cells >= 1, "the 8-edge cell should be capped");
        let sol = solve(&asm, SolverChoice::Auto, 1e-11).unwrap();
        assert!(
            (sol.energy - full.energy).abs() < 1e-5,
            "capped energy {} vs full {}",
            sol.energy,
            full.energy
        );
    }


    #[test]
    fn solve_family_reports_sane_metadata() {
        let row = solve_family(
            Family::Square,
            2,
            &FamilyParams::default(),
            &AssemblyConfig::default(),
            false,
            true,
            SolverChoice::Auto,
            1e-10,
        )
        .unwrap();
        // 3×3 vertex lattice with a single interior vertex.
        assert_eq!(row.dofs, 1);
        assert_eq!(row.method, "direct");
        assert!(row.error > 0.0 && row.error < SQUARE_ENERGY.sqrt());
        assert!(row.kappa_global.unwrap() >= 1.0);
        assert!(row.wall_ms >= 0.0);
        assert!(!row.inconsistent);
    }
}
