//! Polynomial trace spaces on (possibly curved) edges.
//!
//! For a mesh edge with endpoints z0, z1 we complete the chord to an
//! equilateral triangle T = (z0, z1, z2) with z2 on the left of z0→z1, and
//! use the barycentric coordinates ℓ0, ℓ1, ℓ2 of T to build a hierarchical
//! basis of the bivariate polynomials P_p:
//!
//! * degree 1: ℓ0, ℓ1, ℓ2;
//! * degree 2: 4ℓ1ℓ2, 4ℓ0ℓ2, 4ℓ0ℓ1;
//! * degree 3: (3√3/2)·ℓaℓb(ℓa−ℓb) for the same vertex pairs, then 27ℓ0ℓ1ℓ2;
//! * degree d ≥ 4: J_{d−2}(ℓa−ℓb)·ℓaℓb with J_k = (P_{k+2}−P_k)/(x²−1)
//!   (Legendre P_k), rescaled to unit max over T by barycentric sampling,
//!   followed by the interior bubbles ℓ0ℓ1ℓ2·ξ^i η^j (i+j = d−3) with
//!   ξ = ℓ1−ℓ0, η = ℓ2.
//!
//! Restricting this set to a curved edge makes some members linearly
//! dependent (exactly so on algebraic curves).  Every function except
//! ℓ0, ℓ1 vanishes at both endpoints, so a basis of the restricted-trace
//! space is {ℓ0, ℓ1} plus a pivoted selection from the remainder: a greedy
//! symmetric (Cholesky-style) elimination of the L²(e) Gram matrix keeps
//! pivots while the working diagonal exceeds an absolute drop tolerance.
//! The `Rescaled` variant first normalizes the Gram to unit diagonal so the
//! selection is invariant under rescaling of the candidate functions.

use crate::geometry::{CurveSpec, EdgeGrid, Pt};
use crate::linalg::DenseMat;
use crate::polynomial::{dim_p, Poly2};

/// Equilateral frame over an edge chord: z2 completes (z0, z1) to an
/// equilateral triangle on the left of z0→z1.
#[derive(Debug, Clone, Copy)]
pub struct EdgeFrame {
    pub z0: Pt,
    pub z1: Pt,
    pub z2: Pt,
    /// Chord length |z1 − z0|.
    pub h: f64,
}

impl EdgeFrame {
    pub fn new(z0: Pt, z1: Pt) -> EdgeFrame {
        let d = z1 - z0;
        let h = d.norm();
        assert!(h > 0.0, "degenerate edge chord");
        let z2 = (z0 + z1) * 0.5 - d.rot_cw() * (0.75f64.sqrt());
        EdgeFrame { z0, z1, z2, h }
    }

    fn corner(&self, j: usize) -> Pt {
        match j % 3 {
            0 => self.z0,
            1 => self.z1,
            _ => self.z2,
        }
    }

    /// Barycentric coordinate ℓ_j of the frame triangle at x.
    pub fn lambda(&self, j: usize, x: Pt) -> f64 {
        let v = (self.corner(j + 2) - self.corner(j + 1)).rot_cw();
        let k = 0.75f64.sqrt() * self.h * self.h;
        1.0 - (x - self.corner(j)).dot(v) / k
    }

    /// ℓ_j as a polynomial centered at the chord midpoint.
    pub fn lambda_poly(&self, j: usize) -> Poly2 {
        let c = (self.z0 + self.z1) * 0.5;
        let v = (self.corner(j + 2) - self.corner(j + 1)).rot_cw();
        let k = 0.75f64.sqrt() * self.h * self.h;
        let c00 = 1.0 - (c - self.corner(j)).dot(v) / k;
        Poly2::linear(c, c00, -v.x / k, -v.y / k)
    }

    /// Map barycentric coordinates to a point of the frame triangle.
    pub fn from_bary(&self, l0: f64, l1: f64, l2: f64) -> Pt {
        self.z0 * l0 + self.z1 * l1 + self.z2 * l2
    }
}

/// Monomial coefficients (ascending) of the Legendre polynomials P_0..P_n.
fn legendre_coeffs(n: usize) -> Vec<Vec<f64>> {
    let mut p: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    p.push(vec![1.0]);
    if n >= 1 {
        p.push(vec![0.0, 1.0]);
    }
    for k in 1..n {
        // (k+1) P_{k+1} = (2k+1) x P_k − k P_{k−1}
        let mut next = vec![0.0; k + 2];
        for (m, &c) in p[k].iter().enumerate() {
            next[m + 1] += (2 * k + 1) as f64 * c;
        }
        for (m, &c) in p[k - 1].iter().enumerate() {
            next[m] -= k as f64 * c;
        }
        for c in &mut next {
            *c /= (k + 1) as f64;
        }
        p.push(next);
    }
    p
}

/// Coefficients of J_k = (P_{k+2} − P_k)/(x² − 1), a degree-k polynomial.
fn edge_kernel_coeffs(k: usize) -> Vec<f64> {
    let p = legendre_coeffs(k + 2);
    let mut num = vec![0.0; k + 3];
    for (m, &c) in p[k + 2].iter().enumerate() {
        num[m] += c;
    }
    for (m, &c) in p[k].iter().enumerate() {
        num[m] -= c;
    }
    // Divide by (x² − 1) from the top: q_m = num_{m+2} + q_{m+2}.
    let mut q = vec![0.0; k + 1];
    for m in (0..=k).rev() {
        q[m] = num[m + 2] + if m + 2 <= k { q[m + 2] } else { 0.0 };
    }
    q
}

/// Evaluate a univariate polynomial of `u` (ascending coefficients) as a
/// bivariate polynomial by substituting another polynomial.
fn compose_univariate(coeffs: &[f64], u: &Poly2) -> Poly2 {
    let mut acc = Poly2::constant(u.center(), *coeffs.last().unwrap());
    for &c in coeffs.iter().rev().skip(1) {
        acc = acc.mul(u).axpy(1.0, &Poly2::constant(u.center(), c));
    }
    acc
}

/// Vertex pairs of the edge functions, in spanning-set order.
const EDGE_PAIRS: [(usize, usize); 3] = [(1, 2), (0, 2), (0, 1)];

/// The hierarchical spanning set of P_p on the frame triangle, ordered by
/// total degree, edge functions before interior bubbles within each degree.
/// Its length is dim P_p = (p+1)(p+2)/2.
pub fn edge_spanning(frame: &EdgeFrame, p: usize) -> Vec<Poly2> {
    assert!(p >= 1);
    let l = [frame.lambda_poly(0), frame.lambda_poly(1), frame.lambda_poly(2)];
    let mut fns = vec![l[0].clone(), l[1].clone(), l[2].clone()];
    if p >= 2 {
        for (a, b) in EDGE_PAIRS {
            fns.push(l[a].mul(&l[b]).scale(4.0));
        }
    }
    if p >= 3 {
        for (a, b) in EDGE_PAIRS {
            let diff = l[a].axpy(-1.0, &l[b]);
            fns.push(l[a].mul(&l[b]).mul(&diff).scale(1.5 * 3f64.sqrt()));
        }
        fns.push(l[0].mul(&l[1]).mul(&l[2]).scale(27.0));
    }
    for d in 4..=p {
        let kernel = edge_kernel_coeffs(d - 2);
        for (a, b) in EDGE_PAIRS {
            let diff = l[a].axpy(-1.0, &l[b]);
            let f = compose_univariate(&kernel, &diff).mul(&l[a]).mul(&l[b]);
            let m = bary_max_abs(frame, &f, 200);
            fns.push(f.scale(1.0 / m));
        }
        let cubic = l[0].mul(&l[1]).mul(&l[2]);
        let xi = l[1].axpy(-1.0, &l[0]);
        let eta = l[2].clone();
        for i in 0..=(d - 3) {
            let j = d - 3 - i;
            let mut f = cubic.clone();
            for _ in 0..i {
                f = f.mul(&xi);
            }
            for _ in 0..j {
                f = f.mul(&eta);
            }
            fns.push(f);
        }
    }
    debug_assert_eq!(fns.len(), dim_p(p));
    fns
}

/// Max |f| over an n-fold barycentric subdivision of the frame triangle.
fn bary_max_abs(frame: &EdgeFrame, f: &Poly2, n: usize) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..=n {
        for j in 0..=(n - i) {
            let l0 = i as f64 / n as f64;
            let l1 = j as f64 / n as f64;
            let x = frame.from_bary(l0, l1, 1.0 - l0 - l1);
            m = m.max(f.eval(x).abs());
        }
    }
    assert!(m > 0.0, "zero polynomial in spanning set");
    m
}

/// L²(e) Gram matrix of the given functions over an edge quadrature grid.
pub fn edge_gram(fns: &[Poly2], grid: &EdgeGrid) -> DenseMat {
    let n = fns.len();
    let vals: Vec<Vec<f64>> =
        fns.iter().map(|f| grid.x.iter().map(|&x| f.eval(x)).collect()).collect();
    let mut m = DenseMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = grid
                .weight
                .iter()
                .zip(&vals[i])
                .zip(&vals[j])
                .map(|((&w, &a), &b)| w * a * b)
                .sum();
            *m.at_mut(i, j) = s;
            *m.at_mut(j, i) = s;
        }
    }
    m
}

/// Pivot strategy for [`gecp_select`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotVariant {
    /// Greedy pivots on the raw Gram diagonal.
    Plain,
    /// Normalize the Gram to unit diagonal first (scale-invariant selection);
    /// rows with (numerically) zero diagonal are excluded outright.
    Rescaled,
}

/// Greedy symmetric pivoting: repeatedly pick the largest working diagonal
/// (ties break to the smallest index), record it, and subtract the rank-one
/// Schur complement, while the pivot exceeds the absolute tolerance `tau`.
/// Returns the pivot indices in selection order.
///
/// Rows whose raw diagonal does not exceed `zero_floor` are excluded before
/// anything else; the `Rescaled` variant needs this to tell a genuinely tiny
/// function from pure round-off (which rescaling would otherwise blow up to
/// unit size).
pub fn gecp_select(
    gram: &DenseMat,
    tau: f64,
    variant: PivotVariant,
    zero_floor: f64,
) -> Vec<usize> {
    let n = gram.nrows;
    assert_eq!(gram.ncols, n);
    let mut m = gram.clone();
    let excluded: Vec<bool> = (0..n).map(|i| m.at(i, i) <= zero_floor).collect();
    if variant == PivotVariant::Rescaled {
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                if excluded[i] {
                    0.0
                } else {
                    1.0 / m.at(i, i).sqrt()
                }
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                *m.at_mut(i, j) *= scale[i] * scale[j];
            }
        }
    }
    let mut kept = Vec::new();
    let mut done = vec![false; n];
    loop {
        let mut k = usize::MAX;
        let mut best = tau;
        for i in 0..n {
            if !done[i] && !excluded[i] && m.at(i, i) > best {
                best = m.at(i, i);
                k = i;
            }
        }
        if k == usize::MAX {
            break;
        }
        kept.push(k);
        done[k] = true;
        let pivot = m.at(k, k);
        let col: Vec<f64> = (0..n).map(|i| m.at(i, k)).collect();
        for i in 0..n {
            if done[i] || excluded[i] {
                continue;
            }
            for j in 0..n {
                *m.at_mut(i, j) -= col[i] * col[j] / pivot;
            }
        }
        for i in 0..n {
            *m.at_mut(k, i) = 0.0;
            *m.at_mut(i, k) = 0.0;
        }
    }
    kept
}

/// A basis of the polynomial trace space P_p(e) on one (possibly curved)
/// edge: the two endpoint functions ℓ0, ℓ1 plus a pivoted selection from
/// the endpoint-vanishing remainder of the spanning set.
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    pub p: usize,
    pub frame: EdgeFrame,
    /// The full spanning set in canonical order ([`edge_spanning`]).
    pub fns: Vec<Poly2>,
    /// Selected remainder functions as indices into `fns[2..]`, in pivot
    /// (selection) order.
    pub kept: Vec<usize>,
    pub variant: PivotVariant,
}

impl EdgeBasis {
    /// Dimension of the trace space: endpoints + retained interior functions.
    pub fn dim(&self) -> usize {
        2 + self.kept.len()
    }

    /// The retained remainder indices sorted ascending (the order used for
    /// the interior degrees of freedom).
    pub fn interior_sorted(&self) -> Vec<usize> {
        let mut s = self.kept.clone();
        s.sort_unstable();
        s
    }

    /// Basis function k: 0 → ℓ0, 1 → ℓ1, then the retained interior
    /// functions by ascending spanning index.
    pub fn function(&self, k: usize) -> &Poly2 {
        if k < 2 {
            &self.fns[k]
        } else {
            &self.fns[2 + self.interior_sorted()[k - 2]]
        }
    }
}

/// Build the trace basis for an edge with endpoints (z0, z1) and the given
/// quadrature grid along its curve.
pub fn build_edge_basis(
    z0: Pt,
    z1: Pt,
    grid: &EdgeGrid,
    p: usize,
    tau: f64,
    variant: PivotVariant,
) -> EdgeBasis {
    let frame = EdgeFrame::new(z0, z1);
    let fns = edge_spanning(&frame, p);
    let gram = edge_gram(&fns[2..], grid);
    // The spanning functions are O(1) on the frame triangle, so a function
    // whose squared L²(e) mass is below ~1e-24·|e| is evaluation round-off,
    // not content (round-off sits near 1e-32·|e|).
    let kept = gecp_select(&gram, tau, variant, 1e-24 * grid.length);
    EdgeBasis { p, frame, fns, kept, variant }
}

/// Expected trace-space dimension on an edge whose curve has algebraic
/// degree m: dim P_p − dim P_{p−m} (the polynomials divisible by the curve's
/// defining equation drop out), and the full dim P_p on non-algebraic
/// curves.
pub fn dim_ppe_expected(p: usize, curve: &CurveSpec) -> usize {
    match curve.algebraic_degree() {
        Some(m) if p >= m => dim_p(p) - dim_p(p - m),
        _ => dim_p(p),
    }
}

/// Polynomials in normalized arc length s = ā/L ∈ [0, 1] on one edge:
/// the two endpoint hats 1−s, s followed by the endpoint-vanishing
/// differences P_k(2s−1) − P_{k−2}(2s−1), k = 2..p.
#[derive(Debug, Clone)]
pub struct ArcPolyBasis {
    pub p: usize,
    /// Ascending monomial coefficients in s for each basis function.
    pub coeffs: Vec<Vec<f64>>,
}

impl ArcPolyBasis {
    pub fn new(p: usize) -> ArcPolyBasis {
        assert!(p >= 1);
        let mut coeffs = vec![vec![1.0, -1.0], vec![0.0, 1.0]];
        let leg = legendre_coeffs(p.max(2));
        for k in 2..=p {
            // P_k(u) − P_{k−2}(u) composed with u = 2s − 1.
            let mut num = vec![0.0; k + 1];
            for (m, &c) in leg[k].iter().enumerate() {
                num[m] += c;
            }
            for (m, &c) in leg[k - 2].iter().enumerate() {
                num[m] -= c;
            }
            let bin = crate::polynomial::binomial_table(k);
            let mut out = vec![0.0; k + 1];
            for (m, &c) in num.iter().enumerate() {
                // u^m = (2s − 1)^m = Σ_i C(m,i) (2s)^i (−1)^{m−i}
                for i in 0..=m {
                    let sign = if (m - i) % 2 == 0 { 1.0 } else { -1.0 };
                    out[i] += c * bin[m][i] * 2f64.powi(i as i32) * sign;
                }
            }
            coeffs.push(out);
        }
        ArcPolyBasis { p, coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, k: usize, s: f64) -> f64 {
        self.coeffs[k].iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// d/ds of basis function k at s.
    pub fn deriv(&self, k: usize, s: f64) -> f64 {
        let c = &self.coeffs[k];
        let mut acc = 0.0;
        for m in (1..c.len()).rev() {
            acc = acc * s + m as f64 * c[m];
        }
        acc
    }
}
