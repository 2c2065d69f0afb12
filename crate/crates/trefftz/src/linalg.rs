//! Dense and sparse linear-algebra kernels used by the solver.
//!
//! Small dense systems (edge Gram matrices, local element matrices,
//! projection systems) go through nalgebra.  The Nyström systems are large
//! (up to ~10⁴ unknowns per cell) and are factored by an in-house row-major
//! LU with partial pivoting whose elimination loop is row-parallel: every row
//! update `row_i ← row_i − l_ik·row_k` is a fixed sequential dot-free
//! operation, so the factorization is bitwise identical for any thread
//! count.  Global Galerkin systems are solved either by that LU (small) or by
//! Jacobi-preconditioned conjugate gradients on a CSR matrix (large), and
//! extremal eigenvalues for condition numbers come from a symmetric
//! eigendecomposition (small) or power/inverse-power iteration (large), all
//! with fixed deterministic starting vectors.

use rayon::prelude::*;

/// Gauss–Legendre nodes and weights on (-1, 1).
///
/// Newton iteration on the Legendre recurrence; the usual Chebyshev-like
/// initial guesses converge in a handful of steps for any practical `n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n and P_n' by upward recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let m = m as f64;
                let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            let dpn = n as f64 * (pn1 - x * pn) / (1.0 - x * x);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for m in 2..=n {
            let m = m as f64;
            let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
            p0 = p1;
            p1 = p2;
        }
        let pn = if n == 1 { x } else { p1 };
        let pn1 = if n == 1 { 1.0 } else { p0 };
        let dpn = n as f64 * (pn1 - x * pn) / (1.0 - x * x);
        let _ = pn;
        xs[k] = x;
        ws[k] = 2.0 / ((1.0 - x * x) * dpn * dpn);
    }
    // Newton starts from decreasing cos; present in increasing order.
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct DenseMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMat { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }
}

/// LU factorization with partial pivoting of a square [`DenseMat`].
pub struct Plu {
    lu: DenseMat,
    /// Row permutation: step k swapped rows k and piv[k].
    piv: Vec<usize>,
}

impl Plu {
    /// Factor `a` in place.  The elimination updates below the pivot row run
    /// in parallel over rows; each row's arithmetic is independent of the
    /// partitioning, so results are identical for any thread count.
    pub fn factor(mut a: DenseMat) -> Result<Plu, String> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            // Pivot: largest |a_ik| on or below the diagonal.
            let mut p = k;
            let mut best = a.at(k, k).abs();
            for i in (k + 1)..n {
                let v = a.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(format!("singular matrix at elimination step {k}"));
            }
            piv[k] = p;
            if p != k {
                let (lo, hi) = (k.min(p), k.max(p));
                let (head, tail) = a.data.split_at_mut(hi * n);
                head[lo * n..lo * n + n].swap_with_slice(&mut tail[..n]);
            }
            let inv = 1.0 / a.at(k, k);
            let (pivot_rows, rest) = a.data.split_at_mut((k + 1) * n);
            let pivot_row = &pivot_rows[k * n..k * n + n];
            rest.par_chunks_mut(n).for_each(|row| {
                let l = row[k] * inv;
                row[k] = l;
                if l != 0.0 {
                    for j in (k + 1)..n {
                        row[j] -= l * pivot_row[j];
                    }
                }
            });
        }
        Ok(Plu { lu: a, piv })
    }

    pub fn n(&self) -> usize {
        self.lu.nrows
    }

    /// Solve `A x = b` for a single right-hand side, in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n();
        assert_eq!(b.len(), n);
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 1..n {
            let row = self.lu.row(i);
            let mut s = b[i];
            for j in 0..i {
                s -= row[j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = b[i];
            for j in (i + 1)..n {
                s -= row[j] * b[j];
            }
            b[i] = s / row[i];
        }
    }

    /// Solve for many right-hand sides stored as the *columns* of a row-major
    /// `n × m` block (row i holds entry i of every RHS), in place.  The inner
    /// loops stream along rows, which vectorizes well; parallelism is over
    /// column chunks and bitwise thread-count independent.
    pub fn solve_many_in_place(&self, rhs: &mut DenseMat) {
        let n = self.n();
        assert_eq!(rhs.nrows, n);
        let m = rhs.ncols;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                let (lo, hi) = (k.min(p), k.max(p));
                let (head, tail) = rhs.data.split_at_mut(hi * m);
                head[lo * m..lo * m + m].swap_with_slice(&mut tail[..m]);
            }
        }
        // Process columns in independent chunks to bound the working set.
        let chunk = 64.min(m).max(1);
        let nchunks = m.div_ceil(chunk);
        let data = std::mem::take(&mut rhs.data);
        // Scatter into per-chunk column-major scratch, solve, gather back.
        let mut scratch: Vec<Vec<f64>> = (0..nchunks)
            .map(|c| {
                let lo = c * chunk;
                let hi = ((c + 1) * chunk).min(m);
                let w = hi - lo;
                let mut s = vec![0.0; n * w];
                for i in 0..n {
                    s[i * w..(i + 1) * w].copy_from_slice(&data[i * m + lo..i * m + hi]);
                }
                s
            })
            .collect();
        scratch.par_iter_mut().for_each(|s| {
            let w = s.len() / n;
            for i in 1..n {
                let row = self.lu.row(i);
                let (past, cur) = s.split_at_mut(i * w);
                let cur = &mut cur[..w];
                for j in 0..i {
                    let l = row[j];
                    if l != 0.0 {
                        let bj = &past[j * w..(j + 1) * w];
                        for (c, &v) in cur.iter_mut().zip(bj) {
                            *c -= l * v;
                        }
                    }
                }
            }
            for i in (0..n).rev() {
                let row = self.lu.row(i);
                let (head, tail) = s.split_at_mut((i + 1) * w);
                let cur = &mut head[i * w..];
                for j in (i + 1)..n {
                    let u = row[j];
                    if u != 0.0 {
                        let bj = &tail[(j - i - 1) * w..(j - i) * w];
                        for (c, &v) in cur.iter_mut().zip(bj) {
                            *c -= u * v;
                        }
                    }
                }
                let inv = 1.0 / row[i];
                for c in cur.iter_mut() {
                    *c *= inv;
                }
            }
        });
        let mut data = data;
        for (c, s) in scratch.iter().enumerate() {
            let lo = c * chunk;
            let w = s.len() / n;
            for i in 0..n {
                data[i * m + lo..i * m + lo + w].copy_from_slice(&s[i * w..(i + 1) * w]);
            }
        }
        rhs.data = data;
    }
}

/// Compressed sparse row matrix (full storage, not symmetry-packed).
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Build from triplets; duplicates are summed in their given order, and
    /// the construction is single-threaded and deterministic.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Csr {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1, k));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (i, j, v) = triplets[k];
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indptr[i + 1] += 1;
                indices.push(j);
                data.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Csr { n, indptr, indices, data }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            y[i] = s;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.indices[k] == i {
                    d[i] = self.data[k];
                }
            }
        }
        d
    }

    /// Symmetrically rescaled copy `D^{-1/2} A D^{-1/2}` (unit diagonal).
    pub fn jacobi_rescaled(&self) -> Csr {
        let d = self.diag();
        let s: Vec<f64> = d.iter().map(|&v| 1.0 / v.sqrt()).collect();
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.indptr[i]..out.indptr[i + 1] {
                out.data[k] *= s[i] * s[out.indices[k]];
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] = self.data[k];
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
///
/// Converges when ‖r‖₂ ≤ tol·‖b‖₂; returns the iteration count alongside the
/// solution.  Fails if the iteration stalls past `max_iter` or the matrix
/// reveals itself indefinite (nonpositive curvature).
pub fn pcg(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize), String> {
    let n = a.n;
    let d = a.diag();
    if d.iter().any(|&v| v <= 0.0) {
        return Err("matrix has a nonpositive diagonal entry".into());
    }
    let minv: Vec<f64> = d.iter().map(|&v| 1.0 / v).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(ri, mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(format!("nonpositive curvature at CG iteration {it}"));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok((x, it + 1));
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(format!("CG did not converge in {max_iter} iterations"))
}

/// Deterministic starting vector for the eigen-iterations: all-ones plus a
/// fixed low-amplitude ripple so it is never orthogonal to an extreme mode.
fn eig_start(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * ((i as f64) * 0.7).sin()).collect();
    let nrm = dot(&v, &v).sqrt();
    for x in &mut v {
        *x /= nrm;
    }
    v
}

/// Largest eigenvalue of an SPD CSR matrix by power iteration.
pub fn lambda_max(a: &Csr, tol: f64, max_iter: usize) -> f64 {
    let n = a.n;
    let mut v = eig_start(n);
    let mut av = vec![0.0; n];
    let mut lam = 0.0;
    for _ in 0..max_iter {
        a.matvec(&v, &mut av);
        let new = dot(&v, &av);
        let nrm = dot(&av, &av).sqrt();
        for i in 0..n {
            v[i] = av[i] / nrm;
        }
        if (new - lam).abs() <= tol * new.abs() {
            return new;
        }
        lam = new;
    }
    lam
}

/// Smallest eigenvalue of an SPD CSR matrix by inverse power iteration with
/// inner CG solves.
pub fn lambda_min(a: &Csr, tol: f64, max_outer: usize) -> Result<f64, String> {
    let n = a.n;
    let mut v = eig_start(n);
    let mut lam = 0.0;
    for _ in 0..max_outer {
        let (w, _iters) = pcg(a, &v, 1e-10, 200_000)?;
        let nrm = dot(&w, &w).sqrt();
        for i in 0..n {
            v[i] = w[i] / nrm;
        }
        let mut av = vec![0.0; n];
        a.matvec(&v, &mut av);
        let new = dot(&v, &av);
        if (new - lam).abs() <= tol * new.abs() {
            return Ok(new);
        }
        lam = new;
    }
    Ok(lam)
}

/// Extremal eigenvalues of a symmetric dense matrix (nalgebra QR algorithm).
pub fn dense_sym_extremal_eigs(m: &nalgebra::DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // Degree ≤ 15 exact: check ∫ x^k on (-1,1).
        for k in 0..=15usize {
            let got: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(k as i32)).sum();
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((got - want).abs() < 1e-13, "k={k}: {got} vs {want}");
        }
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn plu_solves_random_system() {
        let n = 40;
        let mut a = DenseMat::zeros(n, n);
        // Deterministic well-conditioned test matrix.
        for i in 0..n {
            for j in 0..n {
                *a.at_mut(i, j) = ((i * 31 + j * 17) % 13) as f64 / 13.0;
            }
            *a.at_mut(i, i) += 10.0;
        }
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = dot(a.row(i), &xs);
        }
        let mut rhs2 = DenseMat::zeros(n, 3);
        for i in 0..n {
            rhs2.row_mut(i)[0] = b[i];
            rhs2.row_mut(i)[1] = 2.0 * b[i];
            rhs2.row_mut(i)[2] = -b[i];
        }
        let lu = Plu::factor(a).unwrap();
        lu.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - xs[i]).abs() < 1e-11);
        }
        lu.solve_many_in_place(&mut rhs2);
        for i in 0..n {
            assert!((rhs2.row(i)[0] - xs[i]).abs() < 1e-11);
            assert!((rhs2.row(i)[1] - 2.0 * xs[i]).abs() < 1e-11);
            assert!((rhs2.row(i)[2] + xs[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn pcg_and_eigs_on_laplacian_stencil() {
        // 1D Dirichlet Laplacian: eigenvalues 2-2cos(kπ/(n+1)) known.
        let n = 200;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i > 0 {
                trip.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
        }
        let a = Csr::from_triplets(n, &trip);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 / 10.0).sin()).collect();
        let (x, _) = pcg(&a, &b, 1e-12, 10_000).unwrap();
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        let res: f64 = ax.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        assert!(res < 1e-10);
        let pi = std::f64::consts::PI;
        let lmax_true = 2.0 - 2.0 * ((n as f64) * pi / (n as f64 + 1.0)).cos();
        let lmin_true = 2.0 - 2.0 * (pi / (n as f64 + 1.0)).cos();
        let lmax = lambda_max(&a, 1e-12, 100_000);
        let lmin = lambda_min(&a, 1e-11, 200).unwrap();
        assert!((lmax - lmax_true).abs() < 1e-6 * lmax_true);
        assert!((lmin - lmin_true).abs() < 1e-6 * lmin_true);
        let (dlo, dhi) = dense_sym_extremal_eigs(&a.to_dense());
        assert!((dlo - lmin_true).abs() < 1e-9);
        assert!((dhi - lmax_true).abs() < 1e-9);
    }
}
