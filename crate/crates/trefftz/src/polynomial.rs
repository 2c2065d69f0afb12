//! Bivariate polynomials about a movable center, with the anti-Laplacian.
//!
//! Everything interior-polynomial in the method (bubble Laplacians, Green
//! reductions of area integrals, edge spanning sets) runs through [`Poly2`]:
//! a dense triangular coefficient table for
//!
//! ```text
//! p(x) = Σ_{i+j ≤ deg} c_{ij} (x₁-z₁)^i (x₂-z₂)^j
//! ```
//!
//! about a center `z`.  Centering at the cell centroid keeps the powers O(h)
//! and the coefficient magnitudes tame under differentiation and
//! multiplication.
//!
//! The key nontrivial operation is [`Poly2::anti_laplacian`]: for each
//! homogeneous part `p_d` of degree `d` it applies the closed-form inverse
//!
//! ```text
//! Λ(p_d) = Σ_{k=0}^{⌊d/2⌋} (-1)^k (d-k)!/((d+1)!(k+1)!) · (|x-z|²/4)^{k+1} Δ^k p_d,
//! ```
//!
//! which satisfies Δ Λ(p_d) = p_d exactly; summing over parts inverts Δ on
//! all of P_d.  This turns every area integral of a polynomial into a
//! boundary integral via the divergence theorem, which is how the assembly
//! avoids interior quadrature entirely.

use crate::geometry::Pt;

/// Index of the coefficient of `dx^i dy^j` inside the triangular table:
/// degree block `d = i+j` starts at `d(d+1)/2`, entry `j` inside the block.
#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Number of coefficients of a polynomial of total degree ≤ `deg`.
#[inline]
pub fn dim_p(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

/// Dense bivariate polynomial about a center point.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    center: Pt,
    deg: usize,
    /// Triangular coefficient table, length `dim_p(deg)`; see [`tri_index`].
    c: Vec<f64>,
}

impl Poly2 {
    /// The zero polynomial (degree 0, single zero coefficient).
    pub fn zero(center: Pt) -> Self {
        Poly2 { center, deg: 0, c: vec![0.0] }
    }

    /// The constant polynomial `v`.
    pub fn constant(center: Pt, v: f64) -> Self {
        Poly2 { center, deg: 0, c: vec![v] }
    }

    /// The monomial `(x₁-z₁)^i (x₂-z₂)^j`.
    pub fn monomial(center: Pt, i: usize, j: usize) -> Self {
        let deg = i + j;
        let mut c = vec![0.0; dim_p(deg)];
        c[tri_index(i, j)] = 1.0;
        Poly2 { center, deg, c }
    }

    /// Affine polynomial `c00 + cx·(x₁-z₁) + cy·(x₂-z₂)`.
    pub fn linear(center: Pt, c00: f64, cx: f64, cy: f64) -> Self {
        Poly2 { center, deg: 1, c: vec![c00, cx, cy] }
    }

    /// Build from a raw triangular coefficient table of degree `deg`.
    pub fn from_coeffs(center: Pt, deg: usize, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), dim_p(deg), "coefficient table length mismatch");
        let mut p = Poly2 { center, deg, c };
        p.trim();
        p
    }

    pub fn center(&self) -> Pt {
        self.center
    }

    pub fn degree(&self) -> usize {
        self.deg
    }

    /// Coefficient of `dx^i dy^j` (0 beyond the stored degree).
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.deg {
            0.0
        } else {
            self.c[tri_index(i, j)]
        }
    }

    /// Set a coefficient, growing the table if needed.
    pub fn set_coeff(&mut self, i: usize, j: usize, v: f64) {
        if i + j > self.deg {
            self.grow_to(i + j);
        }
        self.c[tri_index(i, j)] = v;
    }

    fn grow_to(&mut self, deg: usize) {
        if deg > self.deg {
            self.c.resize(dim_p(deg), 0.0);
            self.deg = deg;
        }
    }

    /// Drop top-degree blocks that are exactly zero.
    pub fn trim(&mut self) {
        while self.deg > 0 {
            let lo = dim_p(self.deg - 1);
            if self.c[lo..].iter().all(|&v| v == 0.0) {
                self.c.truncate(lo);
                self.deg -= 1;
            } else {
                break;
            }
        }
    }

    /// Largest absolute coefficient (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Evaluate at a point.
    pub fn eval(&self, x: Pt) -> f64 {
        let dx = x.x - self.center.x;
        let dy = x.y - self.center.y;
        // Powers up to deg, then one pass over the table.
        let mut px = [0.0f64; 32];
        let mut py = [0.0f64; 32];
        assert!(self.deg < 32, "degree too large");
        px[0] = 1.0;
        py[0] = 1.0;
        for k in 1..=self.deg {
            px[k] = px[k - 1] * dx;
            py[k] = py[k - 1] * dy;
        }
        let mut s = 0.0;
        let mut idx = 0;
        for d in 0..=self.deg {
            for j in 0..=d {
                s += self.c[idx] * px[d - j] * py[j];
                idx += 1;
            }
        }
        s
    }

    /// Gradient evaluated at a point.
    pub fn grad_at(&self, x: Pt) -> Pt {
        Pt { x: self.dx().eval(x), y: self.dy().eval(x) }
    }

    /// Partial derivative ∂/∂x₁.
    pub fn dx(&self) -> Poly2 {
        if self.deg == 0 {
            return Poly2::zero(self.center);
        }
        let deg = self.deg - 1;
        let mut c = vec![0.0; dim_p(deg)];
        for d in 1..=self.deg {
            for j in 0..=d {
                let i = d - j;
                if i >= 1 {
                    c[tri_index(i - 1, j)] += i as f64 * self.c[tri_index(i, j)];
                }
            }
        }
        Poly2::from_coeffs(self.center, deg, c)
    }

    /// Partial derivative ∂/∂x₂.
    pub fn dy(&self) -> Poly2 {
        if self.deg == 0 {
            return Poly2::zero(self.center);
        }
        let deg = self.deg - 1;
        let mut c = vec![0.0; dim_p(deg)];
        for d in 1..=self.deg {
            for j in 0..=d {
                if j >= 1 {
                    c[tri_index(d - j, j - 1)] += j as f64 * self.c[tri_index(d - j, j)];
                }
            }
        }
        Poly2::from_coeffs(self.center, deg, c)
    }

    /// Laplacian Δp = p_xx + p_yy.
    pub fn laplacian(&self) -> Poly2 {
        if self.deg < 2 {
            return Poly2::zero(self.center);
        }
        let deg = self.deg - 2;
        let mut c = vec![0.0; dim_p(deg)];
        for d in 2..=self.deg {
            for j in 0..=d {
                let i = d - j;
                let v = self.c[tri_index(i, j)];
                if v == 0.0 {
                    continue;
                }
                if i >= 2 {
                    c[tri_index(i - 2, j)] += (i * (i - 1)) as f64 * v;
                }
                if j >= 2 {
                    c[tri_index(i, j - 2)] += (j * (j - 1)) as f64 * v;
                }
            }
        }
        Poly2::from_coeffs(self.center, deg, c)
    }

    /// Sum of two polynomials about the same center.
    pub fn add(&self, other: &Poly2) -> Poly2 {
        self.axpy(1.0, other)
    }

    /// `self + a·other` (same center required).
    pub fn axpy(&self, a: f64, other: &Poly2) -> Poly2 {
        assert_eq!(self.center, other.center, "center mismatch in axpy");
        let deg = self.deg.max(other.deg);
        let mut c = vec![0.0; dim_p(deg)];
        c[..self.c.len()].copy_from_slice(&self.c);
        for (k, &v) in other.c.iter().enumerate() {
            c[k] += a * v;
        }
        Poly2::from_coeffs(self.center, deg, c)
    }

    /// Scalar multiple.
    pub fn scale(&self, a: f64) -> Poly2 {
        let mut p = self.clone();
        for v in &mut p.c {
            *v *= a;
        }
        p
    }

    /// Product of two polynomials about the same center.
    pub fn mul(&self, other: &Poly2) -> Poly2 {
        assert_eq!(self.center, other.center, "center mismatch in mul");
        let deg = self.deg + other.deg;
        let mut c = vec![0.0; dim_p(deg)];
        for da in 0..=self.deg {
            for ja in 0..=da {
                let a = self.c[tri_index(da - ja, ja)];
                if a == 0.0 {
                    continue;
                }
                for db in 0..=other.deg {
                    for jb in 0..=db {
                        let b = other.c[tri_index(db - jb, jb)];
                        if b != 0.0 {
                            c[tri_index(da - ja + db - jb, ja + jb)] += a * b;
                        }
                    }
                }
            }
        }
        Poly2::from_coeffs(self.center, deg, c)
    }

    /// Split into homogeneous parts `p = Σ_d p_d`; entry `d` of the result
    /// is the degree-`d` part (possibly zero).
    pub fn homogeneous_decompose(&self) -> Vec<Poly2> {
        (0..=self.deg)
            .map(|d| {
                let lo = dim_p(d) - (d + 1);
                let mut c = vec![0.0; dim_p(d)];
                c[lo..].copy_from_slice(&self.c[lo..dim_p(d)]);
                Poly2::from_coeffs(self.center, d, c)
            })
            .collect()
    }

    /// A polynomial `q` with `Δq = p` exactly, built per homogeneous part by
    /// the closed-form inverse (see the module docs).  The result has degree
    /// `deg + 2` and the same center.
    pub fn anti_laplacian(&self) -> Poly2 {
        // |x-z|²/4 about the same center.
        let mut r2q = Poly2::from_coeffs(self.center, 2, vec![0.0, 0.0, 0.0, 0.25, 0.0, 0.25]);
        let _ = &mut r2q;
        let mut out = Poly2::zero(self.center);
        for (d, pd) in self.homogeneous_decompose().into_iter().enumerate() {
            if pd.max_abs_coeff() == 0.0 {
                continue;
            }
            // Σ_k (-1)^k (d-k)!/((d+1)!(k+1)!) (|x|²/4)^{k+1} Δ^k p_d
            let mut lap = pd; // Δ^k p_d
            let mut r2q_pow = r2q.clone(); // (|x|²/4)^{k+1}
            for k in 0..=(d / 2) {
                // (d-k)!/(d+1)! = 1/∏_{m=d-k+1}^{d+1} m, then divide by (k+1)!.
                let mut coef = 1.0;
                for m in (d - k + 1)..=(d + 1) {
                    coef /= m as f64;
                }
                for m in 2..=(k + 1) {
                    coef /= m as f64;
                }
                if k % 2 == 1 {
                    coef = -coef;
                }
                out = out.axpy(coef, &r2q_pow.mul(&lap));
                lap = lap.laplacian();
                if lap.max_abs_coeff() == 0.0 {
                    break;
                }
                r2q_pow = r2q_pow.mul(&r2q);
            }
        }
        out
    }

    /// Re-express about a new center without changing the function.
    pub fn recenter(&self, new_center: Pt) -> Poly2 {
        if new_center == self.center {
            return self.clone();
        }
        // x - z_old = (x - z_new) + s with s = z_new - z_old.
        let sx = new_center.x - self.center.x;
        let sy = new_center.y - self.center.y;
        let deg = self.deg;
        let binom = binomial_table(deg);
        let mut c = vec![0.0; dim_p(deg)];
        let mut pows_x = vec![1.0; deg + 1];
        let mut pows_y = vec![1.0; deg + 1];
        for k in 1..=deg {
            pows_x[k] = pows_x[k - 1] * sx;
            pows_y[k] = pows_y[k - 1] * sy;
        }
        for d in 0..=self.deg {
            for j in 0..=d {
                let i = d - j;
                let v = self.c[tri_index(i, j)];
                if v == 0.0 {
                    continue;
                }
                // (dx'+sx)^i (dy'+sy)^j expanded binomially.
                for a in 0..=i {
                    for b in 0..=j {
                        c[tri_index(a, b)] +=
                            v * binom[i][a] * pows_x[i - a] * binom[j][b] * pows_y[j - b];
                    }
                }
            }
        }
        Poly2::from_coeffs(new_center, deg, c)
    }
}

/// Pascal's triangle up to row `n`.
pub(crate) fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut b = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        b[i][0] = 1.0;
        for j in 1..=i {
            b[i][j] = b[i - 1][j - 1] + if j <= i - 1 { b[i - 1][j] } else { 0.0 };
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_poly(rng: &mut ChaCha8Rng, center: Pt, deg: usize) -> Poly2 {
        let c: Vec<f64> = (0..dim_p(deg)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Poly2::from_coeffs(center, deg, c)
    }

    #[test]
    fn eval_and_derivatives_match_hand_values() {
        // p = 2 + 3x - y + x²y about the origin.
        let z = Pt { x: 0.0, y: 0.0 };
        let mut p = Poly2::zero(z);
        p.set_coeff(0, 0, 2.0);
        p.set_coeff(1, 0, 3.0);
        p.set_coeff(0, 1, -1.0);
        p.set_coeff(2, 1, 1.0);
        let x = Pt { x: 0.5, y: -2.0 };
        assert!((p.eval(x) - (2.0 + 1.5 + 2.0 + 0.25 * -2.0)).abs() < 1e-15);
        let g = p.grad_at(x);
        assert!((g.x - (3.0 + 2.0 * 0.5 * -2.0)).abs() < 1e-15);
        assert!((g.y - (-1.0 + 0.25)).abs() < 1e-15);
        // Δ(x²y) = 2y.
        let lap = p.laplacian();
        assert!((lap.eval(x) - 2.0 * x.y).abs() < 1e-15);
    }

    #[test]
    fn product_of_binomials() {
        // (x+y)·(x+y) = x² + 2xy + y².
        let z = Pt { x: 0.0, y: 0.0 };
        let s = Poly2::linear(z, 0.0, 1.0, 1.0);
        let sq = s.mul(&s);
        assert_eq!(sq.coeff(2, 0), 1.0);
        assert_eq!(sq.coeff(1, 1), 2.0);
        assert_eq!(sq.coeff(0, 2), 1.0);
    }

    #[test]
    fn recenter_preserves_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = Pt { x: 0.3, y: -1.2 };
        let p = random_poly(&mut rng, z, 6);
        let q = p.recenter(Pt { x: -0.9, y: 0.4 });
        for _ in 0..50 {
            let x = Pt { x: rng.gen_range(-2.0..2.0), y: rng.gen_range(-2.0..2.0) };
            assert!((p.eval(x) - q.eval(x)).abs() < 1e-11 * (1.0 + p.eval(x).abs()));
        }
    }

    #[test]
    fn homogeneous_parts_sum_back_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = Pt { x: 0.1, y: 0.2 };
        let p = random_poly(&mut rng, z, 5);
        let parts = p.homogeneous_decompose();
        let mut sum = Poly2::zero(z);
        for q in &parts {
            sum = sum.add(q);
        }
        for k in 0..p.c.len() {
            assert!((sum.c[k] - p.c[k]).abs() < 1e-15);
        }
        // Part d scales as λ^d about the center.
        let lam = 1.7;
        for (d, q) in parts.iter().enumerate() {
            let x = Pt { x: 0.43, y: -0.31 };
            let xl = Pt { x: z.x + lam * (x.x - z.x), y: z.y + lam * (x.y - z.y) };
            assert!(
                (q.eval(xl) - lam.powi(d as i32) * q.eval(x)).abs() < 1e-12,
                "degree {d} part not homogeneous"
            );
        }
    }

    #[test]
    fn anti_laplacian_known_cases() {
        let z = Pt { x: 0.0, y: 0.0 };
        // Λ(1) = |x|²/4.
        let q = Poly2::constant(z, 1.0).anti_laplacian();
        assert!((q.coeff(2, 0) - 0.25).abs() < 1e-15);
        assert!((q.coeff(0, 2) - 0.25).abs() < 1e-15);
        // Λ(x) = x|x|²/8.
        let q = Poly2::monomial(z, 1, 0).anti_laplacian();
        assert!((q.coeff(3, 0) - 0.125).abs() < 1e-15);
        assert!((q.coeff(1, 2) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn anti_laplacian_inverts_laplacian_on_random_polys() {
        // 200 random polynomials of degree ≤ 8, coefficientwise relative check.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..200 {
            let z = Pt { x: rng.gen_range(-1.0..1.0), y: rng.gen_range(-1.0..1.0) };
            let deg = rng.gen_range(0..=8);
            let p = random_poly(&mut rng, z, deg);
            let q = p.anti_laplacian();
            let back = q.laplacian();
            let scale = p.max_abs_coeff().max(1e-300);
            for d in 0..=deg {
                for j in 0..=d {
                    let err = (back.coeff(d - j, j) - p.coeff(d - j, j)).abs();
                    assert!(
                        err <= 1e-12 * scale,
                        "trial {trial}: coeff ({},{j}) off by {err:e}",
                        d - j
                    );
                }
            }
            assert!(back.degree() <= deg);
        }
    }

    #[test]
    fn anti_laplacian_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = Pt { x: 0.5, y: 0.5 };
        let p = random_poly(&mut rng, z, 6);
        let q = random_poly(&mut rng, z, 4);
        let lhs = p.axpy(2.5, &q).anti_laplacian();
        let rhs = p.anti_laplacian().axpy(2.5, &q.anti_laplacian());
        let x = Pt { x: 0.9, y: 0.1 };
        assert!((lhs.eval(x) - rhs.eval(x)).abs() < 1e-12);
    }
}
