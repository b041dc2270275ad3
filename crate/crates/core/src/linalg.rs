//! Shared dense / banded / iterative linear algebra.
//!
//! Operators in this crate are self-adjoint with respect to the weighted
//! inner product `(a, b)₀ = Σ wᵢ aᵢ bᵢ`, not symmetric as plain matrices.
//! The similarity transform `M = W^{1/2} A W^{-1/2}` turns such an operator
//! into an exactly symmetric matrix, so standard symmetric factorizations and
//! eigensolvers apply and orthonormality maps back to `(·,·)₀`-orthonormality.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `W^{1/2} A W^{-1/2}`, symmetrized against roundoff.
pub(crate) fn weighted_symmetrize(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = s[i] * a[(i, j)] / s[j];
        }
    }
    // exact symmetry for the eigen/Cholesky routines
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn weighted_norm(w: &[f64], v: &DVector<f64>) -> f64 {
    v.iter()
        .zip(w)
        .map(|(x, wi)| wi * x * x)
        .sum::<f64>()
        .sqrt()
}

/// Solves `A x = b` for an operator self-adjoint positive definite in the
/// weighted inner product. Cholesky on the symmetrized form first; partial
/// pivoting LU on the raw matrix when the system is numerically semidefinite
/// (Cholesky hits a nonpositive pivot). Returns the solution and the relative
/// residual in the weighted norm; fails above `tol`.
pub(crate) fn solve_self_adjoint(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    w: &[f64],
    tol: f64,
) -> Result<(DVector<f64>, f64)> {
    let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let m = weighted_symmetrize(a, w);
    let bs = DVector::from_fn(b.len(), |i, _| b[i] * s[i]);

    let x = match m.clone().cholesky() {
        Some(ch) => {
            let y = ch.solve(&bs);
            DVector::from_fn(y.len(), |i, _| y[i] / s[i])
        }
        None => {
            // numerically semidefinite; LU is backward stable and keeps the
            // residual small even at extreme condition numbers
            match m.lu().solve(&bs) {
                Some(y) => DVector::from_fn(y.len(), |i, _| y[i] / s[i]),
                None => {
                    return Err(Error::SolverFailure {
                        residual: f64::INFINITY,
                        tolerance: tol,
                    })
                }
            }
        }
    };

    let resid = weighted_norm(w, &(a * &x - b));
    let scale = weighted_norm(w, b).max(f64::MIN_POSITIVE);
    let rel = resid / scale;
    if rel.is_finite() && rel <= tol {
        Ok((x, rel))
    } else {
        Err(Error::SolverFailure { residual: rel, tolerance: tol })
    }
}

/// Eigendecomposition of an operator self-adjoint in the weighted inner
/// product. Returns eigenvalues in descending order and the matrix whose
/// columns are the `(·,·)₀`-orthonormal eigenfields.
pub(crate) fn weighted_eigendecomposition(
    a: &DMatrix<f64>,
    w: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let m = weighted_symmetrize(a, w);
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenFailure("symmetric QR did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut basis = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            basis[(i, dst)] = eig.eigenvectors[(i, src)] / s[i];
        }
    }
    Ok((values, basis))
}

/// Singular value decomposition of an arbitrary operator with respect to the
/// weighted inner product: `A = Σ σₙ uₙ (vₙ, ·)₀` with both systems
/// `(·,·)₀`-orthonormal. Returns (singular values descending, U, V).
pub(crate) fn weighted_svd(
    a: &DMatrix<f64>,
    w: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = s[i] * a[(i, j)] / s[j];
        }
    }
    let svd = nalgebra::SVD::try_new(m, true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenFailure("SVD did not converge".into()))?;
    let u_m = svd.u.unwrap();
    let vt_m = svd.v_t.unwrap();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            u[(i, dst)] = u_m[(i, src)] / s[i];
            v[(i, dst)] = vt_m[(src, i)] / s[i];
        }
    }
    Ok((values, u, v))
}

/// Lower-banded Cholesky factorization of a symmetric positive-definite
/// matrix, stored by diagonals: `data[d][r]` holds entry `(r + d, r)`.
pub(crate) struct BandedSpd {
    n: usize,
    band: usize,
    data: Vec<Vec<f64>>,
}

impl BandedSpd {
    pub fn new(n: usize, band: usize) -> BandedSpd {
        let data = (0..=band).map(|d| vec![0.0; n - d]).collect();
        BandedSpd { n, band, data }
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        // symmetric: store lower triangle only
        let (lo, hi) = if r >= c { (c, r) } else { (r, c) };
        if r >= c {
            self.data[hi - lo][lo] += v;
        }
    }

    /// In-place factorization; fails on a nonpositive pivot.
    pub fn factorize(&mut self) -> Result<()> {
        for k in 0..self.n {
            let mut d = self.data[0][k];
            let start = k.saturating_sub(self.band);
            for p in start..k {
                let l = self.get(k, p);
                d -= l * l;
            }
            if d <= 0.0 {
                return Err(Error::SolverFailure {
                    residual: d,
                    tolerance: 0.0,
                });
            }
            let d = d.sqrt();
            self.data[0][k] = d;
            let end = (k + self.band).min(self.n - 1);
            for r in (k + 1)..=end {
                let mut v = self.get(r, k);
                for p in start..k {
                    if r - p <= self.band {
                        v -= self.get(r, p) * self.get(k, p);
                    }
                }
                self.set(r, k, v / d);
            }
        }
        Ok(())
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r - c][c]
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r - c][c] = v;
    }

    /// Solves `L Lᵀ x = b` after [`Self::factorize`].
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        for k in 0..self.n {
            let start = k.saturating_sub(self.band);
            let mut v = y[k];
            for p in start..k {
                v -= self.get(k, p) * y[p];
            }
            y[k] = v / self.get(k, k);
        }
        for k in (0..self.n).rev() {
            let end = (k + self.band).min(self.n - 1);
            let mut v = y[k];
            for r in (k + 1)..=end {
                v -= self.get(r, k) * y[r];
            }
            y[k] = v / self.get(k, k);
        }
        y
    }
}

/// Conjugate gradients for an operator self-adjoint positive definite in the
/// weighted inner product, run directly in that inner product. Returns the
/// solution and the relative residual reached.
pub(crate) fn cg_self_adjoint(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    w: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, f64)> {
    let dot = |u: &DVector<f64>, v: &DVector<f64>| -> f64 {
        u.iter().zip(v.iter()).zip(w).map(|((x, y), wi)| wi * x * y).sum()
    };
    let bnorm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() / bnorm <= tol {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        x += &p * alpha;
        r -= &ap * alpha;
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p = &r + &p * beta;
    }
    let rel = rr.sqrt() / bnorm;
    if rel <= tol {
        Ok((x, rel))
    } else {
        Err(Error::SolverFailure { residual: rel, tolerance: tol })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_spd_weighted(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        // deterministic pseudo-random SPD (in weighted sense) test matrix
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let b = DMatrix::from_fn(n, n, |_, _| next());
        let w: Vec<f64> = (0..n).map(|i| 0.5 + (i as f64) / n as f64).collect();
        // A = W^{-1/2} (B Bᵀ + I) W^{1/2} is SPD in the W inner product
        let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let sym = &b * b.transpose() + DMatrix::identity(n, n);
        let a = DMatrix::from_fn(n, n, |i, j| sym[(i, j)] * s[j] / s[i]);
        (a, w)
    }

    #[test]
    fn solve_self_adjoint_small_system() {
        let (a, w) = random_spd_weighted(12, 3);
        let b = DVector::from_fn(12, |i, _| (i as f64 * 0.7).cos());
        let (x, rel) = solve_self_adjoint(&a, &b, &w, 1e-10).unwrap();
        assert!(rel <= 1e-12);
        assert!(((&a * &x) - &b).amax() <= 1e-10);
    }

    #[test]
    fn eigendecomposition_reconstructs() {
        let (a, w) = random_spd_weighted(10, 7);
        let (vals, basis) = weighted_eigendecomposition(&a, &w).unwrap();
        assert!(vals.windows(2).all(|p| p[0] >= p[1]));
        // A q_k = λ_k q_k
        for k in 0..10 {
            let q = basis.column(k).into_owned();
            let r = &a * &q - &q * vals[k];
            assert!(r.amax() <= 1e-9 * vals[0]);
        }
        // W-orthonormality
        for i in 0..10 {
            for j in 0..10 {
                let g: f64 = (0..10)
                    .map(|k| w[k] * basis[(k, i)] * basis[(k, j)])
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalues_invariant_under_node_reordering() {
        let (a, w) = random_spd_weighted(9, 11);
        let perm: Vec<usize> = vec![4, 0, 7, 2, 8, 1, 5, 3, 6];
        let pa = DMatrix::from_fn(9, 9, |i, j| a[(perm[i], perm[j])]);
        let pw: Vec<f64> = perm.iter().map(|&k| w[k]).collect();
        let (v0, _) = weighted_eigendecomposition(&a, &w).unwrap();
        let (v1, _) = weighted_eigendecomposition(&pa, &pw).unwrap();
        for (x, y) in v0.iter().zip(&v1) {
            assert!((x - y).abs() <= 1e-8 * v0[0].abs());
        }
    }

    #[test]
    fn banded_matches_dense_solve() {
        // 1-D Dirichlet-like tridiagonal, SPD
        let n = 40;
        let mut band = BandedSpd::new(n, 1);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            band.add(i, i, 2.5);
            dense[(i, i)] = 2.5;
            if i + 1 < n {
                band.add(i + 1, i, -1.0);
                dense[(i + 1, i)] = -1.0;
                dense[(i, i + 1)] = -1.0;
            }
        }
        band.factorize().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let x = band.solve(&b);
        let xd = dense.lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn cg_matches_direct() {
        let (a, w) = random_spd_weighted(30, 5);
        let b = DVector::from_fn(30, |i, _| 1.0 / (1.0 + i as f64));
        let (x0, _) = solve_self_adjoint(&a, &b, &w, 1e-10).unwrap();
        let (x1, rel) = cg_self_adjoint(|v| &a * v, &b, &w, 1e-12, 1000).unwrap();
        assert!(rel <= 1e-12);
        assert!((&x0 - &x1).amax() <= 1e-8 * x0.amax());
    }
}
