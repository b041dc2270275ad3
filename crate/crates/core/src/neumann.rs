//! The discrete model operator `N = −βΔ + μI` with reflective (ghost-node)
//! Neumann closure.
//!
//! The five-point stencil with mirrored ghost nodes is exactly self-adjoint
//! in the trapezoid inner product, which every duality identity downstream
//! relies on. Discrete eigenfunctions are the grid cosines: applying `N` to
//! `cos(kπx)` multiplies it by `β(2 − 2cos(kπh))/h² + μ` exactly.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{cg_self_adjoint, BandedSpd};
use crate::par;

/// Nodes up to which solves use the direct banded factorization; above it,
/// conjugate gradients on the stencil.
const DIRECT_SOLVE_NODE_CAP: usize = 201 * 201;

/// Relative residual required from [`NeumannOperator::solve`].
pub const SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NeumannOperator {
    grid: Arc<Grid>,
    beta: f64,
    mu: f64,
}

impl NeumannOperator {
    /// Assembles `N = −βΔ + μI` on the grid. Requires `μ > 0` (coercivity)
    /// and `β ≥ 0`.
    pub fn assemble(grid: &Arc<Grid>, beta: f64, mu: f64) -> Result<NeumannOperator> {
        if !(mu > 0.0) {
            return Err(Error::invalid(format!("mu must be > 0 (got {mu}); coercivity lost")));
        }
        if !(beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be >= 0 (got {beta})")));
        }
        Ok(NeumannOperator { grid: Arc::clone(grid), beta, mu })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Upper bound on the operator norm in `(·,·)₀`.
    pub fn norm_bound(&self) -> f64 {
        let mut b = self.mu + 4.0 * self.beta / (self.grid.hx() * self.grid.hx());
        if !self.grid.is_1d() {
            b += 4.0 * self.beta / (self.grid.hy() * self.grid.hy());
        }
        b
    }

    /// Visits the nonzero entries `(column, coefficient)` of row `k`.
    fn stencil_row(&self, k: usize, mut visit: impl FnMut(usize, f64)) {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let i = k % nx;
        let j = k / nx;
        let mut diag = self.mu;
        if self.beta > 0.0 {
            let cx = self.beta / (g.hx() * g.hx());
            for di in [-1isize, 1] {
                let ii = reflect(i as isize + di, nx);
                diag += cx;
                visit(j * nx + ii, -cx);
            }
            if ny > 1 {
                let cy = self.beta / (g.hy() * g.hy());
                for dj in [-1isize, 1] {
                    let jj = reflect(j as isize + dj, ny);
                    diag += cy;
                    visit(jj * nx + i, -cy);
                }
            }
        }
        visit(k, diag);
    }

    pub(crate) fn apply_slice(&self, src: &[f64], dst: &mut [f64]) {
        for (k, out) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            self.stencil_row(k, |col, coeff| acc += coeff * src[col]);
            *out = acc;
        }
    }

    /// Applies the stencil.
    pub fn apply(&self, phi: &Field) -> Result<Field> {
        self.grid.check_same(phi.grid())?;
        let mut out = vec![0.0; phi.len()];
        self.apply_slice(phi.values(), &mut out);
        Ok(Field::from_vector(&self.grid, DVector::from_vec(out)))
    }

    /// `N²φ`, by applying the stencil twice.
    pub fn apply_squared(&self, phi: &Field) -> Result<Field> {
        let once = self.apply(phi)?;
        self.apply(&once)
    }

    /// Solves `Nφ = rhs` to relative residual [`SOLVE_TOLERANCE`] in the
    /// weighted norm. Direct banded Cholesky at desk scale, conjugate
    /// gradients above.
    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        self.grid.check_same(rhs.grid())?;
        let n = self.grid.node_count();
        let x = if n <= DIRECT_SOLVE_NODE_CAP {
            let band = if self.grid.is_1d() || self.beta == 0.0 {
                if self.beta == 0.0 { 0 } else { 1 }
            } else {
                self.grid.nx()
            };
            let w = self.grid.weights();
            let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
            let mut m = BandedSpd::new(n, band);
            for k in 0..n {
                self.stencil_row(k, |col, coeff| {
                    m.add(k, col, s[k] * coeff / s[col]);
                });
            }
            m.factorize().map_err(|_| Error::SolverFailure {
                residual: f64::INFINITY,
                tolerance: SOLVE_TOLERANCE,
            })?;
            let bs: Vec<f64> = rhs.values().iter().zip(&s).map(|(b, si)| b * si).collect();
            let y = m.solve(&bs);
            DVector::from_fn(n, |i, _| y[i] / s[i])
        } else {
            let max_iter = 40 * (n as f64).sqrt() as usize + 200;
            let (x, _) = cg_self_adjoint(
                |v| {
                    let mut out = vec![0.0; n];
                    self.apply_slice(v.as_slice(), &mut out);
                    DVector::from_vec(out)
                },
                rhs.vector(),
                self.grid.weights(),
                SOLVE_TOLERANCE / 10.0,
                max_iter,
            )?;
            x
        };

        let phi = Field::from_vector(&self.grid, x);
        let residual = (&self.apply(&phi)? - rhs).norm();
        let scale = rhs.norm().max(f64::MIN_POSITIVE);
        if residual / scale > SOLVE_TOLERANCE {
            return Err(Error::SolverFailure {
                residual: residual / scale,
                tolerance: SOLVE_TOLERANCE,
            });
        }
        Ok(phi)
    }

    /// Dense matrix of the stencil (column `k` is `N e_k`).
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.grid.node_count();
        par::fill_columns(n, n, |j, col| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            self.apply_slice(&e, col);
        })
    }

    /// Dense matrix of `N²`.
    pub(crate) fn dense_squared(&self) -> DMatrix<f64> {
        let n = self.grid.node_count();
        par::fill_columns(n, n, |j, col| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut tmp = vec![0.0; n];
            self.apply_slice(&e, &mut tmp);
            self.apply_slice(&tmp, col);
        })
    }
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if i < 0 {
        1
    } else if i as usize >= n {
        n - 2
    } else {
        i as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_nonpositive_mu() {
        let g = Grid::new(3, 3).unwrap();
        assert!(NeumannOperator::assemble(&g, 1.0, 0.0).is_err());
        assert!(NeumannOperator::assemble(&g, 1.0, -0.5).is_err());
        assert!(NeumannOperator::assemble(&g, -1.0, 1.0).is_err());
    }

    #[test]
    fn identity_when_beta_zero_mu_one() {
        let g = Grid::new(5, 4).unwrap();
        let n = NeumannOperator::assemble(&g, 0.0, 1.0).unwrap();
        let f = Field::sample(&g, |x, y| x * x - y).unwrap();
        let nf = n.apply(&f).unwrap();
        assert_eq!(nf.values(), f.values());
    }

    #[test]
    fn constant_maps_to_mu_times_constant() {
        let g = Grid::new(7, 9).unwrap();
        let n = NeumannOperator::assemble(&g, 3.2, 0.7).unwrap();
        let c = Field::sample(&g, |_, _| 2.5).unwrap();
        let nc = n.apply(&c).unwrap();
        for v in nc.values() {
            assert!((v - 0.7 * 2.5).abs() <= 1e-13);
        }
    }

    #[test]
    fn discrete_cosine_eigenfunction_3x3() {
        // beta=1, mu=0.1, phi=cos(pi x) on h=0.5: eigenvalue (2-2cos(pi/2))/0.25 + 0.1 = 8.1
        let g = Grid::new(3, 3).unwrap();
        let n = NeumannOperator::assemble(&g, 1.0, 0.1).unwrap();
        let phi = Field::sample(&g, |x, _| (PI * x).cos()).unwrap();
        let nphi = n.apply(&phi).unwrap();
        for (a, b) in nphi.values().iter().zip(phi.values()) {
            assert!((a - 8.1 * b).abs() <= 1e-12, "{a} vs {}", 8.1 * b);
        }
    }

    #[test]
    fn discrete_cosine_eigenfunction_general() {
        let g = Grid::new(17, 17).unwrap();
        let (beta, mu, k) = (2.0, 0.3, 3.0);
        let n = NeumannOperator::assemble(&g, beta, mu).unwrap();
        let h = g.hx();
        let lam = beta * (2.0 - 2.0 * (k * PI * h).cos()) / (h * h) + mu;
        let phi = Field::sample(&g, |x, _| (k * PI * x).cos()).unwrap();
        let nphi = n.apply(&phi).unwrap();
        for (a, b) in nphi.values().iter().zip(phi.values()) {
            assert!((a - lam * b).abs() <= 1e-10 * lam);
        }
    }

    #[test]
    fn self_adjoint_and_coercive_probes() {
        let g = Grid::new(6, 5).unwrap();
        let n = NeumannOperator::assemble(&g, 1.7, 0.01).unwrap();
        let mut seed = 1u64;
        let mut rand = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((seed >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for _ in 0..100 {
            let a = Field::from_values(&g, (0..30).map(|_| rand()).collect()).unwrap();
            let b = Field::from_values(&g, (0..30).map(|_| rand()).collect()).unwrap();
            let na = n.apply(&a).unwrap();
            let nb = n.apply(&b).unwrap();
            let lhs = na.inner_product(&b).unwrap();
            let rhs = a.inner_product(&nb).unwrap();
            let scale = a.norm() * b.norm() * n.norm_bound();
            assert!((lhs - rhs).abs() <= 1e-10 * scale);
            // coercivity: (N a, a) >= mu (a, a)
            let q = na.inner_product(&a).unwrap();
            let aa = a.inner_product(&a).unwrap();
            assert!(q >= 0.01 * aa - 1e-12 * scale);
        }
    }

    #[test]
    fn solve_constant_rhs() {
        let g = Grid::new(9, 9).unwrap();
        let n = NeumannOperator::assemble(&g, 1.0, 0.25).unwrap();
        let rhs = Field::sample(&g, |_, _| 0.25).unwrap();
        let phi = n.solve(&rhs).unwrap();
        for v in phi.values() {
            assert!((v - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn solve_then_apply_roundtrip() {
        let g = Grid::new(8, 6).unwrap();
        let n = NeumannOperator::assemble(&g, 0.9, 0.05).unwrap();
        let f = Field::sample(&g, |x, y| (2.0 * x - 1.0) * (y + 0.2)).unwrap();
        let phi = n.solve(&f).unwrap();
        let back = n.apply(&phi).unwrap();
        assert!((&back - &f).norm() <= 1e-10 * f.norm());
    }

    #[test]
    fn apply_squared_is_apply_twice() {
        let g = Grid::new(5, 5).unwrap();
        let n = NeumannOperator::assemble(&g, 1.0, 0.5).unwrap();
        let f = Field::sample(&g, |x, y| x + 3.0 * y * y).unwrap();
        let a = n.apply_squared(&f).unwrap();
        let b = n.apply(&n.apply(&f).unwrap()).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn dense_matches_apply() {
        let g = Grid::new(4, 3).unwrap();
        let n = NeumannOperator::assemble(&g, 1.3, 0.2).unwrap();
        let m = n.dense();
        let f = Field::sample(&g, |x, y| x - y * y).unwrap();
        let nf = n.apply(&f).unwrap();
        let mf = &m * f.vector();
        for i in 0..12 {
            assert!((nf.values()[i] - mf[i]).abs() <= 1e-13);
        }
        let m2 = n.dense_squared();
        let d = &m * &m - m2;
        assert!(d.amax() <= 1e-10 * m.amax() * m.amax());
    }

    #[test]
    fn one_dimensional_stencil() {
        let g = Grid::new_1d(33).unwrap();
        let n = NeumannOperator::assemble(&g, 1.0, 0.5).unwrap();
        let h = g.hx();
        let lam = (2.0 - 2.0 * (2.0 * PI * h).cos()) / (h * h) + 0.5;
        let phi = Field::sample(&g, |x, _| (2.0 * PI * x).cos()).unwrap();
        let nphi = n.apply(&phi).unwrap();
        for (a, b) in nphi.values().iter().zip(phi.values()) {
            assert!((a - lam * b).abs() <= 1e-10 * lam);
        }
        let sol = n.solve(&nphi).unwrap();
        assert!((&sol - &phi).norm() <= 1e-9);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g1 = Grid::new(3, 3).unwrap();
        let g2 = Grid::new(4, 4).unwrap();
        let n = NeumannOperator::assemble(&g1, 1.0, 1.0).unwrap();
        let f = Field::zeros(&g2);
        assert!(n.apply(&f).is_err());
        assert!(n.solve(&f).is_err());
    }
}
