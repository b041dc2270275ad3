//! Observation operators and their spectral decompositions.
//!
//! A [`DiscreteOperator`] is a dense node-indexed matrix together with its
//! exact adjoint in the weighted inner product, `A* = W⁻¹AᵀW`. Constructors
//! cover the Gaussian-kernel integral operator (Nyström discretization with
//! the grid quadrature), the cumulative-integral Volterra operator on
//! interval grids, and the rank-one averaging operator (the `σ → ∞` limit of
//! the Gaussian kernel).
//!
//! Note that with the default kernel width `σ = 10` on the unit square the
//! kernel varies by only ~1% over the domain, so `K` is numerically close to
//! rank one; its spectrum decays superexponentially and most of it sits far
//! below machine precision. This is a property of the operator, not a defect
//! of the decomposition routines.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{weighted_eigendecomposition, weighted_svd};
use crate::par;

#[derive(Debug)]
pub struct DiscreteOperator {
    grid: Arc<Grid>,
    matrix: DMatrix<f64>,
    adjoint_matrix: OnceLock<DMatrix<f64>>,
    normal_matrix: OnceLock<DMatrix<f64>>,
}

impl DiscreteOperator {
    pub fn from_matrix(grid: &Arc<Grid>, matrix: DMatrix<f64>) -> Result<DiscreteOperator> {
        let n = grid.node_count();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::invalid(format!(
                "operator must be {n}x{n} on this grid, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DiscreteOperator {
            grid: Arc::clone(grid),
            matrix,
            adjoint_matrix: OnceLock::new(),
            normal_matrix: OnceLock::new(),
        })
    }

    /// Identity operator.
    pub fn identity(grid: &Arc<Grid>) -> DiscreteOperator {
        let n = grid.node_count();
        DiscreteOperator::from_matrix(grid, DMatrix::identity(n, n)).unwrap()
    }

    /// Gaussian-kernel integral operator `(Kφ)(x) = ∫ e^(−|x−x'|²/2σ²) φ(x') dx'`
    /// by Nyström discretization with the grid quadrature: `A[i][j] = k(xᵢ,xⱼ)·wⱼ`.
    /// Self-adjoint in `(·,·)₀` because the kernel is symmetric.
    pub fn gaussian_kernel(grid: &Arc<Grid>, sigma: f64) -> Result<DiscreteOperator> {
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        let n = grid.node_count();
        let inv = 1.0 / (2.0 * sigma * sigma);
        let w = grid.weights().to_vec();
        let coords: Vec<(f64, f64)> = (0..n).map(|k| grid.coords(k)).collect();
        let matrix = par::fill_columns(n, n, |j, col| {
            let (xj, yj) = coords[j];
            let wj = w[j];
            for (i, v) in col.iter_mut().enumerate() {
                let (xi, yi) = coords[i];
                let d2 = (xi - xj) * (xi - xj) + (yi - yj) * (yi - yj);
                *v = (-d2 * inv).exp() * wj;
            }
        });
        DiscreteOperator::from_matrix(grid, matrix)
    }

    /// Rank-one averaging operator `Kφ = (1, φ)₀ · 1`, the `σ → ∞` limit of
    /// the Gaussian kernel.
    pub fn averaging(grid: &Arc<Grid>) -> DiscreteOperator {
        let n = grid.node_count();
        let w = grid.weights().to_vec();
        let matrix = par::fill_columns(n, n, |j, col| col.fill(w[j]));
        DiscreteOperator::from_matrix(grid, matrix).unwrap()
    }

    /// Cumulative-integral (Volterra) operator `(Kφ)(x) = ∫₀ˣ φ(z) dz` on an
    /// interval grid, by the composite trapezoid rule: lower triangular up to
    /// the trapezoid half-weights.
    pub fn volterra(grid: &Arc<Grid>) -> Result<DiscreteOperator> {
        if !grid.is_1d() {
            return Err(Error::DimensionMismatch {
                expected: "1-D interval grid",
                got: "2-D grid",
            });
        }
        let n = grid.node_count();
        let h = grid.hx();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 1..n {
            matrix[(i, 0)] = h / 2.0;
            for j in 1..i {
                matrix[(i, j)] = h;
            }
            matrix[(i, i)] = h / 2.0;
        }
        DiscreteOperator::from_matrix(grid, matrix)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.grid.check_same(f.grid())?;
        Ok(Field::from_vector(&self.grid, par::gemv(&self.matrix, f.vector())))
    }

    /// Applies the adjoint without materializing it: `A*f = W⁻¹ Aᵀ (W f)`.
    pub fn apply_adjoint(&self, f: &Field) -> Result<Field> {
        self.grid.check_same(f.grid())?;
        let w = self.grid.weights();
        let wf = DVector::from_fn(f.len(), |i, _| w[i] * f.values()[i]);
        let mut y = self.matrix.tr_mul(&wf);
        for i in 0..y.len() {
            y[i] /= w[i];
        }
        Ok(Field::from_vector(&self.grid, y))
    }

    fn adjoint_entries(&self) -> &DMatrix<f64> {
        self.adjoint_matrix.get_or_init(|| {
            let w = self.grid.weights();
            let n = self.grid.node_count();
            DMatrix::from_fn(n, n, |i, j| self.matrix[(j, i)] * w[j] / w[i])
        })
    }

    /// The adjoint `A* = W⁻¹AᵀW` as an operator. The involution `(A*)* = A`
    /// is exact: the adjoint carries the original entries back.
    pub fn adjoint(&self) -> DiscreteOperator {
        let adj = self.adjoint_entries().clone();
        let back = OnceLock::new();
        back.set(self.matrix.clone()).ok();
        DiscreteOperator {
            grid: Arc::clone(&self.grid),
            matrix: adj,
            adjoint_matrix: back,
            normal_matrix: OnceLock::new(),
        }
    }

    /// Operator composition `self · other`.
    pub fn compose(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        self.grid.check_same(&other.grid)?;
        DiscreteOperator::from_matrix(&self.grid, par::gemm(&self.matrix, &other.matrix))
    }

    /// Dense `A*A`, computed once and cached.
    pub(crate) fn normal_entries(&self) -> &DMatrix<f64> {
        self.normal_matrix
            .get_or_init(|| par::gemm(self.adjoint_entries(), &self.matrix))
    }

    /// The normal operator `A*A`.
    pub fn normal(&self) -> DiscreteOperator {
        DiscreteOperator::from_matrix(&self.grid, self.normal_entries().clone()).unwrap()
    }

    /// The accumulated observability operator `ω · A*A` (symmetric PSD).
    pub fn b_t(&self, omega: f64) -> Result<DiscreteOperator> {
        if !(omega >= 0.0) {
            return Err(Error::invalid(format!("omega must be >= 0, got {omega}")));
        }
        DiscreteOperator::from_matrix(&self.grid, self.normal_entries() * omega)
    }

    /// Eigendecomposition of `A*A`: total `(·,·)₀`-orthonormal system with
    /// nonnegative eigenvalues (roundoff negatives clamped to zero).
    pub fn normal_spectrum(&self) -> Result<Spectrum> {
        let (mut values, basis) =
            weighted_eigendecomposition(self.normal_entries(), self.grid.weights())?;
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Spectrum {
            grid: Arc::clone(&self.grid),
            values,
            right: basis,
            left: None,
        })
    }

    /// Singular value decomposition with respect to `(·,·)₀`:
    /// `A = Σ σₙ uₙ (vₙ, ·)₀`, both systems orthonormal.
    pub fn svd(&self) -> Result<Spectrum> {
        let (values, u, v) = weighted_svd(&self.matrix, self.grid.weights())?;
        Ok(Spectrum {
            grid: Arc::clone(&self.grid),
            values,
            right: v,
            left: Some(u),
        })
    }

    /// Smallest eigenvalue of a self-adjoint PSD operator (roundoff negatives
    /// clamped to zero). Rejects operators that are not self-adjoint in the
    /// weighted inner product.
    pub fn lambda_min(&self) -> Result<f64> {
        let w = self.grid.weights();
        let n = self.grid.node_count();
        let mut scale = 0.0f64;
        let mut asym = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                let a = w[i] * self.matrix[(i, j)];
                let b = w[j] * self.matrix[(j, i)];
                scale = scale.max(a.abs()).max(b.abs());
                asym = asym.max((a - b).abs());
            }
        }
        if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::invalid(
                "lambda_min requires an operator self-adjoint in the weighted inner product",
            ));
        }
        let (values, _) = weighted_eigendecomposition(&self.matrix, w)?;
        let min = *values.last().expect("nonempty spectrum");
        let max = values[0];
        if min < 0.0 && min >= -1e-10 * max.max(f64::MIN_POSITIVE) {
            Ok(0.0)
        } else {
            Ok(min)
        }
    }
}

/// Spectral data of an operator: eigenvalues of `A*A` with orthonormal
/// eigenfields (from [`DiscreteOperator::normal_spectrum`]), or singular
/// values with left/right systems (from [`DiscreteOperator::svd`]).
#[derive(Debug)]
pub struct Spectrum {
    grid: Arc<Grid>,
    values: Vec<f64>,
    right: DMatrix<f64>,
    left: Option<DMatrix<f64>>,
}

impl Spectrum {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Eigenvalues (or singular values), descending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_left_system(&self) -> bool {
        self.left.is_some()
    }

    /// The `n`-th eigenfield / right singular field.
    pub fn right_field(&self, n: usize) -> Field {
        Field::from_vector(&self.grid, self.right.column(n).into_owned())
    }

    /// The `n`-th left singular field, when this spectrum came from an SVD.
    pub fn left_field(&self, n: usize) -> Option<Field> {
        self.left
            .as_ref()
            .map(|u| Field::from_vector(&self.grid, u.column(n).into_owned()))
    }

    /// Modal coefficients `(φₙ, f)₀` against the right system.
    pub fn coefficients(&self, f: &Field) -> Result<Vec<f64>> {
        self.grid.check_same(f.grid())?;
        Ok(self.project(&self.right, f))
    }

    /// Modal coefficients `(uₙ, f)₀` against the left system.
    pub fn left_coefficients(&self, f: &Field) -> Result<Vec<f64>> {
        self.grid.check_same(f.grid())?;
        let u = self.left.as_ref().ok_or_else(|| {
            Error::invalid("spectrum has no left singular system; use svd()")
        })?;
        Ok(self.project(u, f))
    }

    fn project(&self, basis: &DMatrix<f64>, f: &Field) -> Vec<f64> {
        let w = self.grid.weights();
        let wf = DVector::from_fn(f.len(), |i, _| w[i] * f.values()[i]);
        basis.tr_mul(&wf).as_slice().to_vec()
    }

    /// `Σ cₙ φₙ` over the right system.
    pub fn synthesize(&self, coeffs: &[f64]) -> Field {
        let c = DVector::from_column_slice(coeffs);
        Field::from_vector(&self.grid, &self.right * c)
    }

    /// `Σ cₙ uₙ` over the left system.
    pub(crate) fn synthesize_left(&self, coeffs: &[f64]) -> Option<Field> {
        let u = self.left.as_ref()?;
        let c = DVector::from_column_slice(coeffs);
        Some(Field::from_vector(&self.grid, u * c))
    }

    /// Largest Gram-matrix deviation from identity, `max |(φᵢ, φⱼ)₀ − δᵢⱼ|`.
    pub fn gram_defect(&self) -> f64 {
        let w = self.grid.weights();
        let n = self.values.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let g: f64 = (0..self.right.nrows())
                    .map(|k| w[k] * self.right[(k, i)] * self.right[(k, j)])
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - expect).abs());
            }
        }
        worst
    }
}
