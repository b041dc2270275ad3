//! Tensor trapezoid grids on the unit square / unit interval and nodal fields.
//!
//! The quadrature weights define the discrete inner product
//! `(a, b)₀ = Σᵢ wᵢ aᵢ bᵢ` in which all operator adjoints in this crate are
//! exact. Node ordering is row-major: node `(i, j)` at `(i·hx, j·hy)` has flat
//! index `j·nx + i`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tensor-product grid with trapezoid quadrature weights.
///
/// A grid with `ny == 1` discretizes the unit interval (used by the 1-D
/// differentiator pipeline); otherwise the unit square. The weights sum to
/// the domain measure, which is 1 in both cases.
#[derive(Debug)]
pub struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    weights: Vec<f64>,
}

fn axis_weights(n: usize) -> (f64, Vec<f64>) {
    let h = 1.0 / (n - 1) as f64;
    let mut w = vec![h; n];
    w[0] = h / 2.0;
    w[n - 1] = h / 2.0;
    (h, w)
}

impl Grid {
    /// Builds the 2-D grid with `nx * ny` nodes on the closed unit square.
    pub fn new(nx: usize, ny: usize) -> Result<Arc<Grid>> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid { nx, ny });
        }
        let (hx, wx) = axis_weights(nx);
        let (hy, wy) = axis_weights(ny);
        let mut weights = Vec::with_capacity(nx * ny);
        for wj in &wy {
            for wi in &wx {
                weights.push(wi * wj);
            }
        }
        Ok(Arc::new(Grid { nx, ny, hx, hy, weights }))
    }

    /// Builds the interval grid with `n` nodes on `[0, 1]` (`ny == 1`).
    pub fn new_1d(n: usize) -> Result<Arc<Grid>> {
        if n < 2 {
            return Err(Error::InvalidGrid { nx: n, ny: 1 });
        }
        let (hx, weights) = axis_weights(n);
        Ok(Arc::new(Grid { nx: n, ny: 1, hx, hy: 0.0, weights }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn is_1d(&self) -> bool {
        self.ny == 1
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat index of node `(i, j)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// Coordinates of the node with flat index `k`.
    #[inline]
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let i = k % self.nx;
        let j = k / self.nx;
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn compatible(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected_nx: self.nx,
                expected_ny: self.ny,
                got_nx: other.nx,
                got_ny: other.ny,
            })
        }
    }

    /// Discrete inner product of two nodal value slices.
    pub(crate) fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a)
            .zip(b)
            .map(|((w, x), y)| w * x * y)
            .sum()
    }
}

/// Nodal values of a scalar function on a [`Grid`].
///
/// Immutable by convention: operations return new fields.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: DVector<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: DVector::zeros(grid.node_count()),
        }
    }

    /// Samples a pointwise function at the grid nodes. For 1-D grids the
    /// second argument of `f` is always 0.
    pub fn sample(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        let n = grid.node_count();
        let mut values = DVector::zeros(n);
        for k in 0..n {
            let (x, y) = grid.coords(k);
            let v = f(x, y);
            if !v.is_finite() {
                return Err(Error::NonFinite { index: k });
            }
            values[k] = v;
        }
        Ok(Field { grid: Arc::clone(grid), values })
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: k });
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values: DVector::from_vec(values),
        })
    }

    pub(crate) fn from_vector(grid: &Arc<Grid>, values: DVector<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.node_count());
        Field { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub(crate) fn vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    /// Discrete inner product `(a, b)₀ = Σ wᵢ aᵢ bᵢ`.
    pub fn inner_product(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.grid.dot(self.values.as_slice(), other.values.as_slice()))
    }

    /// Norm induced by the discrete inner product.
    pub fn norm(&self) -> f64 {
        self.grid.dot(self.values.as_slice(), self.values.as_slice()).sqrt()
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: &self.values * a,
        }
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: &self.values + &other.values * a,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        assert!(self.grid.compatible(&rhs.grid), "field grids differ");
        Field {
            grid: Arc::clone(&self.grid),
            values: &self.values + &rhs.values,
        }
    }
}

impl std::ops::Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        assert!(self.grid.compatible(&rhs.grid), "field grids differ");
        Field {
            grid: Arc::clone(&self.grid),
            values: &self.values - &rhs.values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_3x3() {
        let g = Grid::new(3, 3).unwrap();
        assert_eq!(g.hx(), 0.5);
        let w = g.weights();
        // corners, edges, center
        assert_eq!(w[g.index(0, 0)], 0.0625);
        assert_eq!(w[g.index(2, 2)], 0.0625);
        assert_eq!(w[g.index(1, 0)], 0.125);
        assert_eq!(w[g.index(0, 1)], 0.125);
        assert_eq!(w[g.index(1, 1)], 0.25);
    }

    #[test]
    fn weights_2x2_single_cell() {
        let g = Grid::new(2, 2).unwrap();
        assert!(g.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn weights_sum_to_area() {
        for (nx, ny) in [(2, 2), (3, 3), (61, 61), (7, 13)] {
            let g = Grid::new(nx, ny).unwrap();
            let sum: f64 = g.weights().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "{nx}x{ny}: sum = {sum}");
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
        let g1 = Grid::new_1d(257).unwrap();
        let sum: f64 = g1.weights().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(1, 3).is_err());
        assert!(Grid::new(3, 1).is_err());
        assert!(Grid::new_1d(1).is_err());
    }

    #[test]
    fn inner_product_constant_is_area() {
        let g = Grid::new(25, 25).unwrap();
        let one = Field::sample(&g, |_, _| 1.0).unwrap();
        assert!((one.inner_product(&one).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn inner_product_x_squared_on_3x3() {
        // trapezoid quadrature of x^2 over {0, 0.5, 1}: 0.375
        let g = Grid::new(3, 3).unwrap();
        let x = Field::sample(&g, |x, _| x).unwrap();
        assert!((x.inner_product(&x).unwrap() - 0.375).abs() <= 1e-15);
    }

    #[test]
    fn inner_product_oscillation_against_constant() {
        let g = Grid::new(101, 101).unwrap();
        let s = Field::sample(&g, |x, _| (2.0 * std::f64::consts::PI * x).sin()).unwrap();
        let one = Field::sample(&g, |_, _| 1.0).unwrap();
        assert!(s.inner_product(&one).unwrap().abs() <= 1e-3);
    }

    #[test]
    fn inner_product_grid_mismatch() {
        let a = Field::zeros(&Grid::new(3, 3).unwrap());
        let b = Field::zeros(&Grid::new(4, 3).unwrap());
        assert!(matches!(a.inner_product(&b), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn sample_rejects_non_finite() {
        let g = Grid::new(3, 3).unwrap();
        let r = Field::sample(&g, |x, _| if x > 0.4 { f64::NAN } else { 0.0 });
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn sample_x_on_3x3() {
        let g = Grid::new(3, 3).unwrap();
        let f = Field::sample(&g, |x, _| x).unwrap();
        assert_eq!(f.values(), &[0.0, 0.5, 1.0, 0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn paper_source_term_is_finite_everywhere() {
        let g = Grid::new(61, 61).unwrap();
        let f1 = Field::sample(&g, |x, y| {
            100.0 * (2.0 * std::f64::consts::PI * x).cos() * (3.0 * std::f64::consts::PI * y).cos()
                + 0.1 * (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) / 0.05_f64.powi(2)).exp()
        })
        .unwrap();
        assert!(f1.max_abs() <= 100.1 + 1e-9);
    }

    #[test]
    fn quadrature_order_for_bilinear_products() {
        // f = x(1+y), g = y: ∫∫ x y (1+y) = 1/2 * (1/2 + 1/3) = 5/12.
        let exact = 5.0 / 12.0;
        let mut errs = Vec::new();
        for n in [9, 17, 33] {
            let g = Grid::new(n, n).unwrap();
            let f1 = Field::sample(&g, |x, y| x * (1.0 + y)).unwrap();
            let f2 = Field::sample(&g, |_, y| y).unwrap();
            errs.push((f1.inner_product(&f2).unwrap() - exact).abs());
        }
        let order01 = (errs[0] / errs[1]).log2();
        let order12 = (errs[1] / errs[2]).log2();
        assert!(order01 >= 1.9 && order12 >= 1.9, "orders {order01} {order12}");
    }

    #[test]
    fn norm_positive_definite() {
        let g = Grid::new(5, 5).unwrap();
        let f = Field::sample(&g, |x, y| x - y).unwrap();
        assert!(f.norm() > 0.0);
        assert_eq!(Field::zeros(&g).norm(), 0.0);
    }
}
