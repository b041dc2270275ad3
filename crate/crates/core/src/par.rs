//! Data-parallel kernels with sequential fallbacks.
//!
//! The `parallel` feature (on by default) routes the hot inner loops —
//! dense-matrix column assembly, matrix products and matrix-vector products —
//! through rayon. Without the feature the [`seq`] implementations are used.
//! Both variants are public so the bench suite can compare them directly.

use nalgebra::{DMatrix, DVector};

/// Sequential implementations. Always compiled; these are the fallback when
/// the `parallel` feature is disabled.
pub mod seq {
    use super::*;

    /// Fills a column-major `rows x cols` matrix column by column.
    pub fn fill_columns<F>(rows: usize, cols: usize, fill: F) -> DMatrix<f64>
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let mut m = DMatrix::zeros(rows, cols);
        for (j, col) in m.as_mut_slice().chunks_mut(rows).enumerate() {
            fill(j, col);
        }
        m
    }

    pub fn gemm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a * b
    }

    pub fn gemv(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
        a * x
    }
}

/// Rayon implementations.
#[cfg(feature = "parallel")]
pub mod par {
    use super::*;
    use rayon::prelude::*;

    /// Column block size for parallel gemm/gemv. Large enough that each task
    /// amortizes the per-block allocation, small enough to load-balance.
    const BLOCK: usize = 128;

    pub fn fill_columns<F>(rows: usize, cols: usize, fill: F) -> DMatrix<f64>
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let mut m = DMatrix::zeros(rows, cols);
        m.as_mut_slice()
            .par_chunks_mut(rows)
            .enumerate()
            .for_each(|(j, col)| fill(j, col));
        m
    }

    pub fn gemm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let (rows, cols) = (a.nrows(), b.ncols());
        let mut c = DMatrix::zeros(rows, cols);
        c.as_mut_slice()
            .par_chunks_mut(rows * BLOCK)
            .enumerate()
            .for_each(|(blk, chunk)| {
                let j0 = blk * BLOCK;
                let width = chunk.len() / rows;
                let mut view =
                    nalgebra::DMatrixViewMut::from_slice(chunk, rows, width);
                view.gemm(1.0, a, &b.columns(j0, width), 0.0);
            });
        c
    }

    pub fn gemv(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
        let rows = a.nrows();
        let cols = a.ncols();
        let blocks: Vec<(usize, usize)> = (0..cols)
            .step_by(BLOCK)
            .map(|j0| (j0, BLOCK.min(cols - j0)))
            .collect();
        blocks
            .into_par_iter()
            .map(|(j0, w)| a.columns(j0, w) * x.rows(j0, w))
            .reduce(|| DVector::zeros(rows), |u, v| u + v)
    }
}

#[cfg(feature = "parallel")]
pub(crate) use par::{fill_columns, gemm, gemv};
#[cfg(not(feature = "parallel"))]
pub(crate) use seq::{fill_columns, gemm, gemv};

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_pair(n: usize, m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let a = DMatrix::from_fn(n, m, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let b = DMatrix::from_fn(m, n, |i, j| ((i * 5 + j * 2) % 13) as f64 / 13.0);
        (a, b)
    }

    #[test]
    fn dispatch_gemm_matches_seq() {
        let (a, b) = sample_pair(83, 141);
        let c0 = seq::gemm(&a, &b);
        let c1 = gemm(&a, &b);
        assert!((&c0 - &c1).amax() <= 1e-12 * c0.amax());
    }

    #[test]
    fn dispatch_gemv_matches_seq() {
        let (a, _) = sample_pair(310, 129);
        let x = DVector::from_fn(129, |i, _| (i as f64).sin());
        let y0 = seq::gemv(&a, &x);
        let y1 = gemv(&a, &x);
        assert!((&y0 - &y1).amax() <= 1e-12 * y0.amax().max(1.0));
    }

    #[test]
    fn dispatch_fill_matches_seq() {
        let f = |j: usize, col: &mut [f64]| {
            for (i, v) in col.iter_mut().enumerate() {
                *v = (i * 31 + j) as f64;
            }
        };
        let m0 = seq::fill_columns(17, 29, f);
        let m1 = fill_columns(17, 29, f);
        assert_eq!(m0, m1);
    }
}
