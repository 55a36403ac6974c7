//! Least-squares machinery shared by the estimators and diagnostics.
//!
//! Solves are done through an orthogonal decomposition (SVD), never the
//! normal equations: the no-shifter designs this crate studies are
//! near-singular by construction and normal equations would return
//! garbage without warning. A factored design can be reused across
//! right-hand sides, which is what the two-first-stage regressions do.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff: a design whose smallest/largest
/// singular value ratio falls below this is reported as rank-deficient.
pub const SINGULAR_RATIO_CUTOFF: f64 = 1e-10;

/// SVD factorization of a design matrix, retained for repeated solves.
pub struct FactoredDesign {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    singular_values: DVector<f64>,
    cols: usize,
}

impl FactoredDesign {
    /// Factor a T×k design. Errors with `RankDeficient` when the singular
    /// value ratio is below [`SINGULAR_RATIO_CUTOFF`]; `stage` names the
    /// offending regression in the error.
    pub fn new(design: &DMatrix<f64>, stage: &'static str) -> Result<Self> {
        let cols = design.ncols();
        let svd = design
            .clone()
            .try_svd(true, true, f64::EPSILON, 0)
            .ok_or(Error::RankDeficient { stage, ratio: 0.0 })?;
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let singular_values = svd.singular_values;
        let largest = singular_values.max();
        let smallest = singular_values.min();
        let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
        if ratio < SINGULAR_RATIO_CUTOFF {
            return Err(Error::RankDeficient { stage, ratio });
        }
        Ok(Self { u, v_t, singular_values, cols })
    }

    /// Minimizer of ‖design·β − rhs‖₂. All singular values are used; the
    /// rank check in [`FactoredDesign::new`] already rejected degenerate
    /// designs, so near-singular-but-accepted systems return extreme
    /// rather than truncated coefficients.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut projected = self.u.transpose() * rhs;
        for i in 0..self.cols {
            projected[i] /= self.singular_values[i];
        }
        self.v_t.transpose() * projected
    }

    /// Largest/smallest singular value of the factored design.
    pub fn condition_number(&self) -> f64 {
        self.singular_values.max() / self.singular_values.min()
    }
}

/// Singular-value summary of an arbitrary matrix (no rank requirement).
pub struct SpectrumSummary {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Unit-norm basis of the (numerical) null space, one Vec per vector.
    pub null_space: Vec<Vec<f64>>,
}

/// Numerical rank and null space of a matrix, using the relative cutoff
/// `cutoff * s_max` on the singular values.
pub fn spectrum(matrix: &DMatrix<f64>, cutoff: f64) -> SpectrumSummary {
    let cols = matrix.ncols();
    let svd = matrix
        .clone()
        .try_svd(false, true, f64::EPSILON, 0)
        .expect("svd of finite matrix converges");
    let v_t = svd.v_t.expect("v_t requested");
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    // nalgebra does not guarantee ordering; sort descending for reporting.
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let s_max = singular_values.first().copied().unwrap_or(0.0);
    let threshold = cutoff * s_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > threshold).count();
    let mut null_space = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= threshold {
            let row = v_t.row(i);
            let norm = row.norm();
            let mut basis: Vec<f64> = row.iter().map(|&v| v / norm).collect();
            // Deterministic sign: first non-negligible entry positive.
            if let Some(lead) = basis.iter().find(|v| v.abs() > 1e-12) {
                if *lead < 0.0 {
                    basis.iter_mut().for_each(|v| *v = -*v);
                }
            }
            null_space.push(basis);
        }
    }
    debug_assert!(matrix.nrows() < cols || rank + null_space.len() == cols);
    SpectrumSummary { singular_values, rank, null_space }
}

/// Rescale every column of `matrix` to unit Euclidean norm (columns of
/// zero norm are left untouched). Returns the scaled copy.
pub fn unit_column_scaled(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = matrix.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    scaled
}
