//! Thomas algorithm with a reusable factorization.
//!
//! The implicit diffusion matrix does not change between time steps, so the
//! forward-elimination coefficients are computed once and every solve is a
//! single forward/backward sweep.

/// Factorization of the tridiagonal matrix with rows `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    lower: Vec<f64>,
    /// Modified super-diagonal `c'_i`.
    upper_mod: Vec<f64>,
    /// Pivots `d_i - a_i c'_{i-1}`.
    pivot: Vec<f64>,
}

impl TridiagonalFactor {
    /// `lower[0]` and `upper[n-1]` are ignored. Requires a nonsingular
    /// matrix with nonzero pivots (true for diagonally dominant rows).
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert!(n >= 1 && lower.len() == n && upper.len() == n);
        let mut upper_mod = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        pivot[0] = diag[0];
        for i in 0..n {
            if i > 0 {
                pivot[i] = diag[i] - lower[i] * upper_mod[i - 1];
            }
            debug_assert!(pivot[i] != 0.0, "zero pivot in tridiagonal factorization");
            upper_mod[i] = if i + 1 < n { upper[i] / pivot[i] } else { 0.0 };
        }
        Self { lower: lower.to_vec(), upper_mod, pivot }
    }

    pub fn len(&self) -> usize {
        self.pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot.is_empty()
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        rhs[0] /= self.pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_mod[i] * rhs[i + 1];
        }
    }
}
