//! Vertex value from the nonlinear Neumann condition `H0(du/dx(t, 0+)) = 0`.
//!
//! On each edge the one-sided gradient
//! `p_i(u0) = (-3 u0 + 4 u_{i,1} - u_{i,2}) / (2 dx)` is affine and decreasing in
//! the shared vertex value `u0`. The interior values may themselves depend
//! affinely on `u0` (`u_{i,k} = v_{i,k} + u0 w_{i,k}`) when the diffusion step is
//! solved implicitly with `u0` as Dirichlet data; the response `w` lies in
//! `[0, 1)` and keeps the slope negative. Since `H0` is increasing in every
//! argument, `u0 -> H0(p(u0))` is strictly decreasing with a unique root.

use crate::junction::{JunctionHamiltonian, SimplexWeights};

pub const JUNCTION_TOL: f64 = 1e-10;
pub const BRACKET_LIMIT: f64 = 1e6;

/// Second-order one-sided derivative at the vertex.
#[inline]
pub fn one_sided_gradient(u0: f64, u1: f64, u2: f64, dx: f64) -> f64 {
    (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * dx)
}

/// Two nearest interior nodes per edge, optionally with their response to `u0`.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionStencil {
    pub near: Vec<[f64; 2]>,
    pub response: Vec<[f64; 2]>,
}

impl JunctionStencil {
    /// Interior values held fixed while `u0` varies.
    pub fn fixed(near: Vec<[f64; 2]>) -> Self {
        let response = vec![[0.0; 2]; near.len()];
        Self { near, response }
    }

    pub fn with_response(near: Vec<[f64; 2]>, response: Vec<[f64; 2]>) -> Self {
        assert_eq!(near.len(), response.len());
        Self { near, response }
    }

    pub fn edges(&self) -> usize {
        self.near.len()
    }

    /// Interior values `[u_{i,1}, u_{i,2}]` for a given vertex value.
    #[inline]
    pub fn interior(&self, edge: usize, u0: f64) -> [f64; 2] {
        let [v1, v2] = self.near[edge];
        let [w1, w2] = self.response[edge];
        [v1 + u0 * w1, v2 + u0 * w2]
    }

    pub fn gradients_into(&self, u0: f64, dx: f64, out: &mut [f64]) {
        for (i, p) in out.iter_mut().enumerate() {
            let [u1, u2] = self.interior(i, u0);
            *p = one_sided_gradient(u0, u1, u2, dx);
        }
    }

    pub fn gradients(&self, u0: f64, dx: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.edges()];
        self.gradients_into(u0, dx, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionRoot {
    pub value: f64,
    pub gradients: Vec<f64>,
    pub weights: SimplexWeights,
    /// `H0(p(u0))` at the returned root.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootFailure {
    Bracket,
    Residual(f64),
    NonFinite,
}

/// Bisection for the vertex value, bracket grown geometrically from `guess`.
pub fn junction_condition_root(
    stencil: &JunctionStencil,
    dx: f64,
    hamiltonian: &JunctionHamiltonian,
    guess: f64,
) -> Result<JunctionRoot, RootFailure> {
    let mut p = vec![0.0; stencil.edges()];
    let mut phi = |u0: f64| -> Result<f64, RootFailure> {
        stencil.gradients_into(u0, dx, &mut p);
        let v = hamiltonian.solve(&p).map_err(|_| RootFailure::NonFinite)?.value;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(RootFailure::NonFinite)
        }
    };

    let guess = if guess.is_finite() { guess } else { 0.0 };
    let f_guess = phi(guess)?;
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    if f_guess.abs() <= JUNCTION_TOL {
        return finish(stencil, dx, hamiltonian, guess);
    }
    let mut step = 1e-3 * guess.abs().max(1.0);
    if f_guess > 0.0 {
        // root lies above the guess
        lo = guess;
        f_lo = f_guess;
        loop {
            hi = guess + step;
            if hi.abs() > BRACKET_LIMIT {
                return Err(RootFailure::Bracket);
            }
            f_hi = phi(hi)?;
            if f_hi <= 0.0 {
                break;
            }
            lo = hi;
            f_lo = f_hi;
            step *= 2.0;
        }
    } else {
        hi = guess;
        f_hi = f_guess;
        loop {
            lo = guess - step;
            if lo.abs() > BRACKET_LIMIT {
                return Err(RootFailure::Bracket);
            }
            f_lo = phi(lo)?;
            if f_lo >= 0.0 {
                break;
            }
            hi = lo;
            f_hi = f_lo;
            step *= 2.0;
        }
    }

    for _ in 0..300 {
        if f_lo.abs() <= JUNCTION_TOL {
            return finish(stencil, dx, hamiltonian, lo);
        }
        if f_hi.abs() <= JUNCTION_TOL {
            return finish(stencil, dx, hamiltonian, hi);
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = phi(mid)?;
        if f_mid.abs() <= JUNCTION_TOL {
            return finish(stencil, dx, hamiltonian, mid);
        }
        if f_mid > 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    // Bracket collapsed to adjacent floats: take the secant point inside it.
    let u = if f_lo != f_hi { lo + f_lo * (hi - lo) / (f_lo - f_hi) } else { lo };
    let root = finish(stencil, dx, hamiltonian, u)?;
    if root.residual.abs() <= JUNCTION_TOL {
        Ok(root)
    } else {
        Err(RootFailure::Residual(root.residual))
    }
}

fn finish(
    stencil: &JunctionStencil,
    dx: f64,
    hamiltonian: &JunctionHamiltonian,
    u0: f64,
) -> Result<JunctionRoot, RootFailure> {
    let gradients = stencil.gradients(u0, dx);
    let eval = hamiltonian.solve(&gradients).map_err(|_| RootFailure::NonFinite)?;
    Ok(JunctionRoot { value: u0, gradients, weights: eval.argmin, residual: eval.value })
}
