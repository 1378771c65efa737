//! Backward HJB system on the truncated junction:
//! `du_i/dt + 1/2 sigma_i^2 u_i'' + H_i(x, u_i') = 0`, `H0(u'(t, 0+)) = 0`, `u(T) = g`.
//!
//! Each step is IMEX: the Hamiltonian is explicit (centered gradients of the
//! later time level), the diffusion implicit. The vertex value enters the
//! implicit solve as Dirichlet data, and the interior response to it is
//! precomputed once per edge, so the junction condition is solved exactly
//! against the new time level with a scalar bisection.

mod convergence;
mod export;
mod junction_root;
mod policy;
mod tridiag;

pub use convergence::{refine_and_compare, ConvergenceReport};
pub use export::{write_junction_csv, write_value_csv};
pub use junction_root::{
    junction_condition_root, one_sided_gradient, JunctionRoot, JunctionStencil, RootFailure, BRACKET_LIMIT,
    JUNCTION_TOL,
};
pub use policy::{extract_policy, FeedbackPolicy};
pub use tridiag::TridiagonalFactor;

use crate::error::{Error, Result};
use crate::hamiltonian::edge_hamiltonian;
use crate::problem::{ControlProblem, EdgeDynamics};

/// `n_time` steps on `[t0, T]`, `n_space` intervals (so `n_space + 1` nodes) on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceTimeGrid {
    pub n_time: usize,
    pub n_space: usize,
}

impl SpaceTimeGrid {
    pub fn new(n_time: usize, n_space: usize) -> Result<Self> {
        if n_time < 1 {
            return Err(Error::InvalidGrid("n_time must be at least 1".into()));
        }
        if n_space < 3 {
            return Err(Error::InvalidGrid(format!(
                "n_space must be at least 3 (two interior neighbours of the vertex), got {n_space}"
            )));
        }
        Ok(Self { n_time, n_space })
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self { n_time: self.n_time * factor, n_space: self.n_space * factor }
    }
}

/// Discrete value function `u_i(t_m, x_j)`, level 0 at `t0` and level `n_time` at `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    edges: usize,
    n_time: usize,
    n_space: usize,
    t0: f64,
    t_end: f64,
    length: f64,
    values: Vec<f64>,
    junction_gradients: Vec<f64>,
    junction_residuals: Vec<f64>,
}

impl ValueGrid {
    pub fn edges(&self) -> usize {
        self.edges
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn initial_time(&self) -> f64 {
        self.t0
    }

    pub fn terminal_time(&self) -> f64 {
        self.t_end
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_space as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.n_time as f64
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.n_time {
            self.t_end
        } else {
            self.t0 + level as f64 * self.dt()
        }
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_space {
            self.length
        } else {
            j as f64 * self.dx()
        }
    }

    fn offset(&self, edge: usize, level: usize) -> usize {
        (edge * (self.n_time + 1) + level) * (self.n_space + 1)
    }

    /// Nodal values of one edge at one level, vertex first.
    pub fn edge_values(&self, edge: usize, level: usize) -> &[f64] {
        let o = self.offset(edge, level);
        &self.values[o..o + self.n_space + 1]
    }

    pub fn value(&self, edge: usize, level: usize, node: usize) -> f64 {
        self.values[self.offset(edge, level) + node]
    }

    /// Shared vertex value `u(t_m, 0)`.
    pub fn junction_value(&self, level: usize) -> f64 {
        self.value(0, level, 0)
    }

    /// One-sided gradients `du_i/dx(t_m, 0+)`.
    pub fn junction_gradients(&self, level: usize) -> &[f64] {
        &self.junction_gradients[level * self.edges..(level + 1) * self.edges]
    }

    /// `H0(du/dx(t_m, 0+))`; at the terminal level this is the compatibility defect of `g`.
    pub fn junction_residual(&self, level: usize) -> f64 {
        self.junction_residuals[level]
    }

    /// Largest junction residual over the solved levels (the terminal level is assigned).
    pub fn max_junction_residual(&self) -> f64 {
        self.junction_residuals[..self.n_time].iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// `du/dx` at a node: one-sided at the vertex, centered inside, backward at `L`.
    pub fn gradient(&self, edge: usize, level: usize, node: usize) -> f64 {
        let u = self.edge_values(edge, level);
        let n = self.n_space;
        let dx = self.dx();
        if node == 0 {
            self.junction_gradients(level)[edge]
        } else if node == n {
            (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * dx)
        } else {
            (u[node + 1] - u[node - 1]) / (2.0 * dx)
        }
    }

    /// The level whose time equals `t` up to round-off.
    pub fn level_of(&self, t: f64) -> Option<usize> {
        let s = (t - self.t0) / self.dt();
        let m = s.round();
        if m < 0.0 || m > self.n_time as f64 || (s - m).abs() > 1e-9 {
            None
        } else {
            Some(m as usize)
        }
    }

    /// Linear interpolation in `x` at a grid level; `x` beyond `L` is clamped.
    pub fn value_at(&self, level: usize, edge: usize, x: f64) -> f64 {
        let u = self.edge_values(edge, level);
        let s = (x.max(0.0) / self.dx()).min(self.n_space as f64);
        let j = (s.floor() as usize).min(self.n_space - 1);
        let f = s - j as f64;
        u[j] + f * (u[j + 1] - u[j])
    }

    /// Bilinear interpolation in `(t, x)`.
    pub fn interpolate(&self, t: f64, edge: usize, x: f64) -> f64 {
        let s = ((t - self.t0) / self.dt()).clamp(0.0, self.n_time as f64);
        let m = (s.floor() as usize).min(self.n_time - 1);
        let f = s - m as f64;
        let a = self.value_at(m, edge, x);
        if f == 0.0 {
            return a;
        }
        a + f * (self.value_at(m + 1, edge, x) - a)
    }
}

/// Implicit diffusion operator of one edge on the unknowns `1..n-1`.
struct EdgeOperator {
    factor: TridiagonalFactor,
    /// Response of nodes `1..n-1` to a unit vertex value.
    response: Vec<f64>,
}

impl EdgeOperator {
    fn new(dynamics: &EdgeDynamics, n: usize, dx: f64, dt: f64) -> Self {
        let m = n - 1;
        let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![1.0; m], vec![0.0; m]);
        let mut coupling = 0.0;
        // Row n-1 stays the identity: with u_n = 2 u_{n-1} - u_{n-2} the
        // second difference at n-1 vanishes.
        for row in 0..m - 1 {
            let j = row + 1;
            let sigma = dynamics.sigma(j as f64 * dx);
            let r = dt * sigma * sigma / (2.0 * dx * dx);
            diag[row] = 1.0 + 2.0 * r;
            upper[row] = -r;
            if row == 0 {
                coupling = r;
            } else {
                lower[row] = -r;
            }
        }
        let factor = TridiagonalFactor::new(&lower, &diag, &upper);
        let mut response = vec![0.0; m];
        response[0] = coupling;
        factor.solve(&mut response);
        Self { factor, response }
    }
}

fn check_finite(values: &[f64], level: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context: format!("value grid at time level {level}") })
    }
}

/// Marches the HJB system from `T` back to `t0`.
pub fn solve_backward(problem: &ControlProblem, grid: SpaceTimeGrid) -> Result<ValueGrid> {
    let grid = SpaceTimeGrid::new(grid.n_time, grid.n_space)?;
    let edges = problem.edge_count();
    let (nt, n) = (grid.n_time, grid.n_space);
    let length = problem.geometry.length;
    let dx = length / n as f64;
    let dt = problem.horizon.span() / nt as f64;
    let h0 = problem.junction_hamiltonian();
    let xs: Vec<f64> = (0..=n).map(|j| if j == n { length } else { j as f64 * dx }).collect();

    let mut vg = ValueGrid {
        edges,
        n_time: nt,
        n_space: n,
        t0: problem.horizon.initial_time,
        t_end: problem.horizon.terminal_time,
        length,
        values: vec![0.0; edges * (nt + 1) * (n + 1)],
        junction_gradients: vec![0.0; (nt + 1) * edges],
        junction_residuals: vec![0.0; nt + 1],
    };

    // Terminal level: assignment, not a solve.
    for i in 0..edges {
        let o = vg.offset(i, nt);
        for (j, &x) in xs.iter().enumerate() {
            vg.values[o + j] = problem.terminal.value(i, x);
        }
        let u = &vg.values[o..o + 3];
        vg.junction_gradients[nt * edges + i] = one_sided_gradient(u[0], u[1], u[2], dx);
    }
    check_finite(&vg.values[..], nt)?;
    vg.junction_residuals[nt] = h0.solve(vg.junction_gradients(nt))?.value;

    if dt == 0.0 {
        // Degenerate horizon: every level is the terminal level.
        for m in 0..nt {
            for i in 0..edges {
                let (src, dst) = (vg.offset(i, nt), vg.offset(i, m));
                vg.values.copy_within(src..src + n + 1, dst);
            }
        }
        return Ok(vg);
    }

    let operators: Vec<EdgeOperator> = problem.edges.iter().map(|d| EdgeOperator::new(d, n, dx, dt)).collect();
    let mut interior: Vec<Vec<f64>> = vec![vec![0.0; n - 1]; edges];
    let mut stencil = JunctionStencil::with_response(
        vec![[0.0; 2]; edges],
        operators.iter().map(|op| [op.response[0], op.response[1]]).collect(),
    );

    for m in (0..nt).rev() {
        let mut drift_max: f64 = 0.0;
        for i in 0..edges {
            let dynamics = &problem.edges[i];
            let later = vg.edge_values(i, m + 1);
            let rhs = &mut interior[i];
            for j in 1..n {
                let p = (later[j + 1] - later[j - 1]) / (2.0 * dx);
                let h = edge_hamiltonian(dynamics, xs[j], p);
                // dH/dp = b(x, k*) by the envelope theorem
                drift_max = drift_max.max(dynamics.drift(xs[j], h.argmin).abs());
                rhs[j - 1] = later[j] + dt * h.value;
            }
            operators[i].factor.solve(rhs);
            stencil.near[i] = [rhs[0], rhs[1]];
        }
        if drift_max > 0.0 {
            let limit = dx / (2.0 * drift_max);
            if dt > limit {
                return Err(Error::StepTooLarge { level: m, dt, limit });
            }
        }

        let guess = vg.junction_value(m + 1);
        let root = junction_condition_root(&stencil, dx, &h0, guess).map_err(|f| match f {
            RootFailure::Bracket => Error::JunctionBracket { level: m, limit: BRACKET_LIMIT },
            RootFailure::Residual(residual) => Error::JunctionResidual { level: m, residual },
            RootFailure::NonFinite => Error::NonFinite { context: format!("junction gradients at time level {m}") },
        })?;
        let u0 = root.value;

        for i in 0..edges {
            let o = vg.offset(i, m);
            let u = &mut vg.values[o..o + n + 1];
            u[0] = u0;
            for j in 1..n {
                u[j] = interior[i][j - 1] + u0 * operators[i].response[j - 1];
            }
            u[n] = 2.0 * u[n - 1] - u[n - 2];
            check_finite(u, m)?;
        }
        vg.junction_gradients[m * edges..(m + 1) * edges].copy_from_slice(&root.gradients);
        vg.junction_residuals[m] = root.residual;
    }
    Ok(vg)
}
