//! Optimal feedback read off the value grid.

use crate::error::Result;
use crate::hamiltonian::edge_hamiltonian;
use crate::junction::SimplexWeights;
use crate::pde::ValueGrid;
use crate::problem::{ControlProblem, EdgeFamily};

/// Tabulated edge controls `k_i(t_m, x_j)` and junction weights `alpha(t_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPolicy {
    edges: usize,
    n_time: usize,
    n_space: usize,
    t0: f64,
    dt: f64,
    dx: f64,
    controls: Vec<f64>,
    weights: Vec<SimplexWeights>,
    /// Nodes where the unconstrained minimizer left `K_i` and was clipped.
    pub clip_count: usize,
}

impl FeedbackPolicy {
    pub fn edges(&self) -> usize {
        self.edges
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn control(&self, edge: usize, level: usize, node: usize) -> f64 {
        self.controls[(edge * (self.n_time + 1) + level) * (self.n_space + 1) + node]
    }

    pub fn weights(&self, level: usize) -> &SimplexWeights {
        &self.weights[level]
    }

    /// Piecewise constant in time: the level at or before `t`.
    pub fn level_at(&self, t: f64) -> usize {
        let s = (t - self.t0) / self.dt;
        // nudge so that t = t0 + m dt computed in floating point lands on m
        let m = (s + 1e-9).floor();
        if m <= 0.0 {
            0
        } else {
            (m as usize).min(self.n_time)
        }
    }

    /// Nearest node, clamped to `[0, L]`.
    pub fn node_at(&self, x: f64) -> usize {
        let j = (x.max(0.0) / self.dx).round();
        (j as usize).min(self.n_space)
    }
}

/// Edge argmins at every node and junction argmins at every level.
pub fn extract_policy(problem: &ControlProblem, vg: &ValueGrid) -> Result<FeedbackPolicy> {
    let (edges, nt, n) = (vg.edges(), vg.n_time(), vg.n_space());
    let h0 = problem.junction_hamiltonian();
    let mut controls = Vec::with_capacity(edges * (nt + 1) * (n + 1));
    let mut clip_count = 0;
    for (i, dynamics) in problem.edges.iter().enumerate() {
        for m in 0..=nt {
            for j in 0..=n {
                let x = vg.node(j);
                let p = vg.gradient(i, m, j);
                let h = edge_hamiltonian(dynamics, x, p);
                if let EdgeFamily::SinQuadratic { theta, lambda, .. } = dynamics.dynamics {
                    let unclipped = -(p * x.sin() + lambda) / (2.0 * theta);
                    if unclipped.abs() > dynamics.control_bound {
                        clip_count += 1;
                    }
                }
                controls.push(h.argmin);
            }
        }
    }
    let weights = (0..=nt)
        .map(|m| h0.solve(vg.junction_gradients(m)).map(|e| e.argmin))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeedbackPolicy {
        edges,
        n_time: nt,
        n_space: n,
        t0: vg.initial_time(),
        dt: vg.dt(),
        dx: vg.dx(),
        controls,
        weights,
        clip_count,
    })
}
