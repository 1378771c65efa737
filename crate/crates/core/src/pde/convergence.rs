//! Self-convergence under uniform refinement of both `dt` and `dx`.

use crate::error::{Error, Result};
use crate::pde::{solve_backward, SpaceTimeGrid, ValueGrid};
use crate::problem::ControlProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub factor: usize,
    pub grids: [SpaceTimeGrid; 3],
    /// `u(t0, 0)` on each grid.
    pub vertex_values: [f64; 3],
    /// Max-norm differences (coarse vs middle, middle vs fine) on the coarse nodes.
    pub differences: [f64; 2],
    /// `differences[0] / differences[1]`; `NaN` when both vanish.
    pub ratio: f64,
    /// `log_factor(ratio)`.
    pub order: f64,
}

/// Max-norm difference between two grids, sampled at the nodes of `coarse`.
/// `fine` must refine `coarse` by the integer `factor` in both directions.
pub fn grid_difference(coarse: &ValueGrid, fine: &ValueGrid, factor: usize) -> f64 {
    let mut diff: f64 = 0.0;
    for i in 0..coarse.edges() {
        for m in 0..=coarse.n_time() {
            let a = coarse.edge_values(i, m);
            let b = fine.edge_values(i, m * factor);
            for (j, &u) in a.iter().enumerate() {
                diff = diff.max((u - b[j * factor]).abs());
            }
        }
    }
    diff
}

pub fn refine_and_compare(problem: &ControlProblem, grid: SpaceTimeGrid, factor: usize) -> Result<ConvergenceReport> {
    if factor < 2 {
        return Err(Error::InvalidGrid(format!("refinement factor must be at least 2, got {factor}")));
    }
    let grids = [grid, grid.refined(factor), grid.refined(factor * factor)];
    let solved = [
        solve_backward(problem, grids[0])?,
        solve_backward(problem, grids[1])?,
        solve_backward(problem, grids[2])?,
    ];
    let d1 = grid_difference(&solved[0], &solved[1], factor);
    // middle vs fine, still sampled on the coarse nodes
    let d2 = {
        let mut diff: f64 = 0.0;
        for i in 0..solved[0].edges() {
            for m in 0..=grid.n_time {
                let b = solved[1].edge_values(i, m * factor);
                let c = solved[2].edge_values(i, m * factor * factor);
                for j in 0..=grid.n_space {
                    diff = diff.max((b[j * factor] - c[j * factor * factor]).abs());
                }
            }
        }
        diff
    };
    let ratio = if d1 == 0.0 && d2 == 0.0 { f64::NAN } else { d1 / d2 };
    Ok(ConvergenceReport {
        factor,
        grids,
        vertex_values: [solved[0].junction_value(0), solved[1].junction_value(0), solved[2].junction_value(0)],
        differences: [d1, d2],
        ratio,
        order: ratio.ln() / (factor as f64).ln(),
    })
}
