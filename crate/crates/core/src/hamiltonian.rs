//! Edge Hamiltonians `H_i(x, p) = inf_{k in K_i} { b_i(x, k) p + h_i(x, k) }`
//! and their minimizing feedback.

use crate::problem::{EdgeDynamics, EdgeFamily};

/// Value and minimizer of the edge Hamiltonian at one `(x, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianEval {
    pub value: f64,
    pub argmin: f64,
}

/// Closed form for the sin-quadratic family.
///
/// The unclipped minimizer is `-(p sin x + lambda) / (2 theta)` with value
/// `-(p sin x + lambda)^2 / (4 theta) + gamma sin x + rho`; when it leaves `K_i`
/// it is clipped and the objective is evaluated at the clipped control.
pub fn edge_hamiltonian_closed(dynamics: &EdgeDynamics, x: f64, p: f64) -> HamiltonianEval {
    let EdgeFamily::SinQuadratic { theta, gamma, lambda, rho } = dynamics.dynamics else {
        panic!("closed-form Hamiltonian requires the sin-quadratic family");
    };
    let s = x.sin();
    let ps = p * s;
    let k_star = -(ps + lambda) / (2.0 * theta);
    let kappa = dynamics.control_bound;
    if k_star.abs() <= kappa {
        let c = ps + lambda;
        let value = -c * c / (4.0 * theta) + gamma * s + rho;
        HamiltonianEval { value, argmin: k_star }
    } else {
        let k = k_star.clamp(-kappa, kappa);
        let value = k * ps + theta * k * k + gamma * s + lambda * k + rho;
        HamiltonianEval { value, argmin: k }
    }
}

/// Exact Hamiltonian for either family. For the constant family the control
/// has no effect and the center of `K_i` is reported as minimizer.
#[inline]
pub fn edge_hamiltonian(dynamics: &EdgeDynamics, x: f64, p: f64) -> HamiltonianEval {
    match dynamics.dynamics {
        EdgeFamily::SinQuadratic { .. } => edge_hamiltonian_closed(dynamics, x, p),
        EdgeFamily::Constant { drift, cost } => HamiltonianEval { value: drift * p + cost, argmin: 0.0 },
    }
}

/// Brute-force minimum over `steps` equispaced controls in `K_i`; ties go to
/// the smallest control.
pub fn edge_hamiltonian_grid(dynamics: &EdgeDynamics, x: f64, p: f64, steps: usize) -> HamiltonianEval {
    assert!(steps >= 2, "grid search needs at least two points");
    let objective = dynamics.control_objective(x, p);
    let (lo, hi) = dynamics.control_interval();
    let h = (hi - lo) / (steps - 1) as f64;
    let mut best = HamiltonianEval { value: objective(lo), argmin: lo };
    for j in 1..steps {
        let k = if j == steps - 1 { hi } else { lo + h * j as f64 };
        let v = objective(k);
        if v < best.value {
            best = HamiltonianEval { value: v, argmin: k };
        }
    }
    best
}

/// A sampled point where the quadratic growth bound fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthWitness {
    pub x: f64,
    pub p: f64,
    pub value: f64,
    pub bound: f64,
}

/// Samples `|H(x, p)| <= m1 (1 + |p|)^2` on `[0, length] x [-p_max, p_max]`.
pub fn quadratic_growth_check(
    dynamics: &EdgeDynamics,
    m1: f64,
    length: f64,
    p_max: f64,
) -> Result<(), GrowthWitness> {
    const NX: usize = 200;
    const NP: usize = 401;
    // p = 0 is sampled first so that constant offsets are caught there.
    let ps = std::iter::once(0.0).chain((0..NP).map(|j| -p_max + 2.0 * p_max * j as f64 / (NP - 1) as f64));
    for p in ps {
        for i in 0..=NX {
            let x = length * i as f64 / NX as f64;
            let value = edge_hamiltonian(dynamics, x, p).value;
            let bound = m1 * (1.0 + p.abs()).powi(2);
            if value.abs() > bound {
                return Err(GrowthWitness { x, p, value, bound });
            }
        }
    }
    Ok(())
}

/// Growth constant that always works for the sin-quadratic family, using `|sin| <= 1`.
pub fn sin_quadratic_growth_constant(theta: f64, gamma: f64, lambda: f64, rho: f64) -> f64 {
    1.0 / (2.0 * theta) + lambda.abs() / theta + lambda * lambda / (2.0 * theta) + gamma.abs() + rho.abs()
}
