//! Junction geometry, edge coefficient families, junction cost and terminal data.
//!
//! A junction is `I` half-lines glued at a single vertex. Edge indices are
//! zero-based in the API and one-based in every file and CLI surface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::quadratic_growth_check;
use crate::junction::JunctionHamiltonian;

/// Number of edges and the truncation length used for every edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionGeometry {
    pub edges: usize,
    pub length: f64,
}

impl JunctionGeometry {
    pub fn new(edges: usize, length: f64) -> Result<Self> {
        if edges == 0 {
            return Err(Error::InvalidProblem("a junction needs at least one edge".into()));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidProblem(format!("truncation length must be positive, got {length}")));
        }
        Ok(Self { edges, length })
    }
}

/// A point `(x, i)` of the junction. All points with `x == 0` are the vertex.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EdgePoint {
    pub edge: usize,
    pub x: f64,
}

impl EdgePoint {
    pub fn new(edge: usize, x: f64) -> Self {
        debug_assert!(x >= 0.0, "edge coordinate must be nonnegative");
        Self { edge, x }
    }

    pub fn vertex() -> Self {
        Self { edge: 0, x: 0.0 }
    }

    pub fn is_vertex(&self) -> bool {
        self.x == 0.0
    }
}

impl PartialEq for EdgePoint {
    fn eq(&self, other: &Self) -> bool {
        if self.is_vertex() && other.is_vertex() {
            return true;
        }
        self.edge == other.edge && self.x == other.x
    }
}

/// Geodesic distance on the junction: along the edge when both points share
/// it, through the vertex otherwise.
pub fn junction_distance(p: &EdgePoint, q: &EdgePoint) -> f64 {
    if p.edge == q.edge {
        (p.x - q.x).abs()
    } else {
        p.x + q.x
    }
}

/// Control-independent diffusion coefficient of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Diffusion {
    /// `sigma(x) = value`
    Constant { value: f64 },
    /// `sigma(x) = base + amplitude * sin(x)`
    SinModulated { base: f64, amplitude: f64 },
}

impl Diffusion {
    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        match *self {
            Diffusion::Constant { value } => value,
            Diffusion::SinModulated { base, amplitude } => base + amplitude * x.sin(),
        }
    }

    /// Uniform bound on `|sigma|` over the half-line.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            Diffusion::Constant { value } => value.abs(),
            Diffusion::SinModulated { base, amplitude } => base.abs() + amplitude.abs(),
        }
    }
}

/// Drift and running cost families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum EdgeFamily {
    /// `b(x, k) = drift`, `h(x, k) = cost`; the control has no effect.
    Constant { drift: f64, cost: f64 },
    /// `b(x, k) = k sin x`, `h(x, k) = theta k^2 + gamma sin x + lambda k + rho`.
    SinQuadratic { theta: f64, gamma: f64, lambda: f64, rho: f64 },
}

/// Coefficient values at one `(x, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub sigma: f64,
    pub drift: f64,
    pub cost: f64,
}

/// Everything attached to a single edge: diffusion, drift/cost family and the
/// control interval `[-control_bound, control_bound]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDynamics {
    pub diffusion: Diffusion,
    pub dynamics: EdgeFamily,
    pub control_bound: f64,
}

impl EdgeDynamics {
    pub fn control_interval(&self) -> (f64, f64) {
        (-self.control_bound, self.control_bound)
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.diffusion.sigma(x)
    }

    #[inline]
    pub fn drift(&self, x: f64, k: f64) -> f64 {
        match self.dynamics {
            EdgeFamily::Constant { drift, .. } => drift,
            EdgeFamily::SinQuadratic { .. } => k * x.sin(),
        }
    }

    #[inline]
    pub fn running_cost(&self, x: f64, k: f64) -> f64 {
        match self.dynamics {
            EdgeFamily::Constant { cost, .. } => cost,
            EdgeFamily::SinQuadratic { theta, gamma, lambda, rho } => {
                theta * k * k + gamma * x.sin() + lambda * k + rho
            }
        }
    }

    /// `(sigma, b, h)` at `(x, k)`. Controls outside `K_i` are a contract violation.
    pub fn eval_coefficients(&self, x: f64, k: f64) -> Coefficients {
        debug_assert!(
            k.abs() <= self.control_bound * (1.0 + 1e-12),
            "control {k} outside [-{0}, {0}]",
            self.control_bound
        );
        Coefficients {
            sigma: self.sigma(x),
            drift: self.drift(x, k),
            cost: self.running_cost(x, k),
        }
    }

    /// The map `k -> b(x, k) p + h(x, k)` with the `x`-dependent parts evaluated once.
    #[inline]
    pub fn control_objective(&self, x: f64, p: f64) -> impl Fn(f64) -> f64 {
        let (slope, quad, lin, constant) = match self.dynamics {
            EdgeFamily::Constant { drift, cost } => (0.0, 0.0, 0.0, drift * p + cost),
            EdgeFamily::SinQuadratic { theta, gamma, lambda, rho } => {
                let s = x.sin();
                (p * s, theta, lambda, gamma * s + rho)
            }
        };
        move |k| slope * k + quad * k * k + lin * k + constant
    }

    /// Uniform bound on `|b(x, k)|` over the half-line and `K_i`.
    pub fn drift_sup(&self) -> f64 {
        match self.dynamics {
            EdgeFamily::Constant { drift, .. } => drift.abs(),
            EdgeFamily::SinQuadratic { .. } => self.control_bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionCostMode {
    /// `h0 = 0`
    Linear,
    /// `h0(alpha) = 1/2 sum alpha_i^2 sigma_i(0)^2`
    Quadratic,
}

/// Junction cost and the floor `a` of the weight set
/// `A0 = { alpha in [a, 1]^I : sum alpha = 1 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionCost {
    pub floor: f64,
    pub cost: JunctionCostMode,
}

/// Per-edge terminal shape; `g_i(x) = vertex_value + shape_i(x)` with `shape_i(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalShape {
    /// `slope * x` (unbounded unless `slope == 0`)
    Linear { slope: f64 },
    /// `amplitude * (1 - exp(-rate x))`
    Saturating { amplitude: f64, rate: f64 },
    /// `amplitude * (1 - exp(-(x / width)^2))`, flat at the vertex
    Gaussian { amplitude: f64, width: f64 },
}

impl TerminalShape {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            TerminalShape::Linear { slope } => slope * x,
            TerminalShape::Saturating { amplitude, rate } => -amplitude * (-rate * x).exp_m1(),
            TerminalShape::Gaussian { amplitude, width } => {
                let z = x / width;
                -amplitude * (-z * z).exp_m1()
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            TerminalShape::Linear { slope } => slope,
            TerminalShape::Saturating { amplitude, rate } => amplitude * rate * (-rate * x).exp(),
            TerminalShape::Gaussian { amplitude, width } => {
                let z = x / width;
                2.0 * amplitude * z / width * (-z * z).exp()
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        match *self {
            TerminalShape::Linear { slope } => slope == 0.0,
            _ => true,
        }
    }
}

/// Terminal condition `g` with a single shared vertex value.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalCondition {
    pub vertex_value: f64,
    pub shapes: Vec<TerminalShape>,
}

impl TerminalCondition {
    #[inline]
    pub fn value(&self, edge: usize, x: f64) -> f64 {
        self.vertex_value + self.shapes[edge].value(x)
    }

    /// One-sided derivatives `g_i'(0+)`.
    pub fn vertex_gradients(&self) -> Vec<f64> {
        self.shapes.iter().map(|s| s.derivative(0.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub initial_time: f64,
    pub terminal_time: f64,
}

impl Horizon {
    pub fn new(initial_time: f64, terminal_time: f64) -> Result<Self> {
        if !(terminal_time > 0.0 && terminal_time.is_finite()) {
            return Err(Error::InvalidProblem(format!("terminal time must be positive, got {terminal_time}")));
        }
        if !(0.0 <= initial_time && initial_time <= terminal_time) {
            return Err(Error::InvalidProblem(format!(
                "initial time {initial_time} outside [0, {terminal_time}]"
            )));
        }
        Ok(Self { initial_time, terminal_time })
    }

    pub fn span(&self) -> f64 {
        self.terminal_time - self.initial_time
    }
}

/// Declared constants of the standing assumptions. Missing bounds are not checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionBounds {
    /// `c` in `sigma_i >= c > 0`.
    pub ellipticity: f64,
    #[serde(default)]
    pub drift_bound: Option<f64>,
    #[serde(default)]
    pub diffusion_bound: Option<f64>,
    /// `M1` in `|H_i(x, p)| <= M1 (1 + |p|)^2`.
    #[serde(default)]
    pub growth_bound: Option<f64>,
}

/// A full control problem on the junction.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub geometry: JunctionGeometry,
    pub edges: Vec<EdgeDynamics>,
    pub junction: JunctionCost,
    pub terminal: TerminalCondition,
    pub horizon: Horizon,
    pub bounds: AssumptionBounds,
}

impl ControlProblem {
    /// Structural checks only; the standing assumptions are checked by [`validate_problem`].
    pub fn new(
        geometry: JunctionGeometry,
        edges: Vec<EdgeDynamics>,
        junction: JunctionCost,
        terminal: TerminalCondition,
        horizon: Horizon,
        bounds: AssumptionBounds,
    ) -> Result<Self> {
        let geometry = JunctionGeometry::new(geometry.edges, geometry.length)?;
        let horizon = Horizon::new(horizon.initial_time, horizon.terminal_time)?;
        if edges.len() != geometry.edges {
            return Err(Error::InvalidProblem(format!(
                "{} edges declared but {} edge definitions given",
                geometry.edges,
                edges.len()
            )));
        }
        if terminal.shapes.len() != geometry.edges {
            return Err(Error::InvalidProblem(format!(
                "{} edges declared but {} terminal shapes given",
                geometry.edges,
                terminal.shapes.len()
            )));
        }
        if !(junction.floor > 0.0 && junction.floor < 1.0) {
            return Err(Error::InvalidProblem(format!(
                "junction floor must lie in (0, 1), got {}",
                junction.floor
            )));
        }
        for (i, e) in edges.iter().enumerate() {
            if !(e.control_bound > 0.0 && e.control_bound.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "edge {}: control bound must be positive, got {}",
                    i + 1,
                    e.control_bound
                )));
            }
            if let EdgeFamily::SinQuadratic { theta, .. } = e.dynamics {
                if !(theta > 0.0) {
                    return Err(Error::InvalidProblem(format!(
                        "edge {}: theta must be positive, got {theta}",
                        i + 1
                    )));
                }
            }
            if let TerminalShape::Gaussian { width, .. } = terminal.shapes[i] {
                if !(width > 0.0) {
                    return Err(Error::InvalidProblem(format!("edge {}: gaussian width must be positive", i + 1)));
                }
            }
        }
        Ok(Self { geometry, edges, junction, terminal, horizon, bounds })
    }

    pub fn edge_count(&self) -> usize {
        self.geometry.edges
    }

    /// `sigma_i(0)^2` per edge, the weights of the quadratic junction cost.
    pub fn junction_weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.sigma(0.0).powi(2)).collect()
    }

    pub fn junction_hamiltonian(&self) -> JunctionHamiltonian {
        match self.junction.cost {
            JunctionCostMode::Linear => JunctionHamiltonian::Linear { floor: self.junction.floor },
            JunctionCostMode::Quadratic => JunctionHamiltonian::Quadratic {
                floor: self.junction.floor,
                weights: self.junction_weights(),
            },
        }
    }

    /// Junction cost `h0(alpha)`.
    pub fn junction_cost(&self, alpha: &[f64]) -> f64 {
        self.junction_hamiltonian().cost(alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    /// `H0(g'(0+))`.
    pub compatibility_residual: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// Checks the standing assumptions on `nodes + 1` equispaced points per edge.
///
/// An empty weight set or a diffusion below the ellipticity floor is an error;
/// everything else is reported as a check.
pub fn validate_problem(problem: &ControlProblem, nodes: usize) -> Result<ValidationReport> {
    let edges = problem.edge_count();
    let floor = problem.junction.floor;
    if edges as f64 * floor > 1.0 {
        return Err(Error::EmptyControlSet { edges, floor });
    }
    let nodes = nodes.max(2);
    let length = problem.geometry.length;
    let xs: Vec<f64> = (0..=nodes).map(|j| length * j as f64 / nodes as f64).collect();
    let c = problem.bounds.ellipticity;
    if !(c > 0.0) {
        return Err(Error::InvalidProblem(format!("ellipticity constant must be positive, got {c}")));
    }
    for (i, e) in problem.edges.iter().enumerate() {
        for &x in &xs {
            let sigma = e.sigma(x);
            if !(sigma >= c) {
                return Err(Error::Ellipticity { edge: i + 1, x, sigma, floor: c });
            }
        }
    }

    let mut checks = vec![
        AssumptionCheck {
            name: "nonempty_junction_set",
            status: CheckStatus::Pass,
            detail: format!("I*floor = {}", edges as f64 * floor),
        },
        AssumptionCheck {
            name: "ellipticity",
            status: CheckStatus::Pass,
            detail: format!("sigma >= {c} on all grid points"),
        },
    ];

    if let Some(bound) = problem.bounds.drift_bound {
        let worst = problem.edges.iter().map(EdgeDynamics::drift_sup).fold(0.0, f64::max);
        checks.push(AssumptionCheck {
            name: "drift_bound",
            status: if worst <= bound { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: format!("sup |b| = {worst} vs declared {bound}"),
        });
    }
    if let Some(bound) = problem.bounds.diffusion_bound {
        let worst = problem.edges.iter().map(|e| e.diffusion.sup_abs()).fold(0.0, f64::max);
        checks.push(AssumptionCheck {
            name: "diffusion_bound",
            status: if worst <= bound { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: format!("sup |sigma| = {worst} vs declared {bound}"),
        });
    }
    if let Some(m1) = problem.bounds.growth_bound {
        let mut status = CheckStatus::Pass;
        let mut detail = format!("|H_i| <= {m1} (1+|p|)^2 on sampled (x, p)");
        for (i, e) in problem.edges.iter().enumerate() {
            if let Err(w) = quadratic_growth_check(e, m1, length, 100.0) {
                status = CheckStatus::Fail;
                detail = format!(
                    "edge {}: |H({}, {})| = {} > {}",
                    i + 1,
                    w.x,
                    w.p,
                    w.value.abs(),
                    w.bound
                );
                break;
            }
        }
        checks.push(AssumptionCheck { name: "quadratic_growth", status, detail });
    }

    // Clipping makes H_i lose C^1 in p; flag when the clip can bind for moderate gradients.
    let mut clip_note = None;
    for (i, e) in problem.edges.iter().enumerate() {
        if let EdgeFamily::SinQuadratic { theta, lambda, .. } = e.dynamics {
            if e.control_bound < (1.0 + lambda.abs()) / (2.0 * theta) {
                clip_note = Some(format!(
                    "edge {}: control bound {} below (1+|lambda|)/(2 theta); clipping may bind",
                    i + 1,
                    e.control_bound
                ));
                break;
            }
        }
    }
    checks.push(AssumptionCheck {
        name: "control_bound",
        status: if clip_note.is_some() { CheckStatus::Warn } else { CheckStatus::Pass },
        detail: clip_note.unwrap_or_else(|| "unclipped for |p| <= 1".into()),
    });

    let unbounded: Vec<usize> = problem
        .terminal
        .shapes
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_bounded())
        .map(|(i, _)| i + 1)
        .collect();
    checks.push(AssumptionCheck {
        name: "terminal_bounded",
        status: if unbounded.is_empty() { CheckStatus::Pass } else { CheckStatus::Warn },
        detail: if unbounded.is_empty() {
            "g bounded on every edge".into()
        } else {
            format!("g unbounded on edges {unbounded:?}")
        },
    });

    let gradients = problem.terminal.vertex_gradients();
    let residual = problem.junction_hamiltonian().solve(&gradients)?.value;
    checks.push(AssumptionCheck {
        name: "compatibility",
        status: if residual.abs() <= COMPATIBILITY_TOL { CheckStatus::Pass } else { CheckStatus::Fail },
        detail: format!("H0(g'(0+)) = {residual:e}, tolerance {COMPATIBILITY_TOL:e}"),
    });

    Ok(ValidationReport { checks, compatibility_residual: residual })
}
