//! Monte Carlo side of the verification theorem: the cost of the feedback
//! policy read off `u` should equal `u(t0, x0)`, no admissible alternative
//! should beat it, and the dynamic programming identity should hold at
//! intermediate times.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::junction::SimplexWeights;
use crate::pde::{FeedbackPolicy, ValueGrid, JUNCTION_TOL};
use crate::problem::{ControlProblem, EdgePoint};
use crate::sim::{simulate_ensemble, ControlRule, Ensemble, OverrideRule, SimulationConfig, StopRule};

pub const MC_RELATIVE_TOL: f64 = 0.03;
pub const DPP_TOL: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McParams {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl McEstimate {
    fn from_ensemble(ensemble: &Ensemble, params: McParams, f: impl Fn(&crate::sim::PathSample) -> f64) -> Self {
        let (mean, std_error) = ensemble.mean_and_se(f);
        Self { mean, std_error, n_paths: params.n_paths, dt: params.dt, seed: params.seed }
    }

    /// `sqrt(se_a^2 + se_b^2)`, conservative for estimates sharing random numbers.
    pub fn combined_se(&self, other: &McEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

/// Mean total cost of a rule from `start` at `t0`.
pub fn mc_value<R: ControlRule + ?Sized>(
    problem: &ControlProblem,
    rule: &R,
    start: EdgePoint,
    t0: f64,
    params: McParams,
) -> Result<McEstimate> {
    let config = SimulationConfig::new(t0, params.dt);
    let ensemble = simulate_ensemble(problem, rule, start, &config, params.n_paths, params.seed)?;
    Ok(McEstimate::from_ensemble(&ensemble, params, |p| p.total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceEntry {
    pub label: String,
    pub estimate: McEstimate,
    /// `optimal.mean - alternative.mean`: positive when the alternative looks cheaper.
    pub shortfall: f64,
    pub combined_se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub optimal: McEstimate,
    pub entries: Vec<DominanceEntry>,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Admissible constant alternatives: each edge control pinned at `+kappa`,
/// `-kappa` and `0` (junction rule kept), and each vertex of `A0` (edge rule kept).
pub fn standard_alternatives<'a>(problem: &ControlProblem, policy: &'a FeedbackPolicy) -> Vec<(String, OverrideRule<'a>)> {
    let kappa: Vec<f64> = problem.edges.iter().map(|e| e.control_bound).collect();
    let pinned = |label: &str, controls: Vec<f64>| {
        (label.to_string(), OverrideRule { base: policy, controls: Some(controls), weights: None })
    };
    let mut out = vec![
        pinned("edge_control=+kappa", kappa.clone()),
        pinned("edge_control=-kappa", kappa.iter().map(|k| -k).collect()),
        pinned("edge_control=0", vec![0.0; kappa.len()]),
    ];
    let edges = problem.edge_count();
    if edges > 1 {
        for i in 0..edges {
            out.push((
                format!("alpha=vertex_{}", i + 1),
                OverrideRule {
                    base: policy,
                    controls: None,
                    weights: Some(SimplexWeights::vertex(edges, problem.junction.floor, i)),
                },
            ));
        }
    }
    out
}

fn dominance_entries(
    problem: &ControlProblem,
    optimal: &McEstimate,
    alternatives: &[(String, &dyn ControlRule)],
    start: EdgePoint,
    t0: f64,
    params: McParams,
) -> Result<Vec<DominanceEntry>> {
    alternatives
        .iter()
        .map(|(label, rule)| {
            let estimate = mc_value(problem, *rule, start, t0, params)?;
            let shortfall = optimal.mean - estimate.mean;
            let combined_se = optimal.combined_se(&estimate);
            Ok(DominanceEntry { label: label.clone(), estimate, shortfall, combined_se, pass: shortfall <= 2.0 * combined_se })
        })
        .collect()
}

/// Every alternative must cost at least the optimal mean minus two combined standard errors.
pub fn dominance_check(
    problem: &ControlProblem,
    optimal: &dyn ControlRule,
    alternatives: &[(String, &dyn ControlRule)],
    start: EdgePoint,
    t0: f64,
    params: McParams,
) -> Result<DominanceReport> {
    let optimal = mc_value(problem, optimal, start, t0, params)?;
    let entries = dominance_entries(problem, &optimal, alternatives, start, t0, params)?;
    Ok(DominanceReport { optimal, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DppStop {
    /// Deterministic time `tau`.
    Fixed,
    /// First junction hit, or `tau` if none.
    FirstHit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DppResult {
    pub tau: f64,
    pub stop: DppStop,
    pub value_at_start: f64,
    /// `E[running cost on [t0, tau] + u(tau, X_tau)]`
    pub expectation: McEstimate,
    pub residual: f64,
}

/// `|u(t0, x0) - E[cost(t0, tau) + u(tau, X_tau)]| / (1 + |u(t0, x0)|)`.
#[allow(clippy::too_many_arguments)]
pub fn dpp_residual<R: ControlRule + ?Sized>(
    problem: &ControlProblem,
    rule: &R,
    vg: &ValueGrid,
    start: EdgePoint,
    t0: f64,
    tau: f64,
    stop: DppStop,
    params: McParams,
) -> Result<DppResult> {
    if vg.level_of(tau).is_none() {
        return Err(Error::InvalidSimulation(format!("tau = {tau} is not a time level of the value grid")));
    }
    if !(t0 <= tau && tau <= vg.terminal_time()) {
        return Err(Error::InvalidSimulation(format!("need t0 <= tau <= T, got t0 = {t0}, tau = {tau}")));
    }
    let value_at_start = vg.interpolate(t0, start.edge, start.x);
    let config = SimulationConfig::new(t0, params.dt).with_stop(match stop {
        DppStop::Fixed => StopRule::At(tau),
        DppStop::FirstHit => StopRule::FirstHitOr(tau),
    });
    let ensemble = simulate_ensemble(problem, rule, start, &config, params.n_paths, params.seed)?;
    let expectation = McEstimate::from_ensemble(&ensemble, params, |p| {
        p.edge_cost + p.junction_cost + vg.interpolate(p.final_time, p.final_state.edge, p.final_state.x)
    });
    let residual = (value_at_start - expectation.mean).abs() / (1.0 + value_at_start.abs());
    Ok(DppResult { tau, stop, value_at_start, expectation, residual })
}

/// One line of the report; every check passes when `value <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { check: check.into(), value, tolerance, pass: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub start: EdgePoint,
    pub t0: f64,
    pub pde_value: f64,
    pub mc_optimal: McEstimate,
    pub alternatives: Vec<DominanceEntry>,
    pub dpp: DppResult,
    pub dpp_first_hit: DppResult,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "start: edge {} x = {} at t0 = {}", self.start.edge + 1, self.start.x, self.t0);
        let _ = writeln!(s, "pde value u(t0, x0) = {:.6}", self.pde_value);
        let _ = writeln!(
            s,
            "mc optimal = {:.6} +- {:.6} ({} paths, dt = {}, seed = {})",
            self.mc_optimal.mean, self.mc_optimal.std_error, self.mc_optimal.n_paths, self.mc_optimal.dt, self.mc_optimal.seed
        );
        for a in &self.alternatives {
            let _ = writeln!(s, "alternative {:<22} {:.6} +- {:.6}", a.label, a.estimate.mean, a.estimate.std_error);
        }
        let _ = writeln!(
            s,
            "dpp at tau = {}: E = {:.6} +- {:.6}; first hit: E = {:.6} +- {:.6}",
            self.dpp.tau,
            self.dpp.expectation.mean,
            self.dpp.expectation.std_error,
            self.dpp_first_hit.expectation.mean,
            self.dpp_first_hit.expectation.std_error
        );
        for c in &self.checks {
            let _ = writeln!(
                s,
                "[{}] {:<32} value = {:.6e}  tolerance = {:.6e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.check,
                c.value,
                c.tolerance
            );
        }
        s
    }

    /// `check,value,tolerance,pass`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "check,value,tolerance,pass")?;
        for c in &self.checks {
            writeln!(out, "{},{:e},{:e},{}", c.check, c.value, c.tolerance, c.pass)?;
        }
        Ok(())
    }
}

/// Full verification from `start` at the grid's initial time.
pub fn verify(
    problem: &ControlProblem,
    vg: &ValueGrid,
    policy: &FeedbackPolicy,
    start: EdgePoint,
    params: McParams,
) -> Result<VerificationReport> {
    let t0 = vg.initial_time();
    let pde_value = vg.interpolate(t0, start.edge, start.x);
    let mc_optimal = mc_value(problem, policy, start, t0, params)?;

    let owned = standard_alternatives(problem, policy);
    let alternatives: Vec<(String, &dyn ControlRule)> =
        owned.iter().map(|(l, r)| (l.clone(), r as &dyn ControlRule)).collect();
    let entries = dominance_entries(problem, &mc_optimal, &alternatives, start, t0, params)?;

    // the grid level closest to the midpoint
    let tau = vg.time(vg.n_time() / 2);
    let dpp = dpp_residual(problem, policy, vg, start, t0, tau, DppStop::Fixed, params)?;
    let dpp_first_hit = dpp_residual(problem, policy, vg, start, t0, tau, DppStop::FirstHit, params)?;

    let mut checks = vec![CheckResult::new(
        "mc_vs_pde",
        (mc_optimal.mean - pde_value).abs(),
        (MC_RELATIVE_TOL * pde_value.abs()).max(3.0 * mc_optimal.std_error),
    )];
    for e in &entries {
        checks.push(CheckResult::new(format!("dominance:{}", e.label), e.shortfall, 2.0 * e.combined_se));
    }
    checks.push(CheckResult::new("dpp_midpoint", dpp.residual, DPP_TOL));
    checks.push(CheckResult::new("dpp_first_hit", dpp_first_hit.residual, DPP_TOL));
    checks.push(CheckResult::new("junction_residual", vg.max_junction_residual(), JUNCTION_TOL));
    checks.push(CheckResult::new("control_clip_count", policy.clip_count as f64, 0.0));

    Ok(VerificationReport {
        start,
        t0,
        pde_value,
        mc_optimal,
        alternatives: entries,
        dpp,
        dpp_first_hit,
        checks,
    })
}
