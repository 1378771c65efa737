//! JSON scenario files. Edge indices are one-based here; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::SpaceTimeGrid;
use crate::problem::{
    AssumptionBounds, ControlProblem, Diffusion, EdgeDynamics, EdgeFamily, EdgePoint, Horizon, JunctionCost,
    JunctionGeometry, TerminalCondition, TerminalShape,
};
use crate::verify::McParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub diffusion: Diffusion,
    pub dynamics: EdgeFamily,
    pub control_bound: f64,
    pub terminal: TerminalShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_time: usize,
    pub n_space: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub n_paths: usize,
    pub dt: f64,
    /// Required by every stochastic command, here or on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    /// One-based edge index.
    pub edge: usize,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub geometry: JunctionGeometry,
    pub horizon: Horizon,
    pub junction: JunctionCost,
    pub terminal_vertex_value: f64,
    pub assumptions: AssumptionBounds,
    pub edges: Vec<EdgeSpec>,
    pub grid: GridSpec,
    pub monte_carlo: MonteCarloSpec,
    pub start: StartSpec,
    #[serde(default)]
    pub output_dir: Option<String>,
}

pub const BUILTIN_SCENARIOS: [&str; 4] = ["zero", "reflected_bm_oracle", "symmetric_heat", "quadratic_junction"];

fn builtin_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "zero" => include_str!("../scenarios/zero.json"),
        "reflected_bm_oracle" => include_str!("../scenarios/reflected_bm_oracle.json"),
        "symmetric_heat" => include_str!("../scenarios/symmetric_heat.json"),
        "quadratic_junction" => include_str!("../scenarios/quadratic_junction.json"),
        _ => return None,
    })
}

impl Scenario {
    /// Parse errors carry the line and column of the offending token.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Scenario(format!("line {}, column {}: {}", e.line(), e.column(), strip_position(&e.to_string())))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn builtin(name: &str) -> Option<Self> {
        builtin_text(name).map(|t| Self::from_json(t).expect("shipped scenarios parse"))
    }

    /// A file path, or the name of a shipped scenario when no such file exists.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        let path = Path::new(name_or_path);
        if !path.exists() {
            if let Some(s) = Self::builtin(name_or_path) {
                return Ok(s);
            }
        }
        Self::load(path)
    }

    pub fn problem(&self) -> Result<ControlProblem> {
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeDynamics { diffusion: e.diffusion, dynamics: e.dynamics, control_bound: e.control_bound })
            .collect();
        let terminal = TerminalCondition {
            vertex_value: self.terminal_vertex_value,
            shapes: self.edges.iter().map(|e| e.terminal).collect(),
        };
        ControlProblem::new(self.geometry, edges, self.junction, terminal, self.horizon, self.assumptions)
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(self.grid.n_time, self.grid.n_space)
    }

    /// Zero-based start point.
    pub fn start_point(&self) -> Result<EdgePoint> {
        let StartSpec { edge, x } = self.start;
        if edge == 0 || edge > self.geometry.edges || !(x >= 0.0) {
            return Err(Error::Scenario(format!(
                "start point (edge {edge}, x = {x}) is not on a junction with {} edges",
                self.geometry.edges
            )));
        }
        Ok(EdgePoint::new(edge - 1, x))
    }

    pub fn mc_params(&self) -> Result<McParams> {
        let seed = self
            .monte_carlo
            .seed
            .ok_or_else(|| Error::Scenario("a seed is required for stochastic commands".into()))?;
        Ok(McParams { n_paths: self.monte_carlo.n_paths, dt: self.monte_carlo.dt, seed })
    }

    pub fn output_dir(&self) -> String {
        self.output_dir.clone().unwrap_or_else(|| format!("out/{}", self.name))
    }
}

fn strip_position(msg: &str) -> &str {
    msg.rsplit_once(" at line ").map_or(msg, |(head, _)| head)
}
