//! Fixtures for unit tests. The oracles are shared with the integration tests.

#[path = "../tests/common/oracles.rs"]
mod oracles;

pub use oracles::*;

use crate::problem::ControlProblem;
use crate::scenario::Scenario;

fn builtin(name: &str) -> ControlProblem {
    Scenario::builtin(name).unwrap().problem().unwrap()
}

pub fn quadratic_junction_problem() -> ControlProblem {
    builtin("quadratic_junction")
}

pub fn reflected_problem() -> ControlProblem {
    builtin("reflected_bm_oracle")
}

pub fn symmetric_heat_problem() -> ControlProblem {
    builtin("symmetric_heat")
}

pub fn zero_problem() -> ControlProblem {
    builtin("zero")
}
