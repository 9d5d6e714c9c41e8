use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{linearize, solve_exact, weights_from_probs, OrderProblem, OrderSolution};
use crate::{Error, Result};

/// `{"task_id": "...", "steps": [...], "probs": [[...]], "D": n}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub task_id: String,
    pub steps: Vec<String>,
    pub probs: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub min_decided: usize,
}

/// `{"pairs": [[i, j], ...], "objective": f, "optimal": b, "linearization": [...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub pairs: Vec<[usize; 2]>,
    pub objective: f64,
    pub optimal: bool,
    pub linearization: Vec<usize>,
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn to_problem(&self, eps: f64) -> Result<OrderProblem> {
        if self.probs.len() != self.steps.len() {
            return Err(Error::Shape(format!(
                "{} steps but a {}-row probability matrix",
                self.steps.len(),
                self.probs.len()
            )));
        }
        OrderProblem::new(weights_from_probs(&self.probs, eps)?, self.min_decided)
    }
}

impl SolutionFile {
    pub fn from_solution(solution: &OrderSolution) -> Result<Self> {
        Ok(SolutionFile {
            pairs: solution.ordered_pairs().into_iter().map(|(i, j)| [i, j]).collect(),
            objective: solution.objective,
            optimal: solution.optimal,
            linearization: linearize(solution)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

pub fn solve_problem_file(problem: &ProblemFile, eps: f64, time_limit: Duration) -> Result<SolutionFile> {
    let solution = solve_exact(&problem.to_problem(eps)?, time_limit)?;
    SolutionFile::from_solution(&solution)
}
