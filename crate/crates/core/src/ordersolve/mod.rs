//! Globally consistent step orders from pairwise log-probabilities.
//!
//! For `T` steps and weights `w[i][j] = ln Pr(i before j)` the solver picks a
//! strict partial order `x` (antisymmetric and transitive) maximizing
//! `Σ w[i][j] x[i][j]` subject to at least `D` ordered pairs. Pairs left out of
//! the relation are ambiguous and cost nothing.
//!
//! Ties between optimal relations are broken deterministically: fewer decided
//! pairs first, then the lexicographically smallest state vector over pairs
//! `(0,1), (0,2), ..., (T-2,T-1)` with undecided < forward (`i` before `j`)
//! < backward. Objectives are correctly rounded sums of the selected weights,
//! so they do not depend on summation order.

mod branch;
mod bruteforce;
mod fsum;
mod io;

pub use branch::{solve_exact, DEFAULT_TIME_LIMIT};
pub use bruteforce::{solve_bruteforce, BRUTEFORCE_MAX_STEPS};
pub use fsum::exact_sum;
pub use io::{solve_problem_file, ProblemFile, SolutionFile};

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::{Error, Result};

/// Clamp applied to probabilities before taking logs.
pub const DEFAULT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseWeights {
    n: usize,
    w: Vec<f64>,
}

impl PairwiseWeights {
    /// `w` is row-major `n x n`; the diagonal is ignored.
    pub fn new(n: usize, w: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 steps, got {n}")));
        }
        if w.len() != n * n {
            return Err(Error::Shape(format!("weight matrix has {} entries, expected {}", w.len(), n * n)));
        }
        for i in 0..n {
            for j in 0..n {
                let v = w[i * n + j];
                if i != j && !(v.is_finite() && v <= 0.0) {
                    return Err(Error::Domain(format!("weight ({i},{j}) = {v} is not a finite log-probability")));
                }
            }
        }
        Ok(PairwiseWeights { n, w })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("weight matrix is not square".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn pair_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Multiplies every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.w.iter().map(|v| v * factor).collect())
    }
}

/// `w[i][j] = ln(max(p[i][j], eps))` for off-diagonal entries.
pub fn weights_from_probs(probs: &[Vec<f64>], eps: f64) -> Result<PairwiseWeights> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Domain(format!("clamp eps {eps} outside (0, 0.5)")));
    }
    let n = probs.len();
    if probs.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("probability matrix is not square".into()));
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = probs[i][j];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("probability ({i},{j}) = {p} outside [0, 1]")));
            }
            w[i * n + j] = p.max(eps).ln();
        }
    }
    PairwiseWeights::new(n, w)
}

/// Minimum decided pairs for ambiguity fraction `a`: `round((1 - a) T(T-1)/2)`.
pub fn min_decided_for_ambiguity(steps: usize, ambiguity: f64) -> usize {
    let pairs = (steps * steps.saturating_sub(1) / 2) as f64;
    ((1.0 - ambiguity) * pairs).round().clamp(0.0, pairs) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderProblem {
    pub weights: PairwiseWeights,
    pub min_decided: usize,
}

impl OrderProblem {
    pub fn new(weights: PairwiseWeights, min_decided: usize) -> Result<Self> {
        let pairs = weights.pair_count();
        if min_decided > pairs {
            return Err(Error::Infeasible(format!(
                "D = {min_decided} exceeds the {pairs} unordered pairs of {} steps",
                weights.len()
            )));
        }
        Ok(OrderProblem { weights, min_decided })
    }

    pub fn steps(&self) -> usize {
        self.weights.len()
    }
}

/// State of an unordered pair `(i, j)`, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairState {
    Undecided = 0,
    Forward = 1,
    Backward = 2,
}

/// Unordered pairs in lexicographic order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSolution {
    n: usize,
    /// Row-major `n x n`; `x[i][j]` means step `i` strictly precedes `j`.
    relation: Vec<bool>,
    pub objective: f64,
    /// False when a time limit stopped the search before optimality was proven.
    pub optimal: bool,
    pub decided_count: usize,
}

impl OrderSolution {
    pub fn from_states(weights: &PairwiseWeights, states: &[PairState], optimal: bool) -> Self {
        let n = weights.len();
        let mut relation = vec![false; n * n];
        for (&(i, j), s) in pairs(n).iter().zip(states) {
            match s {
                PairState::Forward => relation[i * n + j] = true,
                PairState::Backward => relation[j * n + i] = true,
                PairState::Undecided => {}
            }
        }
        Self::from_relation(weights, relation, optimal)
    }

    fn from_relation(weights: &PairwiseWeights, relation: Vec<bool>, optimal: bool) -> Self {
        let n = weights.len();
        let mut selected = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if relation[i * n + j] {
                    selected.push(weights.get(i, j));
                }
            }
        }
        OrderSolution {
            n,
            decided_count: selected.len(),
            objective: exact_sum(&selected),
            relation,
            optimal,
        }
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn precedes(&self, i: usize, j: usize) -> bool {
        self.relation[i * self.n + j]
    }

    pub fn state(&self, i: usize, j: usize) -> PairState {
        if self.precedes(i, j) {
            PairState::Forward
        } else if self.precedes(j, i) {
            PairState::Backward
        } else {
            PairState::Undecided
        }
    }

    /// Pair states in lexicographic pair order.
    pub fn states(&self) -> Vec<PairState> {
        pairs(self.n).into_iter().map(|(i, j)| self.state(i, j)).collect()
    }

    /// Ordered pairs `(i, j)` with `i` before `j`, row-major.
    pub fn ordered_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.decided_count);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.precedes(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Tie-break order: larger objective, then fewer decided pairs, then the
    /// lexicographically smaller state vector. `Less` means `self` is better.
    pub fn rank_against(&self, other: &OrderSolution) -> Ordering {
        other
            .objective
            .partial_cmp(&self.objective)
            .unwrap_or(Ordering::Equal)
            .then(self.decided_count.cmp(&other.decided_count))
            .then_with(|| self.states().cmp(&other.states()))
    }
}

/// Independent feasibility audit: antisymmetry, transitivity via full
/// closure recomputation, the decided-pairs budget, and the objective.
pub fn check_solution(problem: &OrderProblem, solution: &OrderSolution) -> Result<()> {
    let n = problem.steps();
    if solution.steps() != n {
        return Err(Error::Invariant("solution size differs from problem".into()));
    }
    let mut closure: Vec<bool> = solution.relation.clone();
    for k in 0..n {
        for i in 0..n {
            if closure[i * n + k] {
                for j in 0..n {
                    if closure[k * n + j] {
                        closure[i * n + j] = true;
                    }
                }
            }
        }
    }
    for i in 0..n {
        if closure[i * n + i] {
            return Err(Error::Invariant(format!("step {i} precedes itself")));
        }
        for j in 0..n {
            if i != j && solution.precedes(i, j) && solution.precedes(j, i) {
                return Err(Error::Invariant(format!("pair ({i},{j}) ordered both ways")));
            }
        }
    }
    if closure != solution.relation {
        return Err(Error::Invariant("relation is not transitively closed".into()));
    }
    let decided = solution.relation.iter().filter(|&&x| x).count();
    if decided != solution.decided_count || decided < problem.min_decided {
        return Err(Error::Invariant(format!(
            "decided {decided} (reported {}) against D = {}",
            solution.decided_count, problem.min_decided
        )));
    }
    let naive: f64 = solution.ordered_pairs().iter().map(|&(i, j)| problem.weights.get(i, j)).sum();
    if (naive - solution.objective).abs() > 1e-9 * (1.0 + naive.abs()) {
        return Err(Error::Invariant(format!("objective {} vs recomputed {naive}", solution.objective)));
    }
    Ok(())
}

/// Topological order of the relation, smallest step index first among ready
/// steps.
pub fn linearize(solution: &OrderSolution) -> Result<Vec<usize>> {
    let n = solution.steps();
    let mut indegree = vec![0usize; n];
    for (_, j) in solution.ordered_pairs() {
        indegree[j] += 1;
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        out.push(i);
        for j in 0..n {
            if solution.precedes(i, j) {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
    }
    if out.len() != n {
        return Err(Error::Invariant("relation contains a cycle".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(n: usize, f: impl Fn(usize, usize) -> f64) -> PairwiseWeights {
        let w = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { f(k / n, k % n) }).collect();
        PairwiseWeights::new(n, w).unwrap()
    }

    #[test]
    fn weights_from_probs_values() {
        let w = weights_from_probs(&[vec![0.0, 1.0], vec![0.5, 0.0]], 1e-9).unwrap();
        assert_eq!(w.get(0, 1), 0.0);
        assert!((w.get(1, 0) + std::f64::consts::LN_2).abs() < 1e-15);
        let w = weights_from_probs(&[vec![0.3, 0.0], vec![1.0, 0.9]], 1e-9).unwrap();
        assert!((w.get(0, 1) - 1e-9f64.ln()).abs() < 1e-12);
        assert!((w.get(0, 1) + 20.723265836946414).abs() < 1e-9);
    }

    #[test]
    fn weights_from_probs_errors() {
        assert!(matches!(weights_from_probs(&[vec![0.0, 1.2], vec![0.5, 0.0]], 1e-9), Err(Error::Domain(_))));
        assert!(matches!(weights_from_probs(&[vec![0.0, f64::NAN], vec![0.5, 0.0]], 1e-9), Err(Error::Domain(_))));
        assert!(matches!(weights_from_probs(&[vec![0.0, 0.5], vec![0.5, 0.0]], 0.5), Err(Error::Domain(_))));
        assert!(matches!(weights_from_probs(&[vec![0.0, 0.5]], 1e-3), Err(Error::Shape(_))));
        assert!(weights_from_probs(&[vec![0.0]], 1e-3).is_err());
    }

    #[test]
    fn budget_rounding() {
        assert_eq!(min_decided_for_ambiguity(5, 0.0), 10);
        assert_eq!(min_decided_for_ambiguity(5, 0.5), 5);
        assert_eq!(min_decided_for_ambiguity(4, 0.25), 5); // 4.5 rounds away from zero
        assert_eq!(min_decided_for_ambiguity(4, 1.0), 0);
    }

    #[test]
    fn problem_rejects_oversized_budget() {
        let w = weights(3, |_, _| -1.0);
        assert!(matches!(OrderProblem::new(w, 4), Err(Error::Infeasible(_))));
    }

    #[test]
    fn linearize_examples() {
        let w = weights(3, |_, _| -1.0);
        let total = OrderSolution::from_states(&w, &[PairState::Backward, PairState::Backward, PairState::Backward], true);
        assert_eq!(linearize(&total).unwrap(), vec![2, 1, 0]);
        let none = OrderSolution::from_states(&w, &[PairState::Undecided; 3], true);
        assert_eq!(linearize(&none).unwrap(), vec![0, 1, 2]);
        let chain = OrderSolution::from_states(&w, &[PairState::Undecided, PairState::Forward, PairState::Undecided], true);
        assert_eq!(linearize(&chain).unwrap(), vec![0, 1, 2]);
        let late = OrderSolution::from_states(&w, &[PairState::Undecided, PairState::Backward, PairState::Undecided], true);
        assert_eq!(linearize(&late).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn linearize_detects_cycles() {
        let w = weights(3, |_, _| -1.0);
        // 0<1, 1<2, 2<0 is not a partial order.
        let cyc = OrderSolution::from_states(&w, &[PairState::Forward, PairState::Backward, PairState::Forward], true);
        assert!(matches!(linearize(&cyc), Err(Error::Invariant(_))));
        let problem = OrderProblem::new(w, 0).unwrap();
        assert!(check_solution(&problem, &cyc).is_err());
    }

    #[test]
    fn check_solution_catches_open_chains() {
        let w = weights(3, |_, _| -1.0);
        let open = OrderSolution::from_states(&w, &[PairState::Forward, PairState::Undecided, PairState::Forward], true);
        let problem = OrderProblem::new(w, 0).unwrap();
        assert!(check_solution(&problem, &open).is_err());
    }

    #[test]
    fn positive_weights_are_rejected() {
        assert!(PairwiseWeights::new(2, vec![0.0, 0.1, -0.2, 0.0]).is_err());
        assert!(PairwiseWeights::new(2, vec![5.0, -0.1, -0.2, 5.0]).is_ok());
    }
}
