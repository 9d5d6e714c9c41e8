use super::{pairs, OrderProblem, OrderSolution, PairState};
use crate::{Error, Result};

pub const BRUTEFORCE_MAX_STEPS: usize = 5;

/// Enumerates every assignment of the unordered pairs to
/// {undecided, forward, backward}, keeps the transitive ones meeting the
/// budget, and returns the best under the shared tie-break.
pub fn solve_bruteforce(problem: &OrderProblem) -> Result<OrderSolution> {
    let n = problem.steps();
    if n > BRUTEFORCE_MAX_STEPS {
        return Err(Error::Refused(format!(
            "brute force enumerates 3^(T(T-1)/2) assignments; T = {n} exceeds {BRUTEFORCE_MAX_STEPS}"
        )));
    }
    let pair_list = pairs(n);
    let p = pair_list.len();
    let total = 3usize.pow(p as u32);
    let mut best: Option<OrderSolution> = None;
    let mut states = vec![PairState::Undecided; p];
    let mut x = vec![false; n * n];

    for code in 0..total {
        let mut c = code;
        let mut decided = 0;
        x.iter_mut().for_each(|v| *v = false);
        for (k, &(i, j)) in pair_list.iter().enumerate() {
            states[k] = match c % 3 {
                0 => PairState::Undecided,
                1 => {
                    x[i * n + j] = true;
                    decided += 1;
                    PairState::Forward
                }
                _ => {
                    x[j * n + i] = true;
                    decided += 1;
                    PairState::Backward
                }
            };
            c /= 3;
        }
        if decided < problem.min_decided || !transitive(&x, n) {
            continue;
        }
        let candidate = OrderSolution::from_states(&problem.weights, &states, true);
        let better = match &best {
            None => true,
            Some(b) => candidate.rank_against(b).is_lt(),
        };
        if better {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| Error::Infeasible("no feasible relation".into()))
}

fn transitive(x: &[bool], n: usize) -> bool {
    for i in 0..n {
        for j in 0..n {
            if !x[i * n + j] {
                continue;
            }
            for k in 0..n {
                if x[j * n + k] && !x[i * n + k] {
                    return false;
                }
            }
        }
    }
    true
}
