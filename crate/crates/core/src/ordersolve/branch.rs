//! Exact branch-and-bound over unordered pairs.
//!
//! Every unordered pair is branched three ways (undecided, forward,
//! backward), most decisive pairs first. Ordering a pair adds the transitive
//! closure of the new edge; a closure edge that reverses an existing edge or
//! crosses a pair fixed as undecided kills the branch. The bound assumes every
//! remaining pair can take its best value independently, with at least as many
//! of them decided as the budget still requires.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use super::{exact_sum, pairs, OrderProblem, OrderSolution, PairState};
use crate::{Error, Result};

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(5);
const MAX_STEPS: usize = 64;

pub fn solve_exact(problem: &OrderProblem, time_limit: Duration) -> Result<OrderSolution> {
    let n = problem.steps();
    if n > MAX_STEPS {
        return Err(Error::Refused(format!("at most {MAX_STEPS} steps supported, got {n}")));
    }
    if problem.min_decided > problem.weights.pair_count() {
        return Err(Error::Infeasible(format!(
            "D = {} exceeds {} pairs",
            problem.min_decided,
            problem.weights.pair_count()
        )));
    }
    let mut search = Search::new(problem, Instant::now() + time_limit);
    search.incumbent = Some(search.thinned_borda_order());
    search.dfs(0);
    let best = search.incumbent.take().expect("initial incumbent is feasible");
    Ok(OrderSolution::from_states(&problem.weights, &best.states, !search.timed_out))
}

struct Candidate {
    states: Vec<PairState>,
    objective: f64,
    decided: usize,
}

struct Search<'a> {
    problem: &'a OrderProblem,
    n: usize,
    lex: Vec<(usize, usize)>,
    /// Pair visiting order (indices into `lex`).
    branch_order: Vec<usize>,
    /// Pairs by best decided weight, descending (indices into `lex`).
    by_value: Vec<usize>,
    succ: Vec<u64>,
    pred: Vec<u64>,
    undecided: Vec<u64>,
    decided_weights: Vec<f64>,
    trail: Vec<u64>,
    scratch: Vec<f64>,
    demoted: Vec<f64>,
    incumbent: Option<Candidate>,
    deadline: Instant,
    nodes: u64,
    timed_out: bool,
}

impl<'a> Search<'a> {
    fn new(problem: &'a OrderProblem, deadline: Instant) -> Self {
        let n = problem.steps();
        let w = &problem.weights;
        let lex = pairs(n);
        let mut branch_order: Vec<usize> = (0..lex.len()).collect();
        branch_order.sort_by(|&a, &b| {
            let gap = |k: usize| (w.get(lex[k].0, lex[k].1) - w.get(lex[k].1, lex[k].0)).abs();
            gap(b).partial_cmp(&gap(a)).unwrap_or(Ordering::Equal)
        });
        let mut by_value: Vec<usize> = (0..lex.len()).collect();
        let best = |k: usize| w.get(lex[k].0, lex[k].1).max(w.get(lex[k].1, lex[k].0));
        by_value.sort_by(|&a, &b| best(b).partial_cmp(&best(a)).unwrap_or(Ordering::Equal));

        Search {
            problem,
            n,
            lex,
            branch_order,
            by_value,
            succ: vec![0; n],
            pred: vec![0; n],
            undecided: vec![0; n],
            decided_weights: Vec::new(),
            trail: Vec::new(),
            scratch: Vec::new(),
            demoted: Vec::new(),
            incumbent: None,
            deadline,
            nodes: 0,
            timed_out: false,
        }
    }

    fn state(&self, k: usize) -> Option<PairState> {
        let (i, j) = self.lex[k];
        if self.succ[i] >> j & 1 == 1 {
            Some(PairState::Forward)
        } else if self.succ[j] >> i & 1 == 1 {
            Some(PairState::Backward)
        } else if self.undecided[i] >> j & 1 == 1 {
            Some(PairState::Undecided)
        } else {
            None
        }
    }

    /// Total order by descending net preference, ties by index.
    fn borda_order(&self) -> Candidate {
        let w = &self.problem.weights;
        let score = |i: usize| -> f64 { (0..self.n).filter(|&j| j != i).map(|j| w.get(i, j) - w.get(j, i)).sum() };
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        let mut rank = vec![0; self.n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let states: Vec<PairState> = self
            .lex
            .iter()
            .map(|&(i, j)| if rank[i] < rank[j] { PairState::Forward } else { PairState::Backward })
            .collect();
        let selected: Vec<f64> = self
            .lex
            .iter()
            .map(|&(i, j)| if rank[i] < rank[j] { w.get(i, j) } else { w.get(j, i) })
            .collect();
        Candidate {
            states,
            objective: exact_sum(&selected),
            decided: self.lex.len(),
        }
    }

    /// The Borda order thinned down to the budget: repeatedly drops the
    /// costliest pair that no third step sits between, which keeps the
    /// relation transitive.
    fn thinned_borda_order(&self) -> Candidate {
        let w = &self.problem.weights;
        let mut c = self.borda_order();
        let n = self.n;
        let mut rel = vec![false; n * n];
        for (k, &(i, j)) in self.lex.iter().enumerate() {
            match c.states[k] {
                PairState::Forward => rel[i * n + j] = true,
                PairState::Backward => rel[j * n + i] = true,
                PairState::Undecided => {}
            }
        }
        while c.decided > self.problem.min_decided {
            let mut drop: Option<(usize, usize, usize)> = None;
            for (k, &(i, j)) in self.lex.iter().enumerate() {
                let (x, y) = match c.states[k] {
                    PairState::Forward => (i, j),
                    PairState::Backward => (j, i),
                    PairState::Undecided => continue,
                };
                if (0..n).any(|z| rel[x * n + z] && rel[z * n + y]) {
                    continue;
                }
                if drop.map_or(true, |(_, a, b)| w.get(x, y) < w.get(a, b)) {
                    drop = Some((k, x, y));
                }
            }
            let Some((k, x, y)) = drop else { break };
            rel[x * n + y] = false;
            c.states[k] = PairState::Undecided;
            c.decided -= 1;
        }
        let selected: Vec<f64> = (0..n * n).filter(|&e| rel[e]).map(|e| w.get(e / n, e % n)).collect();
        c.objective = exact_sum(&selected);
        c
    }

    fn save(&mut self) -> (usize, usize) {
        let mark = self.trail.len();
        self.trail.extend_from_slice(&self.succ);
        self.trail.extend_from_slice(&self.pred);
        self.trail.extend_from_slice(&self.undecided);
        (mark, self.decided_weights.len())
    }

    fn restore(&mut self, (mark, weights_len): (usize, usize)) {
        let n = self.n;
        self.succ.copy_from_slice(&self.trail[mark..mark + n]);
        self.pred.copy_from_slice(&self.trail[mark + n..mark + 2 * n]);
        self.undecided.copy_from_slice(&self.trail[mark + 2 * n..mark + 3 * n]);
        self.trail.truncate(mark);
        self.decided_weights.truncate(weights_len);
    }

    /// Adds `a < b` with its transitive consequences. False on conflict.
    fn order(&mut self, a: usize, b: usize) -> bool {
        let sources = self.pred[a] | 1 << a;
        let targets = self.succ[b] | 1 << b;
        let mut rest = sources;
        while rest != 0 {
            let x = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let new = targets & !self.succ[x];
            if new == 0 {
                continue;
            }
            if new & (self.pred[x] | self.undecided[x] | 1 << x) != 0 {
                return false;
            }
            self.succ[x] |= new;
            let mut bits = new;
            while bits != 0 {
                let y = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                self.pred[y] |= 1 << x;
                self.decided_weights.push(self.problem.weights.get(x, y));
            }
        }
        true
    }

    fn leave_undecided(&mut self, i: usize, j: usize) {
        self.undecided[i] |= 1 << j;
        self.undecided[j] |= 1 << i;
    }

    /// Whether `a < b` can still be added without a conflict.
    fn can_order(&self, a: usize, b: usize) -> bool {
        let targets = self.succ[b] | 1 << b;
        let mut rest = self.pred[a] | 1 << a;
        while rest != 0 {
            let x = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if targets & (self.pred[x] | self.undecided[x] | 1 << x) != 0 {
                return false;
            }
        }
        true
    }

    /// Terms of the upper bound on any completion: the decided weights plus
    /// the best `need` values of open pairs, each over its directions that
    /// are not yet blocked. False if the budget can no longer be met.
    fn bound_terms(&self, terms: &mut Vec<f64>, demoted: &mut Vec<f64>) -> bool {
        let w = &self.problem.weights;
        let need = self.problem.min_decided.saturating_sub(self.decided_weights.len());
        terms.clear();
        demoted.clear();
        terms.extend_from_slice(&self.decided_weights);
        let mut taken = 0;
        // `by_value` is sorted by the unblocked value, an upper bound on the
        // actual one, so demoted values merge in once they lead.
        let take_demoted = |terms: &mut Vec<f64>, demoted: &mut Vec<f64>, floor: f64, taken: &mut usize| {
            while *taken < need {
                let Some((pos, &v)) = demoted.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)) else { break };
                if v < floor {
                    break;
                }
                terms.push(v);
                demoted.swap_remove(pos);
                *taken += 1;
            }
        };
        for &k in &self.by_value {
            if taken >= need {
                break;
            }
            if self.state(k).is_some() {
                continue;
            }
            let (i, j) = self.lex[k];
            let (fwd, bwd) = (w.get(i, j), w.get(j, i));
            let upper = fwd.max(bwd);
            take_demoted(terms, demoted, upper, &mut taken);
            if taken >= need {
                break;
            }
            let value = match (self.can_order(i, j), self.can_order(j, i)) {
                (true, true) => Some(upper),
                (true, false) => Some(fwd),
                (false, true) => Some(bwd),
                (false, false) => None,
            };
            match value {
                Some(v) if v == upper => {
                    terms.push(v);
                    taken += 1;
                }
                Some(v) => demoted.push(v),
                None => {}
            }
        }
        take_demoted(terms, demoted, f64::NEG_INFINITY, &mut taken);
        taken >= need
    }

    /// Compares the bound with the incumbent objective, summing exactly only
    /// when the plain float sum is too close to call.
    fn compare_bound(&self, terms: &[f64]) -> (Ordering, Option<f64>) {
        let Some(inc) = &self.incumbent else { return (Ordering::Greater, None) };
        let approx: f64 = terms.iter().sum();
        let magnitude: f64 = terms.iter().map(|t| t.abs()).sum();
        let margin = 2.0 * terms.len() as f64 * f64::EPSILON * magnitude;
        if approx + margin < inc.objective {
            return (Ordering::Less, None);
        }
        if approx - margin > inc.objective {
            return (Ordering::Greater, None);
        }
        let exact = exact_sum(terms);
        (exact.partial_cmp(&inc.objective).unwrap_or(Ordering::Less), Some(exact))
    }

    /// Whether a subtree whose bound compares as `cmp` might hold something
    /// ranked above the incumbent.
    fn promising(&self, cmp: Ordering) -> bool {
        let Some(inc) = &self.incumbent else { return true };
        match cmp {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                let min_decided = self.decided_weights.len().max(self.problem.min_decided);
                match min_decided.cmp(&inc.decided) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        let lowest = (0..self.lex.len()).map(|k| self.state(k).unwrap_or(PairState::Undecided));
                        lowest.lt(inc.states.iter().copied())
                    }
                }
            }
        }
    }

    fn dfs(&mut self, mut depth: usize) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes % 256 == 0 && Instant::now() >= self.deadline {
            self.timed_out = true;
            return;
        }
        while depth < self.branch_order.len() && self.state(self.branch_order[depth]).is_some() {
            depth += 1;
        }
        let mut terms = std::mem::take(&mut self.scratch);
        let mut demoted = std::mem::take(&mut self.demoted);
        let feasible = self.bound_terms(&mut terms, &mut demoted);
        self.demoted = demoted;
        let (cmp, exact) = if feasible { self.compare_bound(&terms) } else { (Ordering::Less, None) };
        let leaf = depth == self.branch_order.len();
        let objective = (leaf && feasible && self.promising(cmp)).then(|| exact.unwrap_or_else(|| exact_sum(&terms)));
        self.scratch = terms;
        if !feasible || !self.promising(cmp) {
            return;
        }
        if let Some(objective) = objective {
            // Every pair fixed: the bound is exactly this leaf's objective.
            let states: Vec<PairState> = (0..self.lex.len()).map(|k| self.state(k).unwrap()).collect();
            self.incumbent = Some(Candidate {
                states,
                objective,
                decided: self.decided_weights.len(),
            });
            return;
        }

        let k = self.branch_order[depth];
        let (i, j) = self.lex[k];
        let w = &self.problem.weights;
        let mut choices = [
            (PairState::Undecided, 0.0),
            (PairState::Forward, w.get(i, j)),
            (PairState::Backward, w.get(j, i)),
        ];
        choices.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        for (choice, _) in choices {
            let saved = self.save();
            let ok = match choice {
                PairState::Undecided => {
                    self.leave_undecided(i, j);
                    true
                }
                PairState::Forward => self.order(i, j),
                PairState::Backward => self.order(j, i),
            };
            if ok {
                self.dfs(depth + 1);
            }
            self.restore(saved);
            if self.timed_out {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordersolve::{check_solution, solve_bruteforce, PairwiseWeights};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> OrderProblem {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    w[i * n + j] = rng.gen_range(0.001f64..1.0).ln();
                }
            }
        }
        let d = rng.gen_range(0..=n * (n - 1) / 2);
        OrderProblem::new(PairwiseWeights::new(n, w).unwrap(), d).unwrap()
    }

    #[test]
    fn matches_bruteforce_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let n = rng.gen_range(2..=4);
            let p = random_problem(&mut rng, n);
            let exact = solve_exact(&p, DEFAULT_TIME_LIMIT).unwrap();
            let brute = solve_bruteforce(&p).unwrap();
            assert_eq!(exact.objective.to_bits(), brute.objective.to_bits());
            assert_eq!(exact.states(), brute.states());
            assert!(exact.optimal);
            check_solution(&p, &exact).unwrap();
        }
    }

    #[test]
    fn full_budget_gives_total_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = random_problem(&mut rng, 7);
        p.min_decided = 21;
        let s = solve_exact(&p, DEFAULT_TIME_LIMIT).unwrap();
        assert_eq!(s.decided_count, 21);
        for i in 0..7 {
            for j in i + 1..7 {
                assert!(s.precedes(i, j) ^ s.precedes(j, i));
            }
        }
    }

    #[test]
    fn uniform_weights_yield_identity_order() {
        let n = 9;
        let half = 0.5f64.ln();
        let w = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { half }).collect();
        let pairs = n * (n - 1) / 2;
        let p = OrderProblem::new(PairwiseWeights::new(n, w).unwrap(), pairs).unwrap();
        let s = solve_exact(&p, DEFAULT_TIME_LIMIT).unwrap();
        assert!(s.optimal);
        assert!(s.states().iter().all(|&st| st == PairState::Forward));
        assert!((s.objective - pairs as f64 * half).abs() < 1e-12);
    }

    #[test]
    fn oversized_budget_is_infeasible() {
        let w = PairwiseWeights::new(2, vec![0.0, -1.0, -1.0, 0.0]).unwrap();
        let p = OrderProblem { weights: w, min_decided: 2 };
        assert!(matches!(solve_exact(&p, DEFAULT_TIME_LIMIT), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_time_limit_still_returns_a_feasible_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_problem(&mut rng, 14);
        let s = solve_exact(&p, Duration::ZERO).unwrap();
        check_solution(&p, &s).unwrap();
    }
}
