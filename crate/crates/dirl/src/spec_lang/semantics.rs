//! Finite-trajectory satisfaction semantics.

use std::collections::HashMap;

use super::ast::{Predicate, Spec};
use crate::types::{Action, Point};

/// A finite trajectory: a non-empty state sequence plus the actions taken
/// between consecutive states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Point>,
    actions: Vec<Action>,
}

impl Trajectory {
    pub fn new(states: Vec<Point>, actions: Vec<Action>) -> Self {
        assert!(!states.is_empty(), "trajectory must contain at least one state");
        assert_eq!(actions.len(), states.len() - 1, "need one action per transition");
        Trajectory { states, actions }
    }

    /// Builds a trajectory from states alone, with zero actions in between.
    pub fn from_states(states: Vec<Point>) -> Self {
        let actions = vec![Action::stop(); states.len().saturating_sub(1)];
        Trajectory::new(states, actions)
    }

    pub fn states(&self) -> &[Point] {
        &self.states
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> Point {
        *self.states.last().expect("non-empty")
    }
}

/// Decides whether the trajectory satisfies the specification.
///
/// Satisfaction of `phi1; phi2` quantifies over a split index, so a naive
/// recursion revisits the same (sub-specification, interval) pairs
/// exponentially often; results are memoized per pair instead.
pub fn satisfies_spec(traj: &Trajectory, spec: &Spec) -> bool {
    let mut eval = SpecEval { states: traj.states(), memo: HashMap::new() };
    eval.sat(spec, 0, traj.len() - 1)
}

struct SpecEval<'a> {
    states: &'a [Point],
    // Keyed by sub-specification identity and inclusive state interval.
    memo: HashMap<(usize, usize, usize), bool>,
}

impl SpecEval<'_> {
    fn sat(&mut self, spec: &Spec, lo: usize, hi: usize) -> bool {
        let key = (spec as *const Spec as usize, lo, hi);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = match spec {
            Spec::Achieve(b) => self.states[lo..=hi].iter().any(|&s| b.eval_bool(s)),
            Spec::Ensuring(inner, b) => {
                self.states[lo..=hi].iter().all(|&s| b.eval_bool(s)) && self.sat(inner, lo, hi)
            }
            Spec::Seq(first, second) => {
                // Split strictly before the last state: states lo..=i satisfy
                // the first part and i+1..=hi the second.
                (lo..hi).any(|i| self.sat(first, lo, i) && self.sat(second, i + 1, hi))
            }
            Spec::Choice(a, b) => self.sat(a, lo, hi) || self.sat(b, lo, hi),
        };
        self.memo.insert(key, v);
        v
    }
}

/// Holds at some state of the trajectory.
pub fn eventually(traj: &Trajectory, b: &Predicate) -> bool {
    traj.states().iter().any(|&s| b.eval_bool(s))
}

/// Holds at every state of the trajectory.
pub fn always(traj: &Trajectory, b: &Predicate) -> bool {
    traj.states().iter().all(|&s| b.eval_bool(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_lang::ast::AtomicPredicate;

    fn above(th: f64) -> Predicate {
        Predicate::atom(AtomicPredicate::custom("above", vec![th], move |s| s.y - th))
    }

    fn below(th: f64) -> Predicate {
        Predicate::atom(AtomicPredicate::custom("below", vec![th], move |s| th - s.y))
    }

    fn traj(ys: &[f64]) -> Trajectory {
        Trajectory::from_states(ys.iter().map(|&y| Point::new(0.0, y)).collect())
    }

    /// Direct recursive evaluation of the satisfaction clauses, used as an
    /// independent oracle for the memoized evaluator.
    fn naive(states: &[Point], spec: &Spec) -> bool {
        match spec {
            Spec::Achieve(b) => states.iter().any(|&s| b.eval_bool(s)),
            Spec::Ensuring(inner, b) => {
                naive(states, inner) && states.iter().all(|&s| b.eval_bool(s))
            }
            Spec::Seq(first, second) => (0..states.len() - 1)
                .any(|i| naive(&states[..=i], first) && naive(&states[i + 1..], second)),
            Spec::Choice(a, b) => naive(states, a) || naive(states, b),
        }
    }

    #[test]
    fn achieve_on_single_state() {
        let t = traj(&[1.0]);
        assert!(satisfies_spec(&t, &Spec::achieve(above(0.5))));
        assert!(!satisfies_spec(&t, &Spec::achieve(above(1.5))));
    }

    #[test]
    fn seq_needs_a_strict_split() {
        // A length-1 trajectory cannot satisfy any sequence.
        let t = traj(&[1.0]);
        let phi = Spec::seq(Spec::achieve(above(0.0)), Spec::achieve(above(0.0)));
        assert!(!satisfies_spec(&t, &phi));

        let t = traj(&[1.0, 1.0]);
        assert!(satisfies_spec(&t, &phi));
    }

    #[test]
    fn ensuring_checks_every_state() {
        // Middle state breaks the constraint even though the goal is hit.
        let t = traj(&[0.5, 2.0, 0.5]);
        let phi = Spec::ensuring(Spec::achieve(above(0.4)), below(1.0));
        assert!(!satisfies_spec(&t, &phi));

        let t = traj(&[0.5, 0.9, 0.5]);
        assert!(satisfies_spec(&t, &phi));
    }

    #[test]
    fn choice_is_disjunction_and_ensuring_is_conjunction() {
        let t = traj(&[0.2, 0.8]);
        let phi1 = Spec::achieve(above(0.5));
        let phi2 = Spec::achieve(above(5.0));
        assert!(satisfies_spec(&t, &Spec::choice(phi1.clone(), phi2.clone())));
        assert_eq!(
            satisfies_spec(&t, &Spec::choice(phi2.clone(), phi2.clone())),
            satisfies_spec(&t, &phi2),
        );

        // ensuring == operand satisfied AND all states satisfy the predicate.
        let phi = Spec::ensuring(phi1.clone(), below(0.9));
        assert_eq!(
            satisfies_spec(&t, &phi),
            satisfies_spec(&t, &phi1) && t.states().iter().all(|&s| below(0.9).eval_bool(s)),
        );
    }

    #[test]
    fn memoized_matches_naive_on_all_short_trajectories() {
        // All trajectories of length <= 6 over a 4-element state sample.
        let sample = [0.0, 0.6, 1.2, 1.8];
        let specs = vec![
            Spec::seq(Spec::achieve(above(1.0)), Spec::achieve(below(0.5))),
            Spec::seq(
                Spec::seq(Spec::achieve(above(0.4)), Spec::achieve(above(1.5))),
                Spec::achieve(below(0.3)),
            ),
            Spec::ensuring(
                Spec::seq(Spec::achieve(above(1.0)), Spec::achieve(below(0.5))),
                below(1.5),
            ),
            Spec::choice(
                Spec::seq(Spec::achieve(above(1.0)), Spec::achieve(above(1.0))),
                Spec::achieve(below(0.2)),
            ),
        ];
        let mut cases = 0usize;
        for len in 1..=6usize {
            let mut idx = vec![0usize; len];
            loop {
                let t = traj(&idx.iter().map(|&i| sample[i]).collect::<Vec<_>>());
                for spec in &specs {
                    assert_eq!(satisfies_spec(&t, spec), naive(t.states(), spec));
                    cases += 1;
                }
                // Next tuple in lexicographic order.
                let mut k = len;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < sample.len() {
                        break;
                    }
                    idx[k] = 0;
                }
                if idx.iter().all(|&i| i == 0) {
                    break;
                }
            }
        }
        assert!(cases > 4 * 4096);
    }

    #[test]
    fn hand_evaluated_ensuring_seq_case() {
        // Three states; the middle one violates the constraint, the last hits
        // the goal. Evaluating the clauses by hand gives false.
        let t = traj(&[0.0, 2.0, 1.0]);
        let phi = Spec::ensuring(Spec::achieve(above(0.9)), below(1.5));
        assert!(!satisfies_spec(&t, &phi));
    }
}
