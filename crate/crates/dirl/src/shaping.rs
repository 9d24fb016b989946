//! Shaped per-step rewards for learning a single edge.
//!
//! The per-step reward is `R_step = R_reach + R_safe`: the quantitative value
//! of the edge's target region at the next state, plus a non-positive safety
//! term. For an `always[b]` safe set the safety term is `min(0, b(s'))`. For
//! a two-phase `concat[b ; b']` set, the monitor keeps a flag recording
//! whether `b` has held at every visited state so far; while it has, safety
//! is `min(0, (b or b')(s'))`, and after `b` first breaks it is
//! `min(0, b'(s'))`.

use crate::graph::{achieves_edge, AbstractGraph, EdgeId, GraphError, SafeSet};
use crate::spec_lang::{Predicate, Trajectory};
use crate::types::{Action, Point};

/// Per-rollout shaping state for one edge.
#[derive(Debug, Clone)]
pub struct ShapingMonitor<'a> {
    target: &'a Predicate,
    safe: &'a SafeSet,
    /// Whether the first-phase predicate has held at every visited state.
    psi: bool,
}

impl<'a> ShapingMonitor<'a> {
    pub fn new(g: &'a AbstractGraph, e: EdgeId) -> Self {
        let edge = g.edge(e);
        ShapingMonitor { target: g.beta(edge.to), safe: &edge.safe, psi: true }
    }

    pub fn psi(&self) -> bool {
        self.psi
    }

    fn phase_one(&self) -> &Predicate {
        match self.safe {
            SafeSet::Always(b) => b,
            SafeSet::Concat(b, _) => b,
        }
    }

    /// Reward for the transition `s -> s'`; updates the monitor with the
    /// pre-transition state before the case split.
    pub fn step_reward(&mut self, s: Point, _a: Action, s_next: Point) -> f64 {
        self.psi = self.psi && self.phase_one().eval_bool(s);
        let r_reach = self.target.eval_quant(s_next);
        let r_safe = match self.safe {
            SafeSet::Always(b) => b.eval_quant(s_next).min(0.0),
            SafeSet::Concat(b, b_next) => {
                if self.psi {
                    b.eval_quant(s_next).max(b_next.eval_quant(s_next)).min(0.0)
                } else {
                    b_next.eval_quant(s_next).min(0.0)
                }
            }
        };
        r_reach + r_safe
    }
}

/// Indicator reward: 1 exactly when the trajectory achieves the edge.
///
/// Used for edge-probability estimation and evaluation; training additionally
/// sees the shaped rewards.
pub fn sparse_reward(traj: &Trajectory, e: EdgeId, g: &AbstractGraph) -> Result<f64, GraphError> {
    Ok(if achieves_edge(traj, e, g)?.is_some() { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::spec_lang::AtomicPredicate;

    /// Predicate whose quantitative value is `s.x + offset`.
    fn xoff(name: &str, offset: f64) -> Predicate {
        Predicate::atom(AtomicPredicate::custom(name, vec![offset], move |s| s.x + offset))
    }

    /// Predicate whose quantitative value is `s.y + offset`.
    fn yoff(name: &str, offset: f64) -> Predicate {
        Predicate::atom(AtomicPredicate::custom(name, vec![offset], move |s| s.y + offset))
    }

    fn graph_with(safe: SafeSet, target: Predicate) -> AbstractGraph {
        let mut b = GraphBuilder::new();
        let u0 = b.add_vertex(Predicate::always_true());
        let u1 = b.add_vertex(target);
        b.add_edge(u0, u1, safe);
        b.set_initial(u0);
        b.add_final(u1, Predicate::always_true());
        b.build().unwrap()
    }

    fn at(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn satisfied_safety_is_clipped_to_zero() {
        // target value 0.4 and safety value 0.6 at the next state.
        let g = graph_with(SafeSet::Always(yoff("b", 0.0)), xoff("t", 0.0));
        let mut mon = ShapingMonitor::new(&g, 0);
        let r = mon.step_reward(at(0.0, 1.0), Action::stop(), at(0.4, 0.6));
        assert_eq!(r, 0.4);
    }

    #[test]
    fn violated_safety_subtracts() {
        let g = graph_with(SafeSet::Always(yoff("b", 0.0)), xoff("t", 0.0));
        let mut mon = ShapingMonitor::new(&g, 0);
        let r = mon.step_reward(at(0.0, 1.0), Action::stop(), at(0.4, -0.3));
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn concat_uses_second_phase_after_psi_breaks() {
        // First phase tracks y, second phase tracks y - 1.
        let g = graph_with(SafeSet::Concat(yoff("b", 0.0), yoff("b2", -1.0)), xoff("t", 0.0));
        let mut mon = ShapingMonitor::new(&g, 0);
        // Visit a state with y < 0: the first phase breaks.
        let _ = mon.step_reward(at(0.0, -1.0), Action::stop(), at(0.0, 2.0));
        assert!(!mon.psi());
        // Now only the second phase counts: value (0.8 - 1) = -0.2, target 0.
        let r = mon.step_reward(at(0.0, 2.0), Action::stop(), at(0.0, 0.8));
        assert!((r - (-0.2)).abs() < 1e-12);
    }

    #[test]
    fn concat_uses_the_disjunction_while_psi_holds() {
        let b = yoff("b", 0.0);
        let b2 = yoff("b2", -1.0);
        let g = graph_with(SafeSet::Concat(b.clone(), b2.clone()), xoff("t", -10.0));
        let mut mon = ShapingMonitor::new(&g, 0);
        let (s, s2) = (at(0.0, 1.0), at(0.0, 0.5));
        let r = mon.step_reward(s, Action::stop(), s2);
        assert!(mon.psi());
        // max(b, b2) >= b pointwise, so the two-phase reward dominates the
        // all-states reward computed with the first phase alone.
        let alone = xoff("t", -10.0).eval_quant(s2) + b.eval_quant(s2).min(0.0);
        assert!(r >= alone);
    }

    #[test]
    fn psi_is_monotone_and_safety_never_positive() {
        let g = graph_with(SafeSet::Concat(yoff("b", 0.0), yoff("b2", -1.0)), xoff("t", 0.0));
        let mut mon = ShapingMonitor::new(&g, 0);
        let ys = [1.0, 0.5, -0.4, 2.0, -3.0, 1.0];
        let mut last_psi = mon.psi();
        for w in ys.windows(2) {
            let r = mon.step_reward(at(0.0, w[0]), Action::stop(), at(0.0, w[1]));
            // R_step <= R_reach, i.e. the safety term is non-positive.
            assert!(r <= xoff("t", 0.0).eval_quant(at(0.0, w[1])) + 1e-12);
            assert!(!mon.psi() || last_psi);
            last_psi = mon.psi();
        }
    }

    #[test]
    fn reward_is_monotone_in_the_target_value() {
        let g = graph_with(SafeSet::Always(yoff("b", 0.0)), xoff("t", 0.0));
        // Same safety value at both next states, different target values.
        let mut m1 = ShapingMonitor::new(&g, 0);
        let mut m2 = ShapingMonitor::new(&g, 0);
        let r_hi = m1.step_reward(at(0.0, 1.0), Action::stop(), at(0.9, 1.0));
        let r_lo = m2.step_reward(at(0.0, 1.0), Action::stop(), at(0.1, 1.0));
        assert!(r_hi >= r_lo);
    }

    #[test]
    fn sparse_reward_is_the_achievement_indicator() {
        let g = graph_with(SafeSet::Always(yoff("b", 0.0)), xoff("t", -1.0));
        // Reaches x > 1 with y kept positive.
        let ok = Trajectory::from_states(vec![at(0.0, 1.0), at(0.6, 1.0), at(1.2, 1.0)]);
        assert_eq!(sparse_reward(&ok, 0, &g).unwrap(), 1.0);

        let never = Trajectory::from_states(vec![at(0.0, 1.0), at(0.5, 1.0)]);
        assert_eq!(sparse_reward(&never, 0, &g).unwrap(), 0.0);

        // Target reached only after safety was broken: no reward.
        let broken = Trajectory::from_states(vec![at(0.0, 1.0), at(0.6, -1.0), at(1.2, 1.0)]);
        assert_eq!(sparse_reward(&broken, 0, &g).unwrap(), 0.0);
    }
}
