//! Inductive construction of the abstract graph of a specification.

use std::collections::BTreeMap;

use super::{AbstractGraph, GraphBuilder, SafeSet};
use crate::spec_lang::{Predicate, Spec};

/// Compiles a specification into its abstract graph.
///
/// The construction is inductive over the four operators:
///
/// * `achieve b` — two vertices and one unrestricted edge into the final
///   vertex whose region is the satisfaction set of `b`.
/// * `phi ensuring b` — same structure as the graph of `phi`, with every
///   non-initial region, every edge safe set and every terminal set
///   strengthened by `b`.
/// * `phi1; phi2` — disjoint union with the second initial vertex removed;
///   each final vertex of the first graph is wired to the entry neighbors of
///   the second, and those bridge edges carry the two-phase concatenation of
///   the first graph's terminal set with the entry edge's safe set.
/// * `phi1 or phi2` — disjoint union sharing a fresh initial vertex that
///   inherits the entry edges of both operands.
///
/// Vertex ids are reassigned in deterministic topological order (initial
/// vertex is always 0), so equal specifications compile to byte-identical
/// graphs.
pub fn compile(spec: &Spec) -> AbstractGraph {
    let sub = build(spec);
    finalize(sub)
}

/// Intermediate graph; the initial vertex is index 0 by construction.
struct Sub {
    beta: Vec<Predicate>,
    edges: Vec<(usize, usize, SafeSet)>,
    finals: Vec<usize>,
    term: BTreeMap<usize, Predicate>,
}

impl Sub {
    fn len(&self) -> usize {
        self.beta.len()
    }

    /// Predicate of an entry edge's safe set. Entry edges are always of
    /// `always` shape; a concatenation here would break the two-phase bound
    /// on bridge edges, so it is a construction invariant.
    fn entry_safe_predicate(safe: &SafeSet) -> &Predicate {
        match safe {
            SafeSet::Always(b) => b,
            SafeSet::Concat(..) => {
                unreachable!("entry edges carry always-shaped safe sets")
            }
        }
    }
}

fn build(spec: &Spec) -> Sub {
    match spec {
        Spec::Achieve(b) => Sub {
            beta: vec![Predicate::always_true(), b.clone()],
            edges: vec![(0, 1, SafeSet::unrestricted())],
            finals: vec![1],
            term: BTreeMap::from([(1, Predicate::always_true())]),
        },
        Spec::Ensuring(inner, b) => {
            let mut sub = build(inner);
            for beta in sub.beta.iter_mut().skip(1) {
                *beta = beta.and_with(b);
            }
            for (_, _, safe) in sub.edges.iter_mut() {
                *safe = safe.intersect(b);
            }
            for term in sub.term.values_mut() {
                *term = term.and_with(b);
            }
            sub
        }
        Spec::Seq(first, second) => {
            let s1 = build(first);
            let s2 = build(second);
            // Vertices: all of s1, then s2 without its initial vertex.
            let map2 = |v: usize| s1.len() + v - 1;
            let mut beta = s1.beta.clone();
            beta.extend(s2.beta.iter().skip(1).cloned());

            let mut edges = s1.edges.clone();
            for (u, v, safe) in &s2.edges {
                assert_ne!(*v, 0, "initial vertex has no incoming edges");
                if *u != 0 {
                    edges.push((map2(*u), map2(*v), safe.clone()));
                }
            }
            // Bridge edges: each final of s1 to each entry neighbor of s2.
            for &f in &s1.finals {
                let term1 = &s1.term[&f];
                for (u, v, safe) in &s2.edges {
                    if *u == 0 {
                        let b2 = Sub::entry_safe_predicate(safe);
                        edges.push((f, map2(*v), SafeSet::Concat(term1.clone(), b2.clone())));
                    }
                }
            }

            let finals: Vec<usize> = s2.finals.iter().map(|&f| map2(f)).collect();
            let term = s2.term.iter().map(|(&f, t)| (map2(f), t.clone())).collect();
            Sub { beta, edges, finals, term }
        }
        Spec::Choice(left, right) => {
            let s1 = build(left);
            let s2 = build(right);
            // Fresh initial vertex 0; operand vertices shifted past it.
            let map1 = |v: usize| v; // s1 keeps 1..len1
            let map2 = |v: usize| s1.len() - 1 + v;

            let mut beta = vec![Predicate::always_true()];
            beta.extend(s1.beta.iter().skip(1).cloned());
            beta.extend(s2.beta.iter().skip(1).cloned());

            let mut edges = Vec::new();
            for (sub, map) in [(&s1, &map1 as &dyn Fn(usize) -> usize), (&s2, &map2)] {
                for (u, v, safe) in &sub.edges {
                    assert_ne!(*v, 0, "initial vertex has no incoming edges");
                    let from = if *u == 0 { 0 } else { map(*u) };
                    edges.push((from, map(*v), safe.clone()));
                }
            }

            let mut finals: Vec<usize> = s1.finals.iter().map(|&f| map1(f)).collect();
            finals.extend(s2.finals.iter().map(|&f| map2(f)));
            finals.sort_unstable();
            let mut term: BTreeMap<usize, Predicate> =
                s1.term.iter().map(|(&f, t)| (map1(f), t.clone())).collect();
            term.extend(s2.term.iter().map(|(&f, t)| (map2(f), t.clone())));
            Sub { beta, edges, finals, term }
        }
    }
}

/// Relabels vertices into canonical topological order and validates the
/// result.
fn finalize(sub: Sub) -> AbstractGraph {
    let n = sub.len();
    // Kahn's algorithm with min-id tie-breaking over construction ids.
    let mut indegree = vec![0usize; n];
    for (_, v, _) in &sub.edges {
        indegree[*v] += 1;
    }
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
        (0..n).filter(|&u| indegree[u] == 0).map(std::cmp::Reverse).collect();
    let mut perm = vec![usize::MAX; n];
    let mut next = 0usize;
    while let Some(std::cmp::Reverse(u)) = ready.pop() {
        perm[u] = next;
        next += 1;
        for (f, t, _) in &sub.edges {
            if *f == u {
                indegree[*t] -= 1;
                if indegree[*t] == 0 {
                    ready.push(std::cmp::Reverse(*t));
                }
            }
        }
    }
    assert_eq!(next, n, "compiled graph is acyclic by construction");
    assert_eq!(perm[0], 0, "initial vertex is the unique source");

    let mut builder = GraphBuilder::new();
    let mut beta_new: Vec<Option<Predicate>> = vec![None; n];
    for (old, b) in sub.beta.into_iter().enumerate() {
        beta_new[perm[old]] = Some(b);
    }
    for b in beta_new {
        builder.add_vertex(b.expect("every vertex relabeled"));
    }
    for (u, v, safe) in sub.edges {
        builder.add_edge(perm[u], perm[v], safe);
    }
    builder.set_initial(0);
    for (f, t) in sub.term {
        debug_assert!(perm[f] != 0, "initial vertex is never final");
        builder.add_final(perm[f], t);
    }
    builder.build().expect("compiled graph is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_lang::AtomicPredicate;

    fn patom(name: &str, r: f64, c: f64) -> Predicate {
        Predicate::Atom(AtomicPredicate::custom(name, vec![r, c], |_| 0.0))
    }

    fn reach(r: f64, c: f64) -> Predicate {
        patom("reach", r, c)
    }

    fn avoid(r: f64, c: f64) -> Predicate {
        patom("avoid", r, c)
    }

    #[test]
    fn achieve_compiles_to_a_single_edge() {
        let g = compile(&Spec::achieve(reach(1.0, 1.0)));
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.finals(), &[1]);
        assert_eq!(g.beta(1), &reach(1.0, 1.0));
        assert!(g.beta(0).is_trivially_true());
        assert_eq!(g.edge(0).safe, SafeSet::unrestricted());
        assert!(g.terminal_predicate(1).unwrap().is_trivially_true());
    }

    #[test]
    fn choice_then_seq_gives_the_diamond_graph() {
        // ((reach A or reach B); reach C) ensuring avoid O
        let phi = Spec::ensuring(
            Spec::seq(
                Spec::choice(Spec::achieve(reach(2.0, 0.0)), Spec::achieve(reach(0.0, 2.0))),
                Spec::achieve(reach(2.0, 2.0)),
            ),
            avoid(1.0, 0.0),
        );
        let g = compile(&phi);
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 4);
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.from, e.to)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert_eq!(g.finals(), &[3]);
        assert_eq!(g.beta(1), &reach(2.0, 0.0));
        assert_eq!(g.beta(2), &reach(0.0, 2.0));
        assert_eq!(g.beta(3), &reach(2.0, 2.0));
        // Entry edges stay always-shaped; bridge edges become two-phase.
        assert_eq!(g.edge(0).safe, SafeSet::Always(avoid(1.0, 0.0)));
        assert_eq!(g.edge(1).safe, SafeSet::Always(avoid(1.0, 0.0)));
        assert_eq!(g.edge(2).safe, SafeSet::Concat(avoid(1.0, 0.0), avoid(1.0, 0.0)));
        assert_eq!(g.edge(3).safe, SafeSet::Concat(avoid(1.0, 0.0), avoid(1.0, 0.0)));
        assert_eq!(g.terminal_predicate(3), Some(&avoid(1.0, 0.0)));
    }

    #[test]
    fn ensuring_only_strengthens_predicates() {
        let phi = Spec::seq(
            Spec::choice(Spec::achieve(reach(2.0, 0.0)), Spec::achieve(reach(0.0, 2.0))),
            Spec::achieve(reach(2.0, 2.0)),
        );
        let plain = compile(&phi);
        let strengthened = compile(&Spec::ensuring(phi, avoid(1.0, 0.0)));
        assert_eq!(plain.vertex_count(), strengthened.vertex_count());
        assert_eq!(plain.edge_count(), strengthened.edge_count());
        for (a, b) in plain.edges().iter().zip(strengthened.edges()) {
            assert_eq!((a.from, a.to), (b.from, b.to));
        }
        assert_eq!(plain.finals(), strengthened.finals());
    }

    #[test]
    fn initial_vertex_is_never_final_and_has_no_incoming_edges() {
        let specs = [
            Spec::achieve(reach(0.0, 0.0)),
            Spec::seq(Spec::achieve(reach(0.0, 1.0)), Spec::achieve(reach(1.0, 0.0))),
            Spec::choice(Spec::achieve(reach(0.0, 1.0)), Spec::achieve(reach(1.0, 0.0))),
            Spec::ensuring(Spec::achieve(reach(0.0, 1.0)), avoid(1.0, 1.0)),
        ];
        for spec in &specs {
            let g = compile(spec);
            assert!(!g.is_final(g.initial()));
            assert!(g.edges().iter().all(|e| e.to != g.initial()));
        }
    }

    #[test]
    fn vertex_bound_holds() {
        let phi = Spec::seq(
            Spec::choice(Spec::achieve(reach(0.0, 1.0)), Spec::achieve(reach(1.0, 0.0))),
            Spec::ensuring(Spec::achieve(reach(1.0, 1.0)), avoid(0.0, 0.0)),
        );
        let g = compile(&phi);
        assert!(g.vertex_count() <= phi.size() + 1);
    }
}
