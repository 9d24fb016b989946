//! Abstract syntax for task specifications.
//!
//! A specification is built from predicates over states, which in turn are
//! built from atomic predicates. Every atom carries both a Boolean meaning and
//! a quantitative one, tied together by the sign rule: the atom holds at `s`
//! exactly when its quantitative value at `s` is strictly positive.

use std::fmt;
use std::sync::Arc;

use crate::types::Point;

/// Quantitative evaluator of an atomic predicate.
#[derive(Clone)]
pub enum AtomKind {
    /// Holds everywhere; quantitative value 1.
    True,
    /// Distance-to-target atom: `1 - |s - center| / scale`.
    ///
    /// Positive strictly inside the disc of radius `scale` around `center`.
    Reach { center: Point, scale: f64 },
    /// Clearance atom: `(|s - center| - radius) / scale`.
    ///
    /// Positive strictly outside the disc of radius `radius` around `center`.
    Avoid { center: Point, radius: f64, scale: f64 },
    /// Arbitrary user-supplied quantitative evaluator.
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

/// An atomic predicate: a named, evaluable formula over states.
///
/// `name` and `args` record how the atom was written; they drive
/// pretty-printing and structural equality. The `kind` carries the semantics.
#[derive(Clone)]
pub struct AtomicPredicate {
    name: String,
    args: Vec<f64>,
    kind: AtomKind,
}

impl AtomicPredicate {
    pub fn new(name: impl Into<String>, args: Vec<f64>, kind: AtomKind) -> Self {
        AtomicPredicate { name: name.into(), args, kind }
    }

    /// The atom that is true at every state.
    pub fn always_true() -> Self {
        AtomicPredicate { name: "true".into(), args: Vec::new(), kind: AtomKind::True }
    }

    pub fn custom(
        name: impl Into<String>,
        args: Vec<f64>,
        eval: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AtomicPredicate::new(name, args, AtomKind::Custom(Arc::new(eval)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[f64] {
        &self.args
    }

    pub fn eval_quant(&self, s: Point) -> f64 {
        match &self.kind {
            AtomKind::True => 1.0,
            AtomKind::Reach { center, scale } => 1.0 - s.dist(*center) / scale,
            AtomKind::Avoid { center, radius, scale } => (s.dist(*center) - radius) / scale,
            AtomKind::Custom(f) => f(s),
        }
    }

    pub fn eval_bool(&self, s: Point) -> bool {
        self.eval_quant(s) > 0.0
    }

    pub fn is_true_atom(&self) -> bool {
        matches!(self.kind, AtomKind::True)
    }
}

impl PartialEq for AtomicPredicate {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.args == other.args
    }
}

impl fmt::Debug for AtomicPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Atom({self})")
    }
}

impl fmt::Display for AtomicPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() && self.is_true_atom() {
            return write!(f, "true");
        }
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write_num(f, *a)?;
        }
        write!(f, ")")
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, a: f64) -> fmt::Result {
    if a.fract() == 0.0 && a.abs() < 1e15 {
        write!(f, "{}", a as i64)
    } else {
        write!(f, "{a}")
    }
}

/// A predicate: atoms combined with conjunction and disjunction.
#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    Atom(AtomicPredicate),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn atom(a: AtomicPredicate) -> Self {
        Predicate::Atom(a)
    }

    pub fn always_true() -> Self {
        Predicate::Atom(AtomicPredicate::always_true())
    }

    pub fn and(a: Predicate, b: Predicate) -> Self {
        Predicate::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Predicate, b: Predicate) -> Self {
        Predicate::Or(Box::new(a), Box::new(b))
    }

    /// Conjunction that absorbs the trivially-true atom, so strengthening a
    /// formula that never constrained anything does not pile up `true and`s.
    pub fn and_with(&self, b: &Predicate) -> Predicate {
        if self.is_trivially_true() {
            b.clone()
        } else if b.is_trivially_true() {
            self.clone()
        } else {
            Predicate::and(self.clone(), b.clone())
        }
    }

    pub fn is_trivially_true(&self) -> bool {
        matches!(self, Predicate::Atom(a) if a.is_true_atom())
    }

    /// Quantitative value: min over conjunctions, max over disjunctions.
    pub fn eval_quant(&self, s: Point) -> f64 {
        match self {
            Predicate::Atom(a) => a.eval_quant(s),
            Predicate::And(l, r) => l.eval_quant(s).min(r.eval_quant(s)),
            Predicate::Or(l, r) => l.eval_quant(s).max(r.eval_quant(s)),
        }
    }

    /// Boolean value, evaluated by Boolean recursion over the tree.
    ///
    /// Agrees with `eval_quant(s) > 0.0` at every state; the property tests
    /// check the two routes against each other.
    pub fn eval_bool(&self, s: Point) -> bool {
        match self {
            Predicate::Atom(a) => a.eval_bool(s),
            Predicate::And(l, r) => l.eval_bool(s) && r.eval_bool(s),
            Predicate::Or(l, r) => l.eval_bool(s) || r.eval_bool(s),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Atom(a) => write!(f, "{a}"),
            Predicate::And(l, r) => write!(f, "({l} and {r})"),
            Predicate::Or(l, r) => write!(f, "({l} or {r})"),
        }
    }
}

/// A task specification.
#[derive(Clone, Debug, PartialEq)]
pub enum Spec {
    /// Eventually reach a state satisfying the predicate.
    Achieve(Predicate),
    /// Satisfy the sub-specification while every state satisfies the predicate.
    Ensuring(Box<Spec>, Predicate),
    /// Satisfy the first sub-specification, then the second.
    Seq(Box<Spec>, Box<Spec>),
    /// Satisfy either sub-specification.
    Choice(Box<Spec>, Box<Spec>),
}

impl Spec {
    pub fn achieve(p: Predicate) -> Self {
        Spec::Achieve(p)
    }

    pub fn ensuring(s: Spec, p: Predicate) -> Self {
        Spec::Ensuring(Box::new(s), p)
    }

    pub fn seq(a: Spec, b: Spec) -> Self {
        Spec::Seq(Box::new(a), Box::new(b))
    }

    pub fn choice(a: Spec, b: Spec) -> Self {
        Spec::Choice(Box::new(a), Box::new(b))
    }

    /// Number of operators (`achieve`, `ensuring`, `;`, `or`) in the tree.
    pub fn size(&self) -> usize {
        match self {
            Spec::Achieve(_) => 1,
            Spec::Ensuring(s, _) => 1 + s.size(),
            Spec::Seq(a, b) | Spec::Choice(a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl fmt::Display for Spec {
    /// Prints concrete syntax that parses back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spec::Achieve(p) => match p {
                Predicate::Atom(_) => write!(f, "{p}"),
                // Composite predicates self-parenthesize, and the explicit
                // keyword keeps a top-level `or` inside the predicate.
                _ => write!(f, "achieve {p}"),
            },
            Spec::Ensuring(s, p) => {
                match **s {
                    Spec::Seq(..) | Spec::Choice(..) => write!(f, "({s}) ensuring {p}"),
                    _ => write!(f, "{s} ensuring {p}"),
                }
            }
            Spec::Seq(a, b) => {
                match **a {
                    Spec::Seq(..) | Spec::Choice(..) => write!(f, "({a})")?,
                    _ => write!(f, "{a}")?,
                }
                write!(f, "; ")?;
                match **b {
                    Spec::Choice(..) => write!(f, "({b})"),
                    _ => write!(f, "{b}"),
                }
            }
            Spec::Choice(a, b) => {
                write!(f, "{a} or ")?;
                match **b {
                    Spec::Choice(..) => write!(f, "({b})"),
                    _ => write!(f, "{b}"),
                }
            }
        }
    }
}
