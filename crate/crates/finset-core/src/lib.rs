//! Decision procedure for the quantifier-free theory of finite sets with
//! cardinality constraints.
//!
//! The solver decides conjunctions of constraints over three sorts — elements,
//! finite sets of elements, and natural-number cardinalities — built from
//! union, intersection, difference, singletons, the empty set, membership,
//! (dis)equalities, and linear arithmetic over `card(·)` terms. It answers
//! `sat` with a checkable finite model or `unsat`.
//!
//! Pipeline:
//!
//! 1. [`frontend`] parses an SMT-LIB-style script into [`ast`] constraints.
//! 2. [`normalize`] flattens them into the restricted shapes the calculus
//!    expects (composite arguments are variables, each set variable occurs in
//!    at most one composite term).
//! 3. [`engine`] runs a depth-first tableau search: membership propagation and
//!    splitting ([`setrules`]), lazy construction of a Venn-region graph whose
//!    leaves partition every relevant set ([`cardgraph`]), and an exact
//!    integer-linear-arithmetic check over the cardinality constraints the
//!    graph induces ([`lia`]). Element equalities are tracked by [`eqengine`].
//! 4. On `sat` the engine assembles a model from the saturated state and
//!    validates it against the original constraints before answering.
//!
//! [`oracle`] is an independent brute-force model enumerator used by the test
//! suite to cross-check verdicts, and [`gen`] provides deterministic problem
//! generators shared by tests and benchmarks.

pub mod ast;
pub mod cardgraph;
pub mod engine;
pub mod eqengine;
pub mod frontend;
pub mod gen;
pub mod lia;
pub mod normalize;
pub mod oracle;
pub mod setrules;

pub use ast::{CardAtom, Constraint, Ctx, Rel, Sort, Sym, TermId};
pub use engine::{Model, Outcome, Solver, SolverOptions, Stats};
pub use normalize::FlatProblem;
