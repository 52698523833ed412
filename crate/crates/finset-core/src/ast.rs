//! Sorted terms and constraints of the finite-set language.
//!
//! The language has three sorts: `Element` (an uninterpreted countably
//! infinite domain), `Set` (finite sets of elements), and `Card` (natural
//! numbers, surfaced as `Int` in the concrete syntax). Element- and
//! card-sorted terms are always plain variables, so only set terms need a
//! tree representation. Set terms are hash-consed inside a [`Ctx`], which
//! makes structural equality an id comparison; union, intersection and
//! difference are deliberately *not* normalized modulo commutativity or
//! idempotence, because the calculus distinguishes syntactic occurrences.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// The three sorts of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Element,
    Set,
    Card,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Element => write!(f, "Element"),
            Sort::Set => write!(f, "(Set Element)"),
            Sort::Card => write!(f, "Int"),
        }
    }
}

/// Interned variable. The index is dense and reflects declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u32);

impl Sym {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Hash-consed set term. Two ids are equal iff the terms are structurally
/// identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One node of a set term. Composite children are arbitrary set terms; the
/// flat input form restricts them to variables, graph-internal terms do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermNode {
    Var(Sym),
    Empty,
    Singleton(Sym),
    Union(TermId, TermId),
    Inter(TermId, TermId),
    Diff(TermId, TermId),
}

/// Relation of a linear cardinality atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Ge,
}

/// Linear cardinality atom `Σ coeffᵢ·varᵢ REL rhs`, variables over ℕ.
///
/// `<=` and `>` from the surface syntax are rewritten into `Lt`/`Ge` at parse
/// time, so these four relations are the only ones that reach the solver.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CardAtom {
    /// Coefficient/variable pairs, sorted by variable, combined, no zeros.
    pub lhs: Vec<(i64, Sym)>,
    pub rel: Rel,
    pub rhs: i64,
}

impl CardAtom {
    /// Builds an atom in canonical form: like terms combined, summands sorted
    /// by variable, zero coefficients dropped.
    pub fn new(terms: impl IntoIterator<Item = (i64, Sym)>, rel: Rel, rhs: i64) -> CardAtom {
        let mut combined: HashMap<Sym, i64> = HashMap::new();
        for (c, v) in terms {
            *combined.entry(v).or_insert(0) += c;
        }
        let mut lhs: Vec<(i64, Sym)> = combined
            .into_iter()
            .filter(|&(_, c)| c != 0)
            .map(|(v, c)| (c, v))
            .collect();
        lhs.sort_by_key(|&(_, v)| v);
        CardAtom { lhs, rel, rhs }
    }

    /// Convenience: `var REL rhs`.
    pub fn simple(var: Sym, rel: Rel, rhs: i64) -> CardAtom {
        CardAtom::new([(1, var)], rel, rhs)
    }

    /// The variables of the atom, in canonical (sorted) order.
    pub fn vars(&self) -> impl Iterator<Item = Sym> + '_ {
        self.lhs.iter().map(|&(_, v)| v)
    }
}

/// A constraint of the input and solver language.
///
/// `CardOf(c, s)` states `c = card(s)`; it is introduced when purifying
/// `card` applications and ties an arithmetic variable to a set term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constraint {
    SetEq(TermId, TermId),
    SetNeq(TermId, TermId),
    Member(Sym, TermId),
    NotMember(Sym, TermId),
    CardOf(Sym, TermId),
    ElemEq(Sym, Sym),
    ElemNeq(Sym, Sym),
    Arith(CardAtom),
}

/// Errors from term construction and symbol management.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AstError {
    #[error("duplicate declaration of `{0}`")]
    DuplicateName(String),
    #[error("{op} expects a {expected}-sorted variable, got `{name}` of sort {got}")]
    SortError {
        op: &'static str,
        expected: Sort,
        got: Sort,
        name: String,
    },
}

/// Symbol table, hash-consed term store, and fresh-name generation.
///
/// Fresh variables use the reserved `__` prefix (`__f<n>` for flattening and
/// witness variables, `__c<n>` for cardinality variables); the parser rejects
/// user symbols starting with `__`, so freshness is guaranteed by prefix.
#[derive(Debug, Clone)]
pub struct Ctx {
    names: Vec<(String, Sort)>,
    by_name: HashMap<String, Sym>,
    nodes: Vec<TermNode>,
    node_ids: HashMap<TermNode, TermId>,
    empty_id: TermId,
    fresh_counter: u32,
    card_vars: HashMap<TermId, Sym>,
    card_var_list: Vec<(Sym, TermId)>,
}

impl Default for Ctx {
    fn default() -> Ctx {
        Ctx::new()
    }
}

impl Ctx {
    pub fn new() -> Ctx {
        let mut ctx = Ctx {
            names: Vec::new(),
            by_name: HashMap::new(),
            nodes: Vec::new(),
            node_ids: HashMap::new(),
            empty_id: TermId(0),
            fresh_counter: 0,
            card_vars: HashMap::new(),
            card_var_list: Vec::new(),
        };
        ctx.empty_id = ctx.intern(TermNode::Empty);
        ctx
    }

    /// Declares a named variable of the given sort.
    pub fn declare(&mut self, name: &str, sort: Sort) -> Result<Sym, AstError> {
        if self.by_name.contains_key(name) {
            return Err(AstError::DuplicateName(name.to_string()));
        }
        let sym = Sym(self.names.len() as u32);
        self.names.push((name.to_string(), sort));
        self.by_name.insert(name.to_string(), sym);
        Ok(sym)
    }

    /// Allocates a fresh variable `__f<n>` of the given sort.
    pub fn fresh(&mut self, sort: Sort) -> Sym {
        loop {
            let name = format!("__f{}", self.fresh_counter);
            self.fresh_counter += 1;
            if !self.by_name.contains_key(&name) {
                return self.declare(&name, sort).expect("fresh name collision");
            }
        }
    }

    pub fn lookup(&self, name: &str) -> Option<Sym> {
        self.by_name.get(name).copied()
    }

    pub fn sym_name(&self, sym: Sym) -> &str {
        &self.names[sym.index()].0
    }

    pub fn sym_sort(&self, sym: Sym) -> Sort {
        self.names[sym.index()].1
    }

    pub fn sym_count(&self) -> usize {
        self.names.len()
    }

    /// All symbols in declaration order.
    pub fn syms(&self) -> impl Iterator<Item = Sym> {
        (0..self.names.len() as u32).map(Sym)
    }

    fn intern(&mut self, node: TermNode) -> TermId {
        if let Some(&id) = self.node_ids.get(&node) {
            return id;
        }
        let id = TermId(self.nodes.len() as u32);
        self.nodes.push(node);
        self.node_ids.insert(node, id);
        id
    }

    /// A set variable as a term. Errors if the symbol is not set-sorted.
    pub fn var(&mut self, sym: Sym) -> Result<TermId, AstError> {
        let got = self.sym_sort(sym);
        if got != Sort::Set {
            return Err(AstError::SortError {
                op: "set variable",
                expected: Sort::Set,
                got,
                name: self.sym_name(sym).to_string(),
            });
        }
        Ok(self.intern(TermNode::Var(sym)))
    }

    pub fn empty(&self) -> TermId {
        self.empty_id
    }

    /// `{x}` for an element variable `x`.
    pub fn singleton(&mut self, sym: Sym) -> Result<TermId, AstError> {
        let got = self.sym_sort(sym);
        if got != Sort::Element {
            return Err(AstError::SortError {
                op: "singleton",
                expected: Sort::Element,
                got,
                name: self.sym_name(sym).to_string(),
            });
        }
        Ok(self.intern(TermNode::Singleton(sym)))
    }

    pub fn union(&mut self, a: TermId, b: TermId) -> TermId {
        self.intern(TermNode::Union(a, b))
    }

    pub fn inter(&mut self, a: TermId, b: TermId) -> TermId {
        self.intern(TermNode::Inter(a, b))
    }

    pub fn diff(&mut self, a: TermId, b: TermId) -> TermId {
        self.intern(TermNode::Diff(a, b))
    }

    pub fn node(&self, id: TermId) -> TermNode {
        self.nodes[id.index()]
    }

    /// The unique cardinality variable `__c<k>` of a set term. Stable and
    /// injective: repeated calls return the same symbol, distinct terms get
    /// distinct symbols, and the reserved prefix keeps the name disjoint from
    /// user variables.
    pub fn card_var_of(&mut self, term: TermId) -> Sym {
        if let Some(&sym) = self.card_vars.get(&term) {
            return sym;
        }
        let name = format!("__c{}", self.card_var_list.len());
        let sym = self
            .declare(&name, Sort::Card)
            .expect("card var name collision");
        self.card_vars.insert(term, sym);
        self.card_var_list.push((sym, term));
        sym
    }

    /// `(sym, term)` pairs allocated by [`Ctx::card_var_of`], in first-call
    /// order.
    pub fn card_var_list(&self) -> &[(Sym, TermId)] {
        &self.card_var_list
    }

    /// The term a cardinality variable was allocated for, if any.
    pub fn card_var_term(&self, sym: Sym) -> Option<TermId> {
        self.card_var_list
            .iter()
            .find(|&&(s, _)| s == sym)
            .map(|&(_, t)| t)
    }

    /// Pushes `term` and all its subterms (preorder, possibly with
    /// duplicates) onto `out`.
    pub fn collect_subterms(&self, term: TermId, out: &mut Vec<TermId>) {
        out.push(term);
        match self.node(term) {
            TermNode::Var(_) | TermNode::Empty | TermNode::Singleton(_) => {}
            TermNode::Union(a, b) | TermNode::Inter(a, b) | TermNode::Diff(a, b) => {
                self.collect_subterms(a, out);
                self.collect_subterms(b, out);
            }
        }
    }

    /// Element variables occurring in a set term (singleton arguments).
    pub fn elem_vars_of_term(&self, term: TermId, out: &mut BTreeSet<Sym>) {
        match self.node(term) {
            TermNode::Var(_) | TermNode::Empty => {}
            TermNode::Singleton(x) => {
                out.insert(x);
            }
            TermNode::Union(a, b) | TermNode::Inter(a, b) | TermNode::Diff(a, b) => {
                self.elem_vars_of_term(a, out);
                self.elem_vars_of_term(b, out);
            }
        }
    }

    /// Set variables occurring in a set term.
    pub fn set_vars_of_term(&self, term: TermId, out: &mut BTreeSet<Sym>) {
        match self.node(term) {
            TermNode::Var(v) => {
                out.insert(v);
            }
            TermNode::Empty | TermNode::Singleton(_) => {}
            TermNode::Union(a, b) | TermNode::Inter(a, b) | TermNode::Diff(a, b) => {
                self.set_vars_of_term(a, out);
                self.set_vars_of_term(b, out);
            }
        }
    }

    /// All variables occurring in a constraint.
    pub fn free_vars(&self, c: &Constraint) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        let term = |t: TermId, out: &mut BTreeSet<Sym>| {
            self.set_vars_of_term(t, out);
            self.elem_vars_of_term(t, out);
        };
        match c {
            Constraint::SetEq(s, t) | Constraint::SetNeq(s, t) => {
                term(*s, &mut out);
                term(*t, &mut out);
            }
            Constraint::Member(x, s) | Constraint::NotMember(x, s) => {
                out.insert(*x);
                term(*s, &mut out);
            }
            Constraint::CardOf(c, s) => {
                out.insert(*c);
                term(*s, &mut out);
            }
            Constraint::ElemEq(x, y) | Constraint::ElemNeq(x, y) => {
                out.insert(*x);
                out.insert(*y);
            }
            Constraint::Arith(a) => out.extend(a.vars()),
        }
        out
    }

    /// SMT-style text of a set term, e.g. `(union A (inter B C))`.
    pub fn term_text(&self, term: TermId) -> String {
        match self.node(term) {
            TermNode::Var(v) => self.sym_name(v).to_string(),
            TermNode::Empty => "emptyset".to_string(),
            TermNode::Singleton(x) => format!("(singleton {})", self.sym_name(x)),
            TermNode::Union(a, b) => {
                format!("(union {} {})", self.term_text(a), self.term_text(b))
            }
            TermNode::Inter(a, b) => {
                format!("(inter {} {})", self.term_text(a), self.term_text(b))
            }
            TermNode::Diff(a, b) => {
                format!("(setminus {} {})", self.term_text(a), self.term_text(b))
            }
        }
    }

    /// Human-readable text of a constraint, mainly for diagnostics.
    pub fn constraint_text(&self, c: &Constraint) -> String {
        match c {
            Constraint::SetEq(s, t) => format!("(= {} {})", self.term_text(*s), self.term_text(*t)),
            Constraint::SetNeq(s, t) => {
                format!("(not (= {} {}))", self.term_text(*s), self.term_text(*t))
            }
            Constraint::Member(x, s) => {
                format!("(member {} {})", self.sym_name(*x), self.term_text(*s))
            }
            Constraint::NotMember(x, s) => {
                format!("(not (member {} {}))", self.sym_name(*x), self.term_text(*s))
            }
            Constraint::CardOf(c, s) => {
                format!("(= {} (card {}))", self.sym_name(*c), self.term_text(*s))
            }
            Constraint::ElemEq(x, y) => {
                format!("(= {} {})", self.sym_name(*x), self.sym_name(*y))
            }
            Constraint::ElemNeq(x, y) => {
                format!("(not (= {} {}))", self.sym_name(*x), self.sym_name(*y))
            }
            Constraint::Arith(a) => {
                let mut s = String::new();
                let rel = match a.rel {
                    Rel::Eq => "=",
                    Rel::Ne => "distinct",
                    Rel::Lt => "<",
                    Rel::Ge => ">=",
                };
                s.push_str(&format!("({rel} (+"));
                for (c, v) in &a.lhs {
                    s.push_str(&format!(" (* {} {})", c, self.sym_name(*v)));
                }
                s.push_str(&format!(") {})", a.rhs));
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx3() -> (Ctx, Sym, Sym, Sym) {
        let mut ctx = Ctx::new();
        let s = ctx.declare("S", Sort::Set).unwrap();
        let t = ctx.declare("T", Sort::Set).unwrap();
        let x = ctx.declare("x", Sort::Element).unwrap();
        (ctx, s, t, x)
    }

    #[test]
    fn hash_consing_is_syntactic() {
        let (mut ctx, s, t, _) = ctx3();
        let vs = ctx.var(s).unwrap();
        let vt = ctx.var(t).unwrap();
        let a = ctx.union(vs, vt);
        let b = ctx.union(vs, vt);
        let c = ctx.union(vt, vs);
        assert_eq!(a, b);
        assert_ne!(a, c, "union is not commutative syntactically");
    }

    #[test]
    fn sort_errors_name_the_offender() {
        let (mut ctx, s, _, x) = ctx3();
        let err = ctx.var(x).unwrap_err();
        assert!(matches!(err, AstError::SortError { .. }));
        assert!(err.to_string().contains('x'));
        let err = ctx.singleton(s).unwrap_err();
        assert!(err.to_string().contains('S'));
        // Well-sorted constructions succeed.
        assert!(ctx.singleton(x).is_ok());
        assert!(ctx.var(s).is_ok());
    }

    #[test]
    fn duplicate_declaration_rejected() {
        let mut ctx = Ctx::new();
        ctx.declare("S", Sort::Set).unwrap();
        assert_eq!(
            ctx.declare("S", Sort::Element),
            Err(AstError::DuplicateName("S".into()))
        );
    }

    #[test]
    fn card_var_is_stable_and_reserved() {
        let (mut ctx, s, t, _) = ctx3();
        let vs = ctx.var(s).unwrap();
        let vt = ctx.var(t).unwrap();
        let c1 = ctx.card_var_of(vs);
        let c2 = ctx.card_var_of(vs);
        assert_eq!(c1, c2, "same term, same variable");
        let c3 = ctx.card_var_of(vt);
        assert_ne!(c1, c3, "distinct terms, distinct variables");
        let it = ctx.inter(vt, vs);
        let c4 = ctx.card_var_of(it);
        assert!(ctx.sym_name(c4).starts_with("__"), "outside user namespace");
        assert_eq!(ctx.sym_sort(c4), Sort::Card);
        assert_eq!(ctx.card_var_term(c1), Some(vs));
    }

    #[test]
    fn card_var_injective_over_many_terms() {
        // Build 10_000 distinct terms and check their card variables never
        // collide.
        let mut ctx = Ctx::new();
        let base = ctx.declare("A", Sort::Set).unwrap();
        let mut term = ctx.var(base).unwrap();
        let empty = ctx.empty();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..10_000 {
            term = ctx.union(term, empty);
            assert!(seen.insert(ctx.card_var_of(term)), "collision");
        }
        assert_eq!(seen.len(), 10_000);
    }

    #[test]
    fn free_vars_examples() {
        let (mut ctx, s, t, x) = ctx3();
        let vs = ctx.var(s).unwrap();
        let cs = ctx.card_var_of(vs);
        let vt = ctx.var(t).unwrap();
        let ct = ctx.card_var_of(vt);

        let m = Constraint::Member(x, vs);
        assert_eq!(ctx.free_vars(&m), BTreeSet::from([x, s]));

        let a = Constraint::Arith(CardAtom::new([(1, cs), (1, ct)], Rel::Lt, 10));
        assert_eq!(ctx.free_vars(&a), BTreeSet::from([cs, ct]));

        let empty = ctx.empty();
        let e = Constraint::SetEq(vs, empty);
        assert_eq!(ctx.free_vars(&e), BTreeSet::from([s]));
    }

    #[test]
    fn card_atom_canonical_form() {
        let (mut ctx, s, t, _) = ctx3();
        let vs = ctx.var(s).unwrap();
        let vt = ctx.var(t).unwrap();
        let c = ctx.card_var_of(vs);
        let d = ctx.card_var_of(vt);
        // 2c - 2c + d + d  =>  2d
        let a = CardAtom::new([(2, c), (-2, c), (1, d), (1, d)], Rel::Ge, 0);
        assert_eq!(a.lhs, vec![(2, d)]);
        // Sorted by variable regardless of insertion order.
        let b = CardAtom::new([(1, d), (3, c)], Rel::Eq, 1);
        assert_eq!(b.lhs, vec![(3, c), (1, d)]);
    }

    #[test]
    fn term_text_round_shapes() {
        let (mut ctx, s, t, x) = ctx3();
        let vs = ctx.var(s).unwrap();
        let vt = ctx.var(t).unwrap();
        let sing = ctx.singleton(x).unwrap();
        let u = ctx.union(vs, vt);
        let d = ctx.diff(u, sing);
        assert_eq!(
            ctx.term_text(d),
            "(setminus (union S T) (singleton x))"
        );
        let e = ctx.empty();
        assert_eq!(ctx.term_text(e), "emptyset");
    }
}
