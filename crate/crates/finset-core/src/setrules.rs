//! Membership rules over set terms, and the literal-closure index they
//! consult.
//!
//! The solver's state stores set literals as asserted; queries about what the
//! state entails go through [`ClosureIndex`], a snapshot structure rebuilt
//! whenever the state changes. The index congruence-closes set equalities
//! (set terms are grouped into classes, with queries keyed by class), and
//! memberships are keyed by the element's class in the element equality
//! engine, so `x in S` together with `S = T` and `x = y` entails `y in T`.
//!
//! Rule scanning is deterministic: terms are visited in their first-seen
//! order, rules for a term in a fixed order, and element classes in dense
//! class-id order. Propagations ([`find_membership_propagation`]) are exhausted
//! before case splits ([`find_membership_split`]) are offered; contradiction checks
//! ([`find_close`]) come before everything. A returned instance always
//! changes the state: conclusions already entailed are filtered out, and an
//! instance with no remaining conclusion is skipped.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::ast::{CardAtom, Constraint, Ctx, Sym, TermId, TermNode};
use crate::eqengine::EqEngine;

/// Names every rule the solver can apply; used for statistics and traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleTag {
    UnionDownI,
    UnionDownII,
    UnionUpI,
    UnionUpII,
    InterDownI,
    InterDownII,
    InterUpI,
    InterUpII,
    DiffDown1,
    DiffDown2,
    DiffDown3,
    DiffUp1,
    DiffUp2,
    DiffUp3,
    Singleton,
    SingleMember,
    SingleNonmember,
    UnionSplit,
    InterSplit,
    DiffSplit,
    SetDisequality,
    EqUnsat,
    SetUnsat,
    EmptyUnsat,
    ArithContradiction,
    GuessEmptySet,
    IntroduceEmptySet,
    IntroduceCard,
    IntroduceEqRight,
    IntroduceEqLeft,
    IntroduceUnion,
    IntroduceInter,
    IntroduceDiff,
    IntroduceSingleton,
    MergeEqI,
    MergeEqII,
    PropagateMinsize,
    MembersArrangement,
    GuessLowerBound,
}

impl RuleTag {
    pub fn name(self) -> &'static str {
        match self {
            RuleTag::UnionDownI => "union-down-1",
            RuleTag::UnionDownII => "union-down-2",
            RuleTag::UnionUpI => "union-up-1",
            RuleTag::UnionUpII => "union-up-2",
            RuleTag::InterDownI => "inter-down-1",
            RuleTag::InterDownII => "inter-down-2",
            RuleTag::InterUpI => "inter-up-1",
            RuleTag::InterUpII => "inter-up-2",
            RuleTag::DiffDown1 => "diff-down-1",
            RuleTag::DiffDown2 => "diff-down-2",
            RuleTag::DiffDown3 => "diff-down-3",
            RuleTag::DiffUp1 => "diff-up-1",
            RuleTag::DiffUp2 => "diff-up-2",
            RuleTag::DiffUp3 => "diff-up-3",
            RuleTag::Singleton => "singleton",
            RuleTag::SingleMember => "single-member",
            RuleTag::SingleNonmember => "single-nonmember",
            RuleTag::UnionSplit => "union-split",
            RuleTag::InterSplit => "inter-split",
            RuleTag::DiffSplit => "diff-split",
            RuleTag::SetDisequality => "set-disequality",
            RuleTag::EqUnsat => "eq-unsat",
            RuleTag::SetUnsat => "set-unsat",
            RuleTag::EmptyUnsat => "empty-unsat",
            RuleTag::ArithContradiction => "arith-contradiction",
            RuleTag::GuessEmptySet => "guess-empty-set",
            RuleTag::IntroduceEmptySet => "introduce-empty-set",
            RuleTag::IntroduceCard => "introduce-card",
            RuleTag::IntroduceEqRight => "introduce-eq-right",
            RuleTag::IntroduceEqLeft => "introduce-eq-left",
            RuleTag::IntroduceUnion => "introduce-union",
            RuleTag::IntroduceInter => "introduce-inter",
            RuleTag::IntroduceDiff => "introduce-diff",
            RuleTag::IntroduceSingleton => "introduce-singleton",
            RuleTag::MergeEqI => "merge-eq-1",
            RuleTag::MergeEqII => "merge-eq-2",
            RuleTag::PropagateMinsize => "propagate-minsize",
            RuleTag::MembersArrangement => "members-arrangement",
            RuleTag::GuessLowerBound => "guess-lower-bound",
        }
    }
}

/// One conclusion of a rule: a set literal, an element literal, or a
/// cardinality atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Concl {
    S(Constraint),
    M(Constraint),
    A(CardAtom),
}

/// What applying a rule does to the state.
#[derive(Debug, Clone)]
pub enum Kind {
    /// The branch is contradictory.
    Close,
    /// Add every conclusion (all are new by construction).
    Propagate(Vec<Concl>),
    /// Case split: try the first alternative, keep the second for backtracking.
    Branch(Vec<Concl>, Vec<Concl>),
    /// Disequality witness split on `s != t`: a fresh element is asserted to
    /// be in exactly one of the two sets; the same witness serves both
    /// branches.
    BranchFreshWitness { s: TermId, t: TermId },
    /// Add a term to the region graph.
    AddNode(TermId),
    /// Merge the regions of two equated terms.
    Merge(TermId, TermId),
}

#[derive(Debug, Clone)]
pub struct RuleInstance {
    pub tag: RuleTag,
    pub kind: Kind,
}

/// Snapshot of the literal closure: set-term classes, memberships keyed by
/// (set class, element class), and set disequalities. Rebuilt after every
/// state change; queries never mutate.
pub struct ClosureIndex {
    pub(crate) term_list: Vec<TermId>,
    pub(crate) term_pos: HashMap<TermId, usize>,
    /// Fully resolved class root (smallest member position) per position.
    pub(crate) root: Vec<usize>,
    pub(crate) members_in: HashMap<usize, BTreeMap<u32, Sym>>,
    pub(crate) members_out: HashMap<usize, BTreeMap<u32, Sym>>,
    pub(crate) set_diseqs: HashSet<(usize, usize)>,
    pub(crate) neq_literals: Vec<(TermId, TermId)>,
    pub(crate) empty_root: usize,
}

impl ClosureIndex {
    /// Builds the index for `terms` (the relevant-term list, which must
    /// contain the empty set and every term of every literal in `s_lits`).
    pub fn build(ctx: &Ctx, terms: &[TermId], s_lits: &[Constraint], eq: &EqEngine) -> Self {
        let term_list = terms.to_vec();
        let term_pos: HashMap<TermId, usize> =
            term_list.iter().enumerate().map(|(i, &t)| (t, i)).collect();

        let mut parent: Vec<usize> = (0..term_list.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for c in s_lits {
            if let Constraint::SetEq(s, t) = c {
                let a = find(&mut parent, term_pos[s]);
                let b = find(&mut parent, term_pos[t]);
                if a != b {
                    // The class root is the smaller position.
                    let (lo, hi) = (a.min(b), a.max(b));
                    parent[hi] = lo;
                }
            }
        }
        let root: Vec<usize> = (0..term_list.len())
            .map(|i| find(&mut parent, i))
            .collect();

        let mut members_in: HashMap<usize, BTreeMap<u32, Sym>> = HashMap::new();
        let mut members_out: HashMap<usize, BTreeMap<u32, Sym>> = HashMap::new();
        let mut set_diseqs = HashSet::new();
        let mut neq_literals = Vec::new();
        for c in s_lits {
            match *c {
                Constraint::Member(x, s) => {
                    let e = eq.root_index(x).expect("membership element is registered");
                    members_in
                        .entry(root[term_pos[&s]])
                        .or_default()
                        .entry(e)
                        .or_insert(x);
                }
                Constraint::NotMember(x, s) => {
                    let e = eq.root_index(x).expect("membership element is registered");
                    members_out
                        .entry(root[term_pos[&s]])
                        .or_default()
                        .entry(e)
                        .or_insert(x);
                }
                Constraint::SetNeq(s, t) => {
                    let a = root[term_pos[&s]];
                    let b = root[term_pos[&t]];
                    set_diseqs.insert((a.min(b), a.max(b)));
                    neq_literals.push((s, t));
                }
                _ => {}
            }
        }

        let empty_pos = term_pos
            .get(&ctx.empty())
            .copied()
            .expect("empty set is a relevant term");
        let empty_root = root[empty_pos];

        ClosureIndex {
            term_list,
            term_pos,
            root,
            members_in,
            members_out,
            set_diseqs,
            neq_literals,
            empty_root,
        }
    }

    pub(crate) fn set_root(&self, t: TermId) -> usize {
        self.root[self.term_pos[&t]]
    }

    fn has_in(&self, set_root: usize, elem_root: u32) -> bool {
        self.members_in
            .get(&set_root)
            .is_some_and(|m| m.contains_key(&elem_root))
    }

    fn has_out(&self, set_root: usize, elem_root: u32) -> bool {
        self.members_out
            .get(&set_root)
            .is_some_and(|m| m.contains_key(&elem_root))
    }

    fn ins(&self, set_root: usize) -> impl Iterator<Item = (u32, Sym)> + '_ {
        self.members_in
            .get(&set_root)
            .into_iter()
            .flatten()
            .map(|(&e, &w)| (e, w))
    }

    fn outs(&self, set_root: usize) -> impl Iterator<Item = (u32, Sym)> + '_ {
        self.members_out
            .get(&set_root)
            .into_iter()
            .flatten()
            .map(|(&e, &w)| (e, w))
    }

    /// Is `x in s` entailed?
    pub fn member(&self, eq: &EqEngine, x: Sym, s: TermId) -> bool {
        eq.root_index(x)
            .is_some_and(|e| self.has_in(self.set_root(s), e))
    }

    /// Is `x notin s` entailed?
    pub fn not_member(&self, eq: &EqEngine, x: Sym, s: TermId) -> bool {
        eq.root_index(x)
            .is_some_and(|e| self.has_out(self.set_root(s), e))
    }

    /// Are `s` and `t` in the same set class (reflexively)?
    pub fn eq_sets(&self, s: TermId, t: TermId) -> bool {
        self.set_root(s) == self.set_root(t)
    }

    /// Is some asserted disequality between the classes of `s` and `t`?
    pub fn neq_sets(&self, s: TermId, t: TermId) -> bool {
        let a = self.set_root(s);
        let b = self.set_root(t);
        self.set_diseqs.contains(&(a.min(b), a.max(b)))
    }

    /// Is `t` asserted equal to the empty set?
    pub fn known_empty(&self, t: TermId) -> bool {
        self.set_root(t) == self.empty_root
    }

    /// Element classes with a known membership in `s`, as
    /// `(class id, witness)` pairs in class-id order.
    pub fn member_classes(&self, s: TermId) -> Vec<(u32, Sym)> {
        self.ins(self.set_root(s)).collect()
    }

    /// Does some element class witness `s != t`, i.e. lie in one side and out
    /// of the other?
    pub(crate) fn diseq_witnessed(&self, s: TermId, t: TermId) -> bool {
        let rs = self.set_root(s);
        let rt = self.set_root(t);
        self.ins(rs).any(|(e, _)| self.has_out(rt, e))
            || self.ins(rt).any(|(e, _)| self.has_out(rs, e))
    }
}

/// Contradiction checks, in priority order: an element disequality broken by
/// the element equalities; a membership and non-membership meeting on the
/// same classes; a membership in the empty class.
pub fn find_close(idx: &ClosureIndex, eq: &EqEngine) -> Option<RuleInstance> {
    if eq.inconsistency().is_some() {
        return Some(RuleInstance {
            tag: RuleTag::EqUnsat,
            kind: Kind::Close,
        });
    }
    for (set_root, ins) in &idx.members_in {
        if let Some(outs) = idx.members_out.get(set_root) {
            if ins.keys().any(|e| outs.contains_key(e)) {
                return Some(RuleInstance {
                    tag: RuleTag::SetUnsat,
                    kind: Kind::Close,
                });
            }
        }
    }
    if idx
        .members_in
        .get(&idx.empty_root)
        .is_some_and(|m| !m.is_empty())
    {
        return Some(RuleInstance {
            tag: RuleTag::EmptyUnsat,
            kind: Kind::Close,
        });
    }
    None
}

/// First applicable membership propagation, scanning terms in first-seen
/// order and rules per term in a fixed order. Conclusions already entailed
/// are dropped; an instance is returned only if a conclusion remains.
pub fn find_membership_propagation(
    ctx: &Ctx,
    idx: &ClosureIndex,
    eq: &EqEngine,
) -> Option<RuleInstance> {
    for &t in &idx.term_list {
        let found = match ctx.node(t) {
            TermNode::Union(s, u) => union_rules(idx, t, s, u),
            TermNode::Inter(s, u) => inter_rules(idx, t, s, u),
            TermNode::Diff(s, u) => diff_rules(idx, t, s, u),
            TermNode::Singleton(y) => singleton_rules(idx, eq, t, y),
            TermNode::Var(_) | TermNode::Empty => None,
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

fn prop(tag: RuleTag, concls: Vec<Concl>) -> Option<RuleInstance> {
    Some(RuleInstance {
        tag,
        kind: Kind::Propagate(concls),
    })
}

fn union_rules(idx: &ClosureIndex, whole: TermId, s: TermId, u: TermId) -> Option<RuleInstance> {
    let rw = idx.set_root(whole);
    let rs = idx.set_root(s);
    let ru = idx.set_root(u);
    // Nothing outside the union is in either part.
    for (e, w) in idx.outs(rw) {
        let mut concls = Vec::new();
        if !idx.has_out(rs, e) {
            concls.push(Concl::S(Constraint::NotMember(w, s)));
        }
        if !idx.has_out(ru, e) {
            concls.push(Concl::S(Constraint::NotMember(w, u)));
        }
        if !concls.is_empty() {
            return prop(RuleTag::UnionDownI, concls);
        }
    }
    // A union member missing from one part is in the other.
    for (e, w) in idx.ins(rw) {
        if idx.has_out(rs, e) && !idx.has_in(ru, e) {
            return prop(RuleTag::UnionDownII, vec![Concl::S(Constraint::Member(w, u))]);
        }
        if idx.has_out(ru, e) && !idx.has_in(rs, e) {
            return prop(RuleTag::UnionDownII, vec![Concl::S(Constraint::Member(w, s))]);
        }
    }
    // Outside both parts means outside the union.
    for (e, w) in idx.outs(rs) {
        if idx.has_out(ru, e) && !idx.has_out(rw, e) {
            return prop(RuleTag::UnionUpI, vec![Concl::S(Constraint::NotMember(w, whole))]);
        }
    }
    // Inside either part means inside the union.
    for (e, w) in idx.ins(rs) {
        if !idx.has_in(rw, e) {
            return prop(RuleTag::UnionUpII, vec![Concl::S(Constraint::Member(w, whole))]);
        }
    }
    for (e, w) in idx.ins(ru) {
        if !idx.has_in(rw, e) {
            return prop(RuleTag::UnionUpII, vec![Concl::S(Constraint::Member(w, whole))]);
        }
    }
    None
}

fn inter_rules(idx: &ClosureIndex, whole: TermId, s: TermId, u: TermId) -> Option<RuleInstance> {
    let rw = idx.set_root(whole);
    let rs = idx.set_root(s);
    let ru = idx.set_root(u);
    // An intersection member is in both parts.
    for (e, w) in idx.ins(rw) {
        let mut concls = Vec::new();
        if !idx.has_in(rs, e) {
            concls.push(Concl::S(Constraint::Member(w, s)));
        }
        if !idx.has_in(ru, e) {
            concls.push(Concl::S(Constraint::Member(w, u)));
        }
        if !concls.is_empty() {
            return prop(RuleTag::InterDownI, concls);
        }
    }
    // Outside the intersection but inside one part: outside the other.
    for (e, w) in idx.outs(rw) {
        if idx.has_in(rs, e) && !idx.has_out(ru, e) {
            return prop(RuleTag::InterDownII, vec![Concl::S(Constraint::NotMember(w, u))]);
        }
        if idx.has_in(ru, e) && !idx.has_out(rs, e) {
            return prop(RuleTag::InterDownII, vec![Concl::S(Constraint::NotMember(w, s))]);
        }
    }
    // Inside both parts means inside the intersection.
    for (e, w) in idx.ins(rs) {
        if idx.has_in(ru, e) && !idx.has_in(rw, e) {
            return prop(RuleTag::InterUpI, vec![Concl::S(Constraint::Member(w, whole))]);
        }
    }
    // Outside either part means outside the intersection.
    for (e, w) in idx.outs(rs) {
        if !idx.has_out(rw, e) {
            return prop(RuleTag::InterUpII, vec![Concl::S(Constraint::NotMember(w, whole))]);
        }
    }
    for (e, w) in idx.outs(ru) {
        if !idx.has_out(rw, e) {
            return prop(RuleTag::InterUpII, vec![Concl::S(Constraint::NotMember(w, whole))]);
        }
    }
    None
}

fn diff_rules(idx: &ClosureIndex, whole: TermId, s: TermId, u: TermId) -> Option<RuleInstance> {
    let rw = idx.set_root(whole);
    let rs = idx.set_root(s);
    let ru = idx.set_root(u);
    // A difference member is in the minuend and outside the subtrahend.
    for (e, w) in idx.ins(rw) {
        let mut concls = Vec::new();
        if !idx.has_in(rs, e) {
            concls.push(Concl::S(Constraint::Member(w, s)));
        }
        if !idx.has_out(ru, e) {
            concls.push(Concl::S(Constraint::NotMember(w, u)));
        }
        if !concls.is_empty() {
            return prop(RuleTag::DiffDown1, concls);
        }
    }
    // In the minuend but not the difference: must be in the subtrahend.
    for (e, w) in idx.outs(rw) {
        if idx.has_in(rs, e) && !idx.has_in(ru, e) {
            return prop(RuleTag::DiffDown2, vec![Concl::S(Constraint::Member(w, u))]);
        }
    }
    // Outside both the difference and the subtrahend: outside the minuend.
    for (e, w) in idx.outs(rw) {
        if idx.has_out(ru, e) && !idx.has_out(rs, e) {
            return prop(RuleTag::DiffDown3, vec![Concl::S(Constraint::NotMember(w, s))]);
        }
    }
    // In the minuend and outside the subtrahend: in the difference.
    for (e, w) in idx.ins(rs) {
        if idx.has_out(ru, e) && !idx.has_in(rw, e) {
            return prop(RuleTag::DiffUp1, vec![Concl::S(Constraint::Member(w, whole))]);
        }
    }
    // Outside the minuend means outside the difference.
    for (e, w) in idx.outs(rs) {
        if !idx.has_out(rw, e) {
            return prop(RuleTag::DiffUp2, vec![Concl::S(Constraint::NotMember(w, whole))]);
        }
    }
    // Inside the subtrahend means outside the difference.
    for (e, w) in idx.ins(ru) {
        if !idx.has_out(rw, e) {
            return prop(RuleTag::DiffUp3, vec![Concl::S(Constraint::NotMember(w, whole))]);
        }
    }
    None
}

fn singleton_rules(
    idx: &ClosureIndex,
    eq: &EqEngine,
    whole: TermId,
    y: Sym,
) -> Option<RuleInstance> {
    let rw = idx.set_root(whole);
    // The singleton contains its element.
    if !eq.root_index(y).is_some_and(|e| idx.has_in(rw, e)) {
        return prop(RuleTag::Singleton, vec![Concl::S(Constraint::Member(y, whole))]);
    }
    // Any member equals that element.
    for (_, w) in idx.ins(rw) {
        if !eq.in_eq_closure(w, y) {
            return prop(RuleTag::SingleMember, vec![Concl::M(Constraint::ElemEq(w, y))]);
        }
    }
    // Any non-member differs from it.
    for (_, w) in idx.outs(rw) {
        if !eq.in_diseq_closure(w, y) {
            return prop(
                RuleTag::SingleNonmember,
                vec![Concl::M(Constraint::ElemNeq(w, y))],
            );
        }
    }
    None
}

/// First applicable case split: per-term splits in term order, then the
/// disequality witness split in literal order. Only called once
/// propagations are exhausted.
pub fn find_membership_split(ctx: &Ctx, idx: &ClosureIndex, _eq: &EqEngine) -> Option<RuleInstance> {
    for &t in &idx.term_list {
        match ctx.node(t) {
            TermNode::Union(s, u) => {
                let rs = idx.set_root(s);
                let ru = idx.set_root(u);
                for (e, w) in idx.ins(idx.set_root(t)) {
                    if !idx.has_in(rs, e) && !idx.has_in(ru, e) {
                        return Some(RuleInstance {
                            tag: RuleTag::UnionSplit,
                            kind: Kind::Branch(
                                vec![Concl::S(Constraint::Member(w, s))],
                                vec![Concl::S(Constraint::Member(w, u))],
                            ),
                        });
                    }
                }
            }
            TermNode::Inter(s, u) => {
                for (side, other) in [(s, u), (u, s)] {
                    let ro = idx.set_root(other);
                    for (e, w) in idx.ins(idx.set_root(side)) {
                        if !idx.has_in(ro, e) && !idx.has_out(ro, e) {
                            return Some(RuleInstance {
                                tag: RuleTag::InterSplit,
                                kind: Kind::Branch(
                                    vec![Concl::S(Constraint::Member(w, other))],
                                    vec![Concl::S(Constraint::NotMember(w, other))],
                                ),
                            });
                        }
                    }
                }
            }
            TermNode::Diff(s, u) => {
                let ru = idx.set_root(u);
                for (e, w) in idx.ins(idx.set_root(s)) {
                    if !idx.has_in(ru, e) && !idx.has_out(ru, e) {
                        return Some(RuleInstance {
                            tag: RuleTag::DiffSplit,
                            kind: Kind::Branch(
                                vec![Concl::S(Constraint::Member(w, u))],
                                vec![Concl::S(Constraint::NotMember(w, u))],
                            ),
                        });
                    }
                }
            }
            TermNode::Var(_) | TermNode::Empty | TermNode::Singleton(_) => {}
        }
    }
    for &(s, t) in &idx.neq_literals {
        if !idx.diseq_witnessed(s, t) {
            return Some(RuleInstance {
                tag: RuleTag::SetDisequality,
                kind: Kind::BranchFreshWitness { s, t },
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Sort;

    /// Mimics the engine: seed the empty set, then every literal's terms and
    /// subterms in first-seen order; register element variables in literal
    /// order.
    fn index_for(ctx: &Ctx, lits: &[Constraint], eq: &mut EqEngine) -> ClosureIndex {
        let mut terms = vec![ctx.empty()];
        let mut seen: HashSet<TermId> = terms.iter().copied().collect();
        let mut buf = Vec::new();
        for c in lits {
            buf.clear();
            match *c {
                Constraint::SetEq(s, t) | Constraint::SetNeq(s, t) => {
                    ctx.collect_subterms(s, &mut buf);
                    ctx.collect_subterms(t, &mut buf);
                }
                Constraint::Member(x, s) | Constraint::NotMember(x, s) => {
                    eq.register(x);
                    ctx.collect_subterms(s, &mut buf);
                }
                _ => {}
            }
            for &t in &buf {
                if seen.insert(t) {
                    terms.push(t);
                }
            }
        }
        ClosureIndex::build(ctx, &terms, lits, eq)
    }

    struct Fixture {
        ctx: Ctx,
        sets: Vec<TermId>,
        elems: Vec<Sym>,
    }

    fn fixture(set_names: &[&str], elem_names: &[&str]) -> Fixture {
        let mut ctx = Ctx::new();
        let sets = set_names
            .iter()
            .map(|n| {
                let s = ctx.declare(n, Sort::Set).unwrap();
                ctx.var(s).unwrap()
            })
            .collect();
        let elems = elem_names
            .iter()
            .map(|n| ctx.declare(n, Sort::Element).unwrap())
            .collect();
        Fixture { ctx, sets, elems }
    }

    #[test]
    fn closure_lifts_memberships_through_both_equalities() {
        let f = fixture(&["A", "B"], &["x", "y"]);
        let (a, b) = (f.sets[0], f.sets[1]);
        let (x, y) = (f.elems[0], f.elems[1]);
        let lits = vec![Constraint::SetEq(a, b), Constraint::Member(y, b)];
        let mut eq = EqEngine::new();
        eq.register(x);
        eq.merge(x, y);
        let idx = index_for(&f.ctx, &lits, &mut eq);
        assert!(idx.member(&eq, y, b));
        assert!(idx.member(&eq, y, a), "lifted through the set equality");
        assert!(idx.member(&eq, x, a), "lifted through the element equality");
        assert!(!idx.not_member(&eq, x, a));
    }

    #[test]
    fn union_down_adds_only_missing_conclusions() {
        let f = fixture(&["A", "B"], &["x"]);
        let mut ctx = f.ctx;
        let ab = ctx.union(f.sets[0], f.sets[1]);
        let x = f.elems[0];
        let lits = vec![
            Constraint::NotMember(x, ab),
            Constraint::NotMember(x, f.sets[0]),
        ];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        let inst = find_membership_propagation(&ctx, &idx, &eq).expect("rule applies");
        assert_eq!(inst.tag, RuleTag::UnionDownI);
        match inst.kind {
            Kind::Propagate(c) => {
                assert_eq!(c, vec![Concl::S(Constraint::NotMember(x, f.sets[1]))]);
            }
            k => panic!("expected propagation, got {k:?}"),
        }
    }

    #[test]
    fn union_down_picks_the_remaining_part() {
        let f = fixture(&["A", "B"], &["x"]);
        let mut ctx = f.ctx;
        let ab = ctx.union(f.sets[0], f.sets[1]);
        let x = f.elems[0];
        let lits = vec![
            Constraint::Member(x, ab),
            Constraint::NotMember(x, f.sets[0]),
        ];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        let inst = find_membership_propagation(&ctx, &idx, &eq).expect("rule applies");
        assert_eq!(inst.tag, RuleTag::UnionDownII);
        match inst.kind {
            Kind::Propagate(c) => {
                assert_eq!(c, vec![Concl::S(Constraint::Member(x, f.sets[1]))]);
            }
            k => panic!("expected propagation, got {k:?}"),
        }
    }

    #[test]
    fn scan_is_term_major() {
        // Both unions could propagate upward; the earlier term wins.
        let f = fixture(&["A", "B", "C", "D"], &["x", "y"]);
        let mut ctx = f.ctx;
        let ab = ctx.union(f.sets[0], f.sets[1]);
        let cd = ctx.union(f.sets[2], f.sets[3]);
        let lits = vec![
            Constraint::SetNeq(ab, cd), // brings both unions into the term list
            Constraint::Member(f.elems[1], f.sets[2]),
            Constraint::Member(f.elems[0], f.sets[0]),
        ];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        let inst = find_membership_propagation(&ctx, &idx, &eq).expect("rule applies");
        assert_eq!(inst.tag, RuleTag::UnionUpII);
        match inst.kind {
            Kind::Propagate(c) => {
                assert_eq!(c, vec![Concl::S(Constraint::Member(f.elems[0], ab))]);
            }
            k => panic!("expected propagation, got {k:?}"),
        }
    }

    #[test]
    fn singleton_rules_fire_in_order() {
        let f = fixture(&[], &["x", "y", "z"]);
        let mut ctx = f.ctx;
        let (x, y, z) = (f.elems[0], f.elems[1], f.elems[2]);
        let sy = ctx.singleton(y).unwrap();
        let mut eq = EqEngine::new();

        // Bare singleton: its own element must be a member.
        let lits = vec![Constraint::NotMember(z, sy)];
        let idx = index_for(&ctx, &lits, &mut eq);
        let inst = find_membership_propagation(&ctx, &idx, &eq).expect("rule applies");
        assert_eq!(inst.tag, RuleTag::Singleton);

        // With the self-membership present, members collapse onto y ...
        let mut eq = EqEngine::new();
        let lits = vec![
            Constraint::Member(y, sy),
            Constraint::Member(x, sy),
            Constraint::NotMember(z, sy),
        ];
        let idx = index_for(&ctx, &lits, &mut eq);
        let inst = find_membership_propagation(&ctx, &idx, &eq).expect("rule applies");
        assert_eq!(inst.tag, RuleTag::SingleMember);
        match &inst.kind {
            Kind::Propagate(c) => {
                assert_eq!(c, &vec![Concl::M(Constraint::ElemEq(x, y))]);
            }
            k => panic!("expected propagation, got {k:?}"),
        }

        // ... and once that equality is known, non-members are distinct.
        eq.merge(x, y);
        let idx = index_for(&ctx, &lits, &mut eq);
        let inst = find_membership_propagation(&ctx, &idx, &eq).expect("rule applies");
        assert_eq!(inst.tag, RuleTag::SingleNonmember);
        match &inst.kind {
            Kind::Propagate(c) => {
                assert_eq!(c, &vec![Concl::M(Constraint::ElemNeq(z, y))]);
            }
            k => panic!("expected propagation, got {k:?}"),
        }

        eq.add_diseq(z, y);
        let idx = index_for(&ctx, &lits, &mut eq);
        assert!(find_membership_propagation(&ctx, &idx, &eq).is_none());
    }

    #[test]
    fn union_split_requires_both_sides_unknown() {
        let f = fixture(&["A", "B"], &["x"]);
        let mut ctx = f.ctx;
        let ab = ctx.union(f.sets[0], f.sets[1]);
        let x = f.elems[0];
        let lits = vec![Constraint::Member(x, ab)];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        assert!(find_membership_propagation(&ctx, &idx, &eq).is_none());
        let inst = find_membership_split(&ctx, &idx, &eq).expect("split applies");
        assert_eq!(inst.tag, RuleTag::UnionSplit);
        match inst.kind {
            Kind::Branch(l, r) => {
                assert_eq!(l, vec![Concl::S(Constraint::Member(x, f.sets[0]))]);
                assert_eq!(r, vec![Concl::S(Constraint::Member(x, f.sets[1]))]);
            }
            k => panic!("expected branch, got {k:?}"),
        }

        // Once one side is known, the split no longer applies.
        let lits = vec![Constraint::Member(x, ab), Constraint::Member(x, f.sets[0])];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        assert!(find_membership_split(&ctx, &idx, &eq).is_none());
    }

    #[test]
    fn inter_and_diff_splits_target_the_unknown_side() {
        let f = fixture(&["N", "A", "B"], &["x"]);
        let mut ctx = f.ctx;
        let (n, a, b) = (f.sets[0], f.sets[1], f.sets[2]);
        let x = f.elems[0];
        let inter = ctx.inter(a, b);
        let lits = vec![Constraint::SetEq(n, inter), Constraint::Member(x, a)];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        assert!(find_membership_propagation(&ctx, &idx, &eq).is_none());
        let inst = find_membership_split(&ctx, &idx, &eq).expect("split applies");
        assert_eq!(inst.tag, RuleTag::InterSplit);
        match inst.kind {
            Kind::Branch(l, r) => {
                assert_eq!(l, vec![Concl::S(Constraint::Member(x, b))]);
                assert_eq!(r, vec![Concl::S(Constraint::NotMember(x, b))]);
            }
            k => panic!("expected branch, got {k:?}"),
        }

        let diff = ctx.diff(a, b);
        let lits = vec![Constraint::SetEq(n, diff), Constraint::Member(x, a)];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        let inst = find_membership_split(&ctx, &idx, &eq).expect("split applies");
        assert_eq!(inst.tag, RuleTag::DiffSplit);
    }

    #[test]
    fn disequality_split_is_suppressed_by_a_witness() {
        let f = fixture(&["A", "B"], &["w"]);
        let ctx = f.ctx;
        let (a, b) = (f.sets[0], f.sets[1]);
        let w = f.elems[0];
        let lits = vec![Constraint::SetNeq(a, b)];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        let inst = find_membership_split(&ctx, &idx, &eq).expect("split applies");
        assert_eq!(inst.tag, RuleTag::SetDisequality);
        match inst.kind {
            Kind::BranchFreshWitness { s, t } => {
                assert_eq!((s, t), (a, b));
            }
            k => panic!("expected witness branch, got {k:?}"),
        }

        let lits = vec![
            Constraint::SetNeq(a, b),
            Constraint::Member(w, a),
            Constraint::NotMember(w, b),
        ];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        assert!(find_membership_split(&ctx, &idx, &eq).is_none());
    }

    #[test]
    fn close_checks_in_priority_order() {
        let f = fixture(&["A", "B", "E"], &["x", "y"]);
        let ctx = f.ctx;
        let (a, b, e_set) = (f.sets[0], f.sets[1], f.sets[2]);
        let (x, y) = (f.elems[0], f.elems[1]);

        // Element contradiction.
        let mut eq = EqEngine::new();
        eq.add_diseq(x, y);
        eq.merge(x, y);
        let idx = index_for(&ctx, &[], &mut eq);
        assert_eq!(find_close(&idx, &eq).unwrap().tag, RuleTag::EqUnsat);

        // Membership contradiction through both closures.
        let lits = vec![
            Constraint::Member(x, a),
            Constraint::NotMember(y, b),
            Constraint::SetEq(a, b),
        ];
        let mut eq = EqEngine::new();
        eq.merge(x, y);
        let idx = index_for(&ctx, &lits, &mut eq);
        assert_eq!(find_close(&idx, &eq).unwrap().tag, RuleTag::SetUnsat);

        // Membership in a set equated with the empty set.
        let empty = ctx.empty();
        let lits = vec![Constraint::SetEq(e_set, empty), Constraint::Member(x, e_set)];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        assert_eq!(find_close(&idx, &eq).unwrap().tag, RuleTag::EmptyUnsat);

        // A consistent state has no close.
        let lits = vec![Constraint::Member(x, a)];
        let mut eq = EqEngine::new();
        let idx = index_for(&ctx, &lits, &mut eq);
        assert!(find_close(&idx, &eq).is_none());
    }

    #[test]
    fn rule_names_are_unique() {
        let tags = [
            RuleTag::UnionDownI,
            RuleTag::UnionDownII,
            RuleTag::UnionUpI,
            RuleTag::UnionUpII,
            RuleTag::InterDownI,
            RuleTag::InterDownII,
            RuleTag::InterUpI,
            RuleTag::InterUpII,
            RuleTag::DiffDown1,
            RuleTag::DiffDown2,
            RuleTag::DiffDown3,
            RuleTag::DiffUp1,
            RuleTag::DiffUp2,
            RuleTag::DiffUp3,
            RuleTag::Singleton,
            RuleTag::SingleMember,
            RuleTag::SingleNonmember,
            RuleTag::UnionSplit,
            RuleTag::InterSplit,
            RuleTag::DiffSplit,
            RuleTag::SetDisequality,
            RuleTag::EqUnsat,
            RuleTag::SetUnsat,
            RuleTag::EmptyUnsat,
            RuleTag::ArithContradiction,
            RuleTag::GuessEmptySet,
            RuleTag::IntroduceEmptySet,
            RuleTag::IntroduceCard,
            RuleTag::IntroduceEqRight,
            RuleTag::IntroduceEqLeft,
            RuleTag::IntroduceUnion,
            RuleTag::IntroduceInter,
            RuleTag::IntroduceDiff,
            RuleTag::IntroduceSingleton,
            RuleTag::MergeEqI,
            RuleTag::MergeEqII,
            RuleTag::PropagateMinsize,
            RuleTag::MembersArrangement,
            RuleTag::GuessLowerBound,
        ];
        let names: HashSet<&str> = tags.iter().map(|t| t.name()).collect();
        assert_eq!(names.len(), tags.len());
    }
}
