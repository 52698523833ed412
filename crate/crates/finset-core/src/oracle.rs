//! Brute-force model enumeration, used as an independent test oracle.
//!
//! [`enumerate`] searches for a finite model of a constraint set by exhaustive
//! backtracking, in a fixed canonical order: universe sizes ascending, then
//! element variables (declaration order, values ascending), then set variables
//! (bitmask subsets ascending), then unconstrained cardinality variables
//! (values ascending). Each constraint is checked as soon as all of its
//! variables are assigned, which prunes most of the search space. The first
//! assignment that satisfies everything is returned, so the found model is
//! canonical and stable.
//!
//! The enumerator shares nothing with the solver beyond the [`ast`]
//! vocabulary: no closure, graph, or simplex code. Cardinality variables
//! bound by a `CardOf` constraint are computed from the set assignment rather
//! than enumerated; all others range over `0..=universe+card_slack`.
//!
//! [`ast`]: crate::ast

use std::collections::BTreeMap;

use crate::ast::{CardAtom, Constraint, Ctx, Rel, Sort, Sym, TermId, TermNode};

/// Search bounds: maximum universe size, and how far free cardinality
/// variables may exceed the universe size.
#[derive(Debug, Clone, Copy)]
pub struct Bound {
    pub max_universe: u32,
    pub card_slack: i64,
}

/// A model found by enumeration. Sets are bitmasks over `0..universe`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub universe: u32,
    pub elems: BTreeMap<Sym, u32>,
    pub sets: BTreeMap<Sym, u64>,
    pub cards: BTreeMap<Sym, i64>,
}

/// Outcome of an enumeration: either a canonical first model, or the
/// guarantee that no model exists within the bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    FoundModel(Assignment),
    NoModelUpTo(u32),
}

/// One assignable slot, in assignment order.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Elem(Sym),
    Set(Sym),
    FreeCard(Sym),
}

struct Search<'a> {
    ctx: &'a Ctx,
    constraints: &'a [Constraint],
    slots: Vec<Slot>,
    /// Constraints checked after slot `k` is assigned (all their variables
    /// are then known); index `slots.len()` holds variable-free constraints.
    by_depth: Vec<Vec<usize>>,
    /// Card var -> defining set term, from the first `CardOf` mentioning it.
    defined_cards: BTreeMap<Sym, TermId>,
    elems: BTreeMap<Sym, u32>,
    sets: BTreeMap<Sym, u64>,
    cards: BTreeMap<Sym, i64>,
    universe: u32,
    card_bound: i64,
}

/// Enumerates models of `constraints` over the variables in `decls`
/// (declaration order), up to `bound`. Variables not occurring in any
/// constraint are not searched over; on success they get default values
/// (element 0, the empty set, cardinality 0).
pub fn enumerate(ctx: &Ctx, constraints: &[Constraint], decls: &[Sym], bound: Bound) -> Verdict {
    let mut occurring: std::collections::BTreeSet<Sym> = std::collections::BTreeSet::new();
    for c in constraints {
        occurring.extend(ctx.free_vars(c));
    }

    let mut defined_cards = BTreeMap::new();
    for c in constraints {
        if let Constraint::CardOf(v, t) = c {
            defined_cards.entry(*v).or_insert(*t);
        }
    }

    let mut elem_slots = Vec::new();
    let mut set_slots = Vec::new();
    let mut card_slots = Vec::new();
    for &d in decls {
        if !occurring.contains(&d) {
            continue;
        }
        match ctx.sym_sort(d) {
            Sort::Element => elem_slots.push(Slot::Elem(d)),
            Sort::Set => set_slots.push(Slot::Set(d)),
            Sort::Card => {
                if !defined_cards.contains_key(&d) {
                    card_slots.push(Slot::FreeCard(d));
                }
            }
        }
    }
    let slots: Vec<Slot> = elem_slots
        .into_iter()
        .chain(set_slots)
        .chain(card_slots)
        .collect();

    // Position of each slot variable in the assignment order.
    let mut slot_pos: BTreeMap<Sym, usize> = BTreeMap::new();
    for (i, s) in slots.iter().enumerate() {
        let v = match s {
            Slot::Elem(v) | Slot::Set(v) | Slot::FreeCard(v) => *v,
        };
        slot_pos.insert(v, i);
    }

    // A defined card var becomes known once the set variables of its term
    // are assigned; it contributes their positions instead of its own.
    let depth_of_var = |v: Sym, ctx: &Ctx| -> usize {
        if let Some(&t) = defined_cards.get(&v) {
            let mut deps = std::collections::BTreeSet::new();
            ctx.set_vars_of_term(t, &mut deps);
            ctx.elem_vars_of_term(t, &mut deps);
            deps.iter()
                .map(|d| slot_pos.get(d).copied().unwrap_or(0))
                .max()
                .unwrap_or(0)
        } else {
            slot_pos.get(&v).copied().unwrap_or(0)
        }
    };

    let mut by_depth: Vec<Vec<usize>> = vec![Vec::new(); slots.len() + 1];
    for (i, c) in constraints.iter().enumerate() {
        let vars = ctx.free_vars(c);
        if vars.is_empty() {
            by_depth[slots.len()].push(i);
            continue;
        }
        let depth = vars.iter().map(|&v| depth_of_var(v, ctx)).max().unwrap();
        by_depth[depth].push(i);
    }
    // Variable-free constraints are checked up front, once per universe, by
    // treating them as depth of the last slot when slots exist.
    if !slots.is_empty() {
        let tail = by_depth.pop().unwrap();
        by_depth.last_mut().unwrap().extend(tail);
    }

    let have_elems = decls.iter().any(|&d| ctx.sym_sort(d) == Sort::Element);

    let mut search = Search {
        ctx,
        constraints,
        slots,
        by_depth,
        defined_cards,
        elems: BTreeMap::new(),
        sets: BTreeMap::new(),
        cards: BTreeMap::new(),
        universe: 0,
        card_bound: 0,
    };

    for u in 0..=bound.max_universe {
        if u == 0 && have_elems {
            continue; // element variables need at least one value
        }
        assert!(u <= 32, "universe too large for bitmask enumeration");
        search.universe = u;
        search.card_bound = u as i64 + bound.card_slack;
        if search.slots.is_empty() {
            // Nothing to assign: just check the (variable-free) constraints.
            let ok = search
                .by_depth
                .last()
                .map(|g| g.iter().all(|&i| search.check(i) == Some(true)))
                .unwrap_or(true);
            if ok {
                return Verdict::FoundModel(finish(ctx, decls, &search));
            }
            continue;
        }
        if search.assign(0) {
            return Verdict::FoundModel(finish(ctx, decls, &search));
        }
    }
    Verdict::NoModelUpTo(bound.max_universe)
}

impl Search<'_> {
    /// Depth-first assignment of slot `k` onward; true on success (the
    /// partial maps then hold a full satisfying assignment).
    fn assign(&mut self, k: usize) -> bool {
        if k == self.slots.len() {
            return true;
        }
        match self.slots[k] {
            Slot::Elem(v) => {
                for val in 0..self.universe {
                    self.elems.insert(v, val);
                    if self.group_ok(k) && self.assign(k + 1) {
                        return true;
                    }
                }
                self.elems.remove(&v);
            }
            Slot::Set(v) => {
                let limit: u64 = if self.universe == 0 {
                    0
                } else {
                    (1u64 << self.universe) - 1
                };
                for mask in 0..=limit {
                    self.sets.insert(v, mask);
                    if self.group_ok(k) && self.assign(k + 1) {
                        return true;
                    }
                }
                self.sets.remove(&v);
            }
            Slot::FreeCard(v) => {
                for val in 0..=self.card_bound.max(0) {
                    self.cards.insert(v, val);
                    if self.group_ok(k) && self.assign(k + 1) {
                        return true;
                    }
                }
                self.cards.remove(&v);
            }
        }
        false
    }

    fn group_ok(&self, k: usize) -> bool {
        self.by_depth[k].iter().all(|&i| self.check(i) != Some(false))
    }

    /// Evaluates constraint `i` under the current partial assignment.
    /// `None` means not yet determined (treated as "not falsified").
    fn check(&self, i: usize) -> Option<bool> {
        match &self.constraints[i] {
            Constraint::SetEq(s, t) => Some(self.eval_term(*s)? == self.eval_term(*t)?),
            Constraint::SetNeq(s, t) => Some(self.eval_term(*s)? != self.eval_term(*t)?),
            Constraint::Member(x, s) => {
                let v = *self.elems.get(x)?;
                Some(self.eval_term(*s)? & (1 << v) != 0)
            }
            Constraint::NotMember(x, s) => {
                let v = *self.elems.get(x)?;
                Some(self.eval_term(*s)? & (1 << v) == 0)
            }
            Constraint::CardOf(c, s) => {
                let mask = self.eval_term(*s)?;
                Some(self.card_value(*c)? == mask.count_ones() as i64)
            }
            Constraint::ElemEq(x, y) => Some(self.elems.get(x)? == self.elems.get(y)?),
            Constraint::ElemNeq(x, y) => Some(self.elems.get(x)? != self.elems.get(y)?),
            Constraint::Arith(a) => self.eval_atom(a),
        }
    }

    fn eval_atom(&self, a: &CardAtom) -> Option<bool> {
        let mut sum: i64 = 0;
        for &(coeff, v) in &a.lhs {
            sum += coeff * self.card_value(v)?;
        }
        Some(match a.rel {
            Rel::Eq => sum == a.rhs,
            Rel::Ne => sum != a.rhs,
            Rel::Lt => sum < a.rhs,
            Rel::Ge => sum >= a.rhs,
        })
    }

    fn card_value(&self, v: Sym) -> Option<i64> {
        if let Some(&val) = self.cards.get(&v) {
            return Some(val);
        }
        let t = self.defined_cards.get(&v)?;
        Some(self.eval_term(*t)?.count_ones() as i64)
    }

    fn eval_term(&self, t: TermId) -> Option<u64> {
        match self.ctx.node(t) {
            TermNode::Var(v) => self.sets.get(&v).copied(),
            TermNode::Empty => Some(0),
            TermNode::Singleton(x) => Some(1u64 << *self.elems.get(&x)?),
            TermNode::Union(a, b) => Some(self.eval_term(a)? | self.eval_term(b)?),
            TermNode::Inter(a, b) => Some(self.eval_term(a)? & self.eval_term(b)?),
            TermNode::Diff(a, b) => Some(self.eval_term(a)? & !self.eval_term(b)?),
        }
    }
}

/// Materializes the full assignment: searched values, computed cardinalities,
/// and defaults for variables that occur in no constraint.
fn finish(ctx: &Ctx, decls: &[Sym], search: &Search<'_>) -> Assignment {
    let mut out = Assignment {
        universe: search.universe,
        elems: BTreeMap::new(),
        sets: BTreeMap::new(),
        cards: BTreeMap::new(),
    };
    for &d in decls {
        match ctx.sym_sort(d) {
            Sort::Element => {
                out.elems.insert(d, search.elems.get(&d).copied().unwrap_or(0));
            }
            Sort::Set => {
                out.sets.insert(d, search.sets.get(&d).copied().unwrap_or(0));
            }
            Sort::Card => {
                let v = search.card_value(d).unwrap_or(0);
                out.cards.insert(d, v);
            }
        }
    }
    out
}
