//! Rewriting of arbitrary set constraints into the solver's flat form.
//!
//! Flat constraints have one of these shapes, with every argument a variable:
//! `S = T`, `S != T`, `S = emptyset`, `S = {x}`, `S = T op U` (union,
//! intersection, difference), `x in S`, `x notin S`, `c = card(S)`, plus
//! element (dis)equalities and linear cardinality atoms, which are already
//! flat. Additionally, each set variable may occur as an argument of at most
//! one distinct composite term, and the two arguments of a composite must be
//! distinct variables.
//!
//! Flattening works in two passes:
//!
//! 1. **Purification** walks each constraint bottom-up, left to right, naming
//!    every nested composite subterm with a fresh variable and a defining
//!    equality. Naming is memoized per call, so a subterm shared between
//!    constraints is defined once.
//! 2. **Occurrence renaming** scans the purified constraints in order. When a
//!    set variable reappears as an argument of a second distinct composite
//!    term (or twice within one composite), the later occurrence is replaced
//!    by a fresh variable and an equality with the original is appended
//!    immediately after the triggering constraint.
//!
//! The result is equisatisfiable with the input: every fresh variable is
//! definitionally equal to a term over the original variables.

use std::collections::{HashMap, HashSet};

use crate::ast::{Constraint, Ctx, Sort, Sym, TermId, TermNode};

/// A flattened constraint set together with the variables invented for it.
#[derive(Debug, Clone)]
pub struct FlatProblem {
    pub constraints: Vec<Constraint>,
    /// Fresh variables introduced by flattening, in creation order.
    pub introduced: Vec<Sym>,
}

/// Rewrites `constraints` into flat form, declaring fresh set variables in
/// `ctx` as needed.
pub fn flatten(ctx: &mut Ctx, constraints: &[Constraint]) -> FlatProblem {
    let mut p = Purifier {
        ctx,
        memo: HashMap::new(),
        out: Vec::new(),
        introduced: Vec::new(),
    };
    for c in constraints {
        p.constraint(c);
    }
    let purified = std::mem::take(&mut p.out);
    let mut introduced = std::mem::take(&mut p.introduced);
    let flat = rename_occurrences(ctx, &purified, &mut introduced);
    FlatProblem {
        constraints: flat,
        introduced,
    }
}

struct Purifier<'a> {
    ctx: &'a mut Ctx,
    memo: HashMap<TermId, Sym>,
    out: Vec<Constraint>,
    introduced: Vec<Sym>,
}

impl Purifier<'_> {
    fn constraint(&mut self, c: &Constraint) {
        match *c {
            Constraint::SetEq(s, t) => {
                let s_var = self.as_var(s);
                let t_var = self.as_var(t);
                match (s_var, t_var) {
                    (Some(_), _) => {
                        let rhs = self.shallow(t);
                        self.out.push(Constraint::SetEq(s, rhs));
                    }
                    (None, Some(_)) => {
                        let rhs = self.shallow(s);
                        self.out.push(Constraint::SetEq(t, rhs));
                    }
                    (None, None) => {
                        let lhs = self.name(s);
                        let lhs = self.ctx.var(lhs).expect("fresh set variable");
                        let rhs = self.shallow(t);
                        self.out.push(Constraint::SetEq(lhs, rhs));
                    }
                }
            }
            Constraint::SetNeq(s, t) => {
                let a = self.name(s);
                let b = self.name(t);
                let a = self.ctx.var(a).expect("set variable");
                let b = self.ctx.var(b).expect("set variable");
                self.out.push(Constraint::SetNeq(a, b));
            }
            Constraint::Member(x, s) => {
                let v = self.name(s);
                let v = self.ctx.var(v).expect("set variable");
                self.out.push(Constraint::Member(x, v));
            }
            Constraint::NotMember(x, s) => {
                let v = self.name(s);
                let v = self.ctx.var(v).expect("set variable");
                self.out.push(Constraint::NotMember(x, v));
            }
            Constraint::CardOf(card, s) => {
                let v = self.name(s);
                let v = self.ctx.var(v).expect("set variable");
                self.out.push(Constraint::CardOf(card, v));
            }
            Constraint::ElemEq(..) | Constraint::ElemNeq(..) | Constraint::Arith(_) => {
                self.out.push(c.clone());
            }
        }
    }

    fn as_var(&self, t: TermId) -> Option<Sym> {
        match self.ctx.node(t) {
            TermNode::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Returns a variable equal to `t`, emitting a defining equality (and
    /// recursively, definitions for nested subterms) unless `t` is a variable
    /// or has already been named.
    fn name(&mut self, t: TermId) -> Sym {
        if let TermNode::Var(v) = self.ctx.node(t) {
            return v;
        }
        if let Some(&v) = self.memo.get(&t) {
            return v;
        }
        let rhs = self.shallow(t);
        let f = self.fresh_set();
        let fv = self.ctx.var(f).expect("fresh set variable");
        self.out.push(Constraint::SetEq(fv, rhs));
        self.memo.insert(t, f);
        f
    }

    /// Flattens one level: composite children are named, the top operator is
    /// kept. Variables, the empty set, and singletons are already shallow.
    fn shallow(&mut self, t: TermId) -> TermId {
        match self.ctx.node(t) {
            TermNode::Var(_) | TermNode::Empty | TermNode::Singleton(_) => t,
            TermNode::Union(a, b) => {
                let (a, b) = self.name_pair(a, b);
                self.ctx.union(a, b)
            }
            TermNode::Inter(a, b) => {
                let (a, b) = self.name_pair(a, b);
                self.ctx.inter(a, b)
            }
            TermNode::Diff(a, b) => {
                let (a, b) = self.name_pair(a, b);
                self.ctx.diff(a, b)
            }
        }
    }

    fn name_pair(&mut self, a: TermId, b: TermId) -> (TermId, TermId) {
        let na = self.name(a);
        let nb = self.name(b);
        let va = self.ctx.var(na).expect("set variable");
        let vb = self.ctx.var(nb).expect("set variable");
        (va, vb)
    }

    fn fresh_set(&mut self) -> Sym {
        let f = self.ctx.fresh(Sort::Set);
        self.introduced.push(f);
        f
    }
}

/// Pass 2: enforce that each set variable is an argument of at most one
/// distinct composite term. `used` maps a variable to the (final) composite
/// it first appeared in; a clash renames the later occurrence.
fn rename_occurrences(
    ctx: &mut Ctx,
    constraints: &[Constraint],
    introduced: &mut Vec<Sym>,
) -> Vec<Constraint> {
    let mut used: HashMap<Sym, TermId> = HashMap::new();
    let mut out = Vec::with_capacity(constraints.len());
    for c in constraints {
        let (lhs, a0, b0, rebuild): (TermId, Sym, Sym, fn(&mut Ctx, TermId, TermId) -> TermId) =
            match *c {
                Constraint::SetEq(lhs, rhs) => match ctx.node(rhs) {
                    TermNode::Union(a, b) => (lhs, var_of(ctx, a), var_of(ctx, b), Ctx::union),
                    TermNode::Inter(a, b) => (lhs, var_of(ctx, a), var_of(ctx, b), Ctx::inter),
                    TermNode::Diff(a, b) => (lhs, var_of(ctx, a), var_of(ctx, b), Ctx::diff),
                    _ => {
                        out.push(c.clone());
                        continue;
                    }
                },
                _ => {
                    out.push(c.clone());
                    continue;
                }
            };
        let original = match *c {
            Constraint::SetEq(_, rhs) => rhs,
            _ => unreachable!(),
        };

        let mut a = a0;
        let mut b = b0;
        let mut appended: Vec<Constraint> = Vec::new();
        let mut rename = |ctx: &mut Ctx, v: Sym, appended: &mut Vec<Constraint>| -> Sym {
            let f = ctx.fresh(Sort::Set);
            introduced.push(f);
            let fv = ctx.var(f).expect("fresh set variable");
            let ov = ctx.var(v).expect("set variable");
            appended.push(Constraint::SetEq(fv, ov));
            f
        };
        // Duplicate argument within one composite: rename the second.
        if a == b {
            b = rename(ctx, b, &mut appended);
        }
        // A repeated occurrence counts only if the earlier composite is a
        // different term; the same term seen twice is a single occurrence.
        if used.get(&a).is_some_and(|&t| t != original) {
            a = rename(ctx, a, &mut appended);
        }
        if used.get(&b).is_some_and(|&t| t != original) {
            b = rename(ctx, b, &mut appended);
        }

        let va = ctx.var(a).expect("set variable");
        let vb = ctx.var(b).expect("set variable");
        let final_rhs = rebuild(ctx, va, vb);
        used.entry(a).or_insert(final_rhs);
        used.entry(b).or_insert(final_rhs);
        out.push(Constraint::SetEq(lhs, final_rhs));
        out.extend(appended);
    }
    out
}

fn var_of(ctx: &Ctx, t: TermId) -> Sym {
    match ctx.node(t) {
        TermNode::Var(v) => v,
        other => panic!("purified composite has non-variable argument {other:?}"),
    }
}

/// Checks that `constraints` are in flat form; `Err` describes the first
/// violation found.
pub fn check_flat(ctx: &Ctx, constraints: &[Constraint]) -> Result<(), String> {
    let is_var = |t: TermId| matches!(ctx.node(t), TermNode::Var(_));
    let mut used: HashMap<Sym, HashSet<TermId>> = HashMap::new();
    for c in constraints {
        match *c {
            Constraint::SetEq(s, t) => {
                if !is_var(s) {
                    return Err(format!(
                        "equality left-hand side is not a variable: {}",
                        ctx.term_text(s)
                    ));
                }
                match ctx.node(t) {
                    TermNode::Var(_) | TermNode::Empty | TermNode::Singleton(_) => {}
                    TermNode::Union(a, b) | TermNode::Inter(a, b) | TermNode::Diff(a, b) => {
                        let (va, vb) = match (ctx.node(a), ctx.node(b)) {
                            (TermNode::Var(va), TermNode::Var(vb)) => (va, vb),
                            _ => {
                                return Err(format!(
                                    "composite has non-variable argument: {}",
                                    ctx.term_text(t)
                                ))
                            }
                        };
                        if va == vb {
                            return Err(format!(
                                "composite repeats an argument: {}",
                                ctx.term_text(t)
                            ));
                        }
                        used.entry(va).or_default().insert(t);
                        used.entry(vb).or_default().insert(t);
                    }
                }
            }
            Constraint::SetNeq(s, t) => {
                if !is_var(s) || !is_var(t) {
                    return Err(format!(
                        "disequality over non-variables: {}",
                        ctx.constraint_text(c)
                    ));
                }
            }
            Constraint::Member(_, s) | Constraint::NotMember(_, s) | Constraint::CardOf(_, s) => {
                if !is_var(s) {
                    return Err(format!(
                        "non-variable set in atomic constraint: {}",
                        ctx.constraint_text(c)
                    ));
                }
            }
            Constraint::ElemEq(..) | Constraint::ElemNeq(..) | Constraint::Arith(_) => {}
        }
    }
    for (v, terms) in &used {
        if terms.len() > 1 {
            return Err(format!(
                "set variable {} occurs in {} distinct composite terms",
                ctx.sym_name(*v),
                terms.len()
            ));
        }
    }
    Ok(())
}
