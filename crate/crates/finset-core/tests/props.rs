//! Randomized structural properties: the equality engine against a naive
//! reference model, flattening invariants, the integer feasibility check
//! against box-bounded brute force, and printer/parser round-trips.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use finset_core::eqengine::EqEngine;
use finset_core::frontend::{parse, print_script};
use finset_core::lia::{self, LiaOutcome};
use finset_core::normalize::{check_flat, flatten};
use finset_core::{gen, CardAtom, Constraint, Ctx, Rel, Sort, Sym};

// ----- equality engine vs. a naive reference -----

#[derive(Debug, Clone, Copy)]
enum Op {
    Merge(u8, u8),
    Diseq(u8, u8),
    Snapshot,
    Rollback,
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0u8..8, 0u8..8).prop_map(|(a, b)| Op::Merge(a, b)),
        2 => (0u8..8, 0u8..8).prop_map(|(a, b)| Op::Diseq(a, b)),
        1 => Just(Op::Snapshot),
        1 => Just(Op::Rollback),
    ]
}

/// Reference implementation: plain lists, closures recomputed from scratch
/// on every query, rollback by truncation.
#[derive(Default, Clone)]
struct Naive {
    reg: Vec<Sym>,
    eqs: Vec<(Sym, Sym)>,
    diseqs: Vec<(Sym, Sym)>,
}

impl Naive {
    fn register(&mut self, s: Sym) {
        if !self.reg.contains(&s) {
            self.reg.push(s);
        }
    }

    fn partition(&self) -> Vec<BTreeSet<Sym>> {
        let mut part: Vec<BTreeSet<Sym>> =
            self.reg.iter().map(|&s| BTreeSet::from([s])).collect();
        for &(a, b) in &self.eqs {
            let ia = part.iter().position(|c| c.contains(&a)).expect("registered");
            let ib = part.iter().position(|c| c.contains(&b)).expect("registered");
            if ia != ib {
                let (lo, hi) = (ia.min(ib), ia.max(ib));
                let moved = part.remove(hi);
                part[lo].extend(moved);
            }
        }
        part
    }

    fn same_class(&self, a: Sym, b: Sym) -> bool {
        if a == b {
            return true;
        }
        if !self.reg.contains(&a) || !self.reg.contains(&b) {
            return false;
        }
        self.partition()
            .iter()
            .any(|c| c.contains(&a) && c.contains(&b))
    }

    fn diseq(&self, a: Sym, b: Sym) -> bool {
        if !self.reg.contains(&a) || !self.reg.contains(&b) {
            return false;
        }
        self.diseqs.iter().any(|&(p, q)| {
            (self.same_class(p, a) && self.same_class(q, b))
                || (self.same_class(p, b) && self.same_class(q, a))
        })
    }

    fn inconsistent(&self) -> bool {
        self.diseqs.iter().any(|&(p, q)| self.same_class(p, q))
    }
}

proptest! {
    #[test]
    fn equality_engine_matches_naive_reference(ops in proptest::collection::vec(op_strategy(), 0..60)) {
        let mut ctx = Ctx::new();
        let syms: Vec<Sym> = (0..8)
            .map(|i| ctx.declare(&format!("x{i}"), Sort::Element).unwrap())
            .collect();

        let mut eq = EqEngine::new();
        let mut naive = Naive::default();
        let mut marks = Vec::new();
        let mut naive_marks = Vec::new();

        for op in ops {
            match op {
                Op::Merge(a, b) => {
                    let (a, b) = (syms[a as usize], syms[b as usize]);
                    eq.merge(a, b);
                    naive.register(a);
                    naive.register(b);
                    naive.eqs.push((a, b));
                }
                Op::Diseq(a, b) => {
                    let (a, b) = (syms[a as usize], syms[b as usize]);
                    eq.add_diseq(a, b);
                    naive.register(a);
                    naive.register(b);
                    naive.diseqs.push((a, b));
                }
                Op::Snapshot => {
                    marks.push(eq.mark());
                    naive_marks.push((naive.reg.len(), naive.eqs.len(), naive.diseqs.len()));
                }
                Op::Rollback => {
                    if let (Some(m), Some((r, e, d))) = (marks.pop(), naive_marks.pop()) {
                        eq.undo_to(m);
                        naive.reg.truncate(r);
                        naive.eqs.truncate(e);
                        naive.diseqs.truncate(d);
                    }
                }
            }

            for &a in &syms {
                for &b in &syms {
                    prop_assert_eq!(eq.in_eq_closure(a, b), naive.same_class(a, b));
                    prop_assert_eq!(eq.in_diseq_closure(a, b), naive.diseq(a, b));
                }
            }
            prop_assert_eq!(eq.inconsistency().is_some(), naive.inconsistent());

            let engine_part: BTreeSet<BTreeSet<Sym>> = eq
                .classes()
                .into_iter()
                .map(|c| c.into_iter().collect())
                .collect();
            let naive_part: BTreeSet<BTreeSet<Sym>> = naive.partition().into_iter().collect();
            prop_assert_eq!(engine_part, naive_part);
        }
    }
}

// ----- flattening -----

proptest! {
    #[test]
    fn flattening_yields_flat_fixed_points(seed in any::<u64>()) {
        let p = gen::random_nested(seed);
        let mut ctx = p.ctx.clone();
        let flat = flatten(&mut ctx, &p.constraints);
        prop_assert!(
            check_flat(&ctx, &flat.constraints).is_ok(),
            "flattening must produce flat form: {:?}",
            check_flat(&ctx, &flat.constraints)
        );
        let mut ctx2 = ctx.clone();
        let again = flatten(&mut ctx2, &flat.constraints);
        prop_assert!(again.introduced.is_empty(), "re-flattening invents nothing");
        prop_assert_eq!(again.constraints, flat.constraints);
    }
}

// ----- integer feasibility vs. box-bounded brute force -----

fn holds(atoms: &[CardAtom], assign: &BTreeMap<Sym, i64>) -> bool {
    atoms.iter().all(|a| {
        let sum: i64 = a
            .lhs
            .iter()
            .map(|&(c, v)| c * assign.get(&v).copied().unwrap_or(0))
            .sum();
        match a.rel {
            Rel::Eq => sum == a.rhs,
            Rel::Ne => sum != a.rhs,
            Rel::Lt => sum < a.rhs,
            Rel::Ge => sum >= a.rhs,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(192))]
    #[test]
    fn integer_feasibility_agrees_with_box_search(
        row_shapes in proptest::collection::vec(
            (proptest::array::uniform3(-3i64..=3), 0u8..4, -8i64..=8),
            1..=4,
        )
    ) {
        let mut ctx = Ctx::new();
        let vs: Vec<Sym> = (0..3)
            .map(|i| ctx.declare(&format!("c{i}"), Sort::Card).unwrap())
            .collect();
        let atoms: Vec<CardAtom> = row_shapes
            .iter()
            .map(|(coeffs, rel, rhs)| {
                let rel = match rel {
                    0 => Rel::Eq,
                    1 => Rel::Ne,
                    2 => Rel::Lt,
                    _ => Rel::Ge,
                };
                let terms = coeffs
                    .iter()
                    .zip(&vs)
                    .filter(|(&c, _)| c != 0)
                    .map(|(&c, &v)| (c, v));
                CardAtom::new(terms, rel, *rhs)
            })
            .collect();

        let mut box_model = None;
        'outer: for x0 in 0..=12i64 {
            for x1 in 0..=12i64 {
                for x2 in 0..=12i64 {
                    let assign =
                        BTreeMap::from([(vs[0], x0), (vs[1], x1), (vs[2], x2)]);
                    if holds(&atoms, &assign) {
                        box_model = Some(assign);
                        break 'outer;
                    }
                }
            }
        }

        match lia::solve(&atoms, None) {
            LiaOutcome::Sat(assign) => {
                prop_assert!(
                    assign.values().all(|&v| v >= 0),
                    "solutions range over nonnegative integers"
                );
                prop_assert!(holds(&atoms, &assign), "returned assignment must satisfy the atoms");
            }
            LiaOutcome::Unsat => {
                prop_assert!(box_model.is_none(), "box search found {box_model:?}");
            }
            LiaOutcome::ResourceLimit => prop_assert!(false, "no budget was set"),
        }
        if box_model.is_some() {
            prop_assert!(matches!(lia::solve(&atoms, None), LiaOutcome::Sat(_)));
        }
    }
}

// ----- printer / parser round-trips -----

proptest! {
    #[test]
    fn printing_then_parsing_reaches_a_fixed_point(seed in any::<u64>()) {
        let p = gen::random_nested(seed);
        let t1 = print_script(&p.ctx, &p.decls, &p.constraints, false);
        let q = parse(&t1).unwrap_or_else(|e| panic!("printed script must parse: {e}\n{t1}"));
        let t2 = print_script(&q.ctx, &q.decls, &q.constraints, q.want_model);
        let q2 = parse(&t2).unwrap_or_else(|e| panic!("reprinted script must parse: {e}\n{t2}"));
        let t3 = print_script(&q2.ctx, &q2.decls, &q2.constraints, q2.want_model);
        prop_assert_eq!(&t2, &t3, "printing must be a fixed point after one round-trip");
        // Cardinality links are never printed directly (their variables
        // render as `(card t)` where used), so a link whose variable fell
        // out of every atom drops on the next round-trip. Every other
        // constraint must survive one for one.
        let hard = |cs: &[Constraint]| {
            cs.iter()
                .filter(|c| !matches!(c, Constraint::CardOf(..)))
                .count()
        };
        prop_assert_eq!(hard(&q.constraints), hard(&q2.constraints));
    }
}
