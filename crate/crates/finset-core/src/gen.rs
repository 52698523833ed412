//! Deterministic problem generators shared by tests and benchmarks.
//!
//! Everything here is seeded: the same seed always yields the same problem,
//! so failures reproduce exactly. The generator is a hand-rolled splitmix64
//! step function rather than an external RNG so that frozen test seeds can
//! never drift with a dependency upgrade.

use std::collections::HashMap;

use crate::ast::{CardAtom, Constraint, Ctx, Rel, Sort, Sym, TermId, TermNode};

/// A generated problem: the context it was built in, the declared symbols
/// (the assignment targets for model enumeration), and the constraints.
pub struct Problem {
    pub ctx: Ctx,
    pub decls: Vec<Sym>,
    pub constraints: Vec<Constraint>,
}

/// Seeded 64-bit generator (splitmix64).
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform-ish value in `0..n`. The modulo bias is irrelevant at the
    /// tiny ranges used here.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// True with probability `num/den`.
    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }

    pub fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.below(xs.len() as u64) as usize]
    }
}

/// Fisher-Yates shuffle.
pub fn shuffle<T>(xs: &mut [T], rng: &mut Rng) {
    for i in (1..xs.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        xs.swap(i, j);
    }
}

fn declare_set_vars(ctx: &mut Ctx, names: &[&str], decls: &mut Vec<Sym>) -> Vec<TermId> {
    names
        .iter()
        .map(|n| {
            let s = ctx.declare(n, Sort::Set).expect("fresh name");
            decls.push(s);
            ctx.var(s).expect("set variable")
        })
        .collect()
}

/// A satisfiable mix of union and intersection equalities with membership
/// constraints that force the overlap structure to be worked out:
/// `S = A ∪ B`, `S = C ∩ D`, `x ∈ C`, `x ∉ D`, `y ∉ S`, `y ∈ D`.
pub fn union_inter_overlap_sat() -> Problem {
    let mut ctx = Ctx::new();
    let mut decls = Vec::new();
    let vars = declare_set_vars(&mut ctx, &["S", "C", "D", "A", "B"], &mut decls);
    let (s, c, d, a, b) = (vars[0], vars[1], vars[2], vars[3], vars[4]);
    let x = ctx.declare("x", Sort::Element).expect("fresh name");
    let y = ctx.declare("y", Sort::Element).expect("fresh name");
    decls.extend([x, y]);
    let a_union_b = ctx.union(a, b);
    let c_inter_d = ctx.inter(c, d);
    let constraints = vec![
        Constraint::SetEq(s, a_union_b),
        Constraint::SetEq(s, c_inter_d),
        Constraint::Member(x, c),
        Constraint::NotMember(x, d),
        Constraint::NotMember(y, s),
        Constraint::Member(y, d),
    ];
    Problem {
        ctx,
        decls,
        constraints,
    }
}

/// The overlap problem made unsatisfiable by cardinality pressure:
/// additionally `card(S) >= 4` and `card(C) + card(D) < 10`.
pub fn union_inter_cardinality_unsat() -> Problem {
    let mut p = union_inter_overlap_sat();
    let var_of = |p: &mut Problem, n: &str| {
        let s = p.ctx.lookup(n).expect("declared above");
        p.ctx.var(s).expect("set variable")
    };
    let s = var_of(&mut p, "S");
    let c = var_of(&mut p, "C");
    let d = var_of(&mut p, "D");
    let cs = p.ctx.declare("cS", Sort::Card).expect("fresh name");
    let cc = p.ctx.declare("cC", Sort::Card).expect("fresh name");
    let cd = p.ctx.declare("cD", Sort::Card).expect("fresh name");
    p.decls.extend([cs, cc, cd]);
    p.constraints.extend([
        Constraint::CardOf(cs, s),
        Constraint::CardOf(cc, c),
        Constraint::CardOf(cd, d),
        Constraint::Arith(CardAtom::simple(cs, Rel::Ge, 4)),
        Constraint::Arith(CardAtom::new([(1, cc), (1, cd)], Rel::Lt, 10)),
    ]);
    p
}

fn chain_base(n: usize) -> (Problem, Vec<TermId>, Sym) {
    assert!(n >= 2, "a union chain needs at least two sets");
    let mut ctx = Ctx::new();
    let mut decls = Vec::new();
    let names: Vec<String> = (1..=n).map(|i| format!("S{i}")).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let vars = declare_set_vars(&mut ctx, &name_refs, &mut decls);
    let x = ctx.declare("x", Sort::Element).expect("fresh name");
    decls.push(x);
    // Right-associated S1 ∪ (S2 ∪ (… ∪ Sn)).
    let mut chain = vars[n - 1];
    for &v in vars[..n - 1].iter().rev() {
        chain = ctx.union(v, chain);
    }
    let constraints = vec![Constraint::Member(x, chain)];
    (
        Problem {
            ctx,
            decls,
            constraints,
        },
        vars,
        x,
    )
}

/// `x ∈ S1 ∪ (S2 ∪ (… ∪ Sn))` — satisfiable after a single split.
pub fn chain_union(n: usize) -> Problem {
    chain_base(n).0
}

/// The chain with every `Si = ∅` — unsatisfiable, found by walking every
/// branch of the chain.
pub fn chain_union_all_empty(n: usize) -> Problem {
    let (mut p, vars, _) = chain_base(n);
    let empty = p.ctx.empty();
    for v in vars {
        p.constraints.push(Constraint::SetEq(v, empty));
    }
    p
}

/// The chain with `x ∉ Si` for every `i` — unsatisfiable by propagation
/// alone, no splits needed.
pub fn chain_union_all_out(n: usize) -> Problem {
    let (mut p, vars, x) = chain_base(n);
    for v in vars {
        p.constraints.push(Constraint::NotMember(x, v));
    }
    p
}

fn push_random_cards(
    ctx: &mut Ctx,
    rng: &mut Rng,
    set_vars: &[TermId],
    decls: &mut Vec<Sym>,
    constraints: &mut Vec<Constraint>,
) {
    let n_tracked = 1 + rng.below(2);
    let mut card_syms = Vec::new();
    for i in 0..n_tracked {
        let c = ctx
            .declare(&format!("k{i}"), Sort::Card)
            .expect("fresh name");
        let s = *rng.pick(set_vars);
        constraints.push(Constraint::CardOf(c, s));
        decls.push(c);
        card_syms.push(c);
    }
    let n_atoms = 1 + rng.below(2);
    for _ in 0..n_atoms {
        let n_terms = 1 + rng.below(2) as usize;
        let mut terms = Vec::new();
        for _ in 0..n_terms {
            terms.push((*rng.pick(&[1i64, -1, 2]), *rng.pick(&card_syms)));
        }
        let rel = *rng.pick(&[Rel::Eq, Rel::Ne, Rel::Lt, Rel::Ge]);
        let rhs = rng.below(11) as i64 - 5;
        constraints.push(Constraint::Arith(CardAtom::new(terms, rel, rhs)));
    }
}

/// A small random problem whose composite terms have variable arguments
/// only: up to 4 set variables, 3 element variables, 6 set/element
/// constraints, and (half the time) up to 2 tracked cardinalities with up
/// to 2 arithmetic atoms over them.
pub fn random_flat(seed: u64) -> Problem {
    let mut rng = Rng::new(seed);
    let mut ctx = Ctx::new();
    let mut decls = Vec::new();
    let n_sets = 2 + rng.below(3) as usize;
    let n_elems = 1 + rng.below(3) as usize;
    let set_names: Vec<String> = (0..n_sets).map(|i| format!("S{i}")).collect();
    let name_refs: Vec<&str> = set_names.iter().map(String::as_str).collect();
    let set_vars = declare_set_vars(&mut ctx, &name_refs, &mut decls);
    let elem_syms: Vec<Sym> = (0..n_elems)
        .map(|i| {
            let s = ctx
                .declare(&format!("x{i}"), Sort::Element)
                .expect("fresh name");
            decls.push(s);
            s
        })
        .collect();

    let mut constraints = Vec::new();
    let n_cons = 3 + rng.below(4) as usize;
    for _ in 0..n_cons {
        let c = match rng.below(8) {
            0 => {
                let s = *rng.pick(&set_vars);
                let a = *rng.pick(&set_vars);
                let b = *rng.pick(&set_vars);
                let comp = match rng.below(3) {
                    0 => ctx.union(a, b),
                    1 => ctx.inter(a, b),
                    _ => ctx.diff(a, b),
                };
                Constraint::SetEq(s, comp)
            }
            1 => {
                let s = *rng.pick(&set_vars);
                let x = *rng.pick(&elem_syms);
                let sg = ctx.singleton(x).expect("element argument");
                Constraint::SetEq(s, sg)
            }
            2 => {
                let s = *rng.pick(&set_vars);
                let t = if rng.chance(1, 4) {
                    ctx.empty()
                } else {
                    *rng.pick(&set_vars)
                };
                Constraint::SetEq(s, t)
            }
            3 => {
                let s = *rng.pick(&set_vars);
                let t = if rng.chance(1, 4) {
                    ctx.empty()
                } else {
                    *rng.pick(&set_vars)
                };
                Constraint::SetNeq(s, t)
            }
            4 | 5 => Constraint::Member(*rng.pick(&elem_syms), *rng.pick(&set_vars)),
            6 => Constraint::NotMember(*rng.pick(&elem_syms), *rng.pick(&set_vars)),
            _ => {
                let x = *rng.pick(&elem_syms);
                let y = *rng.pick(&elem_syms);
                if rng.chance(1, 2) {
                    Constraint::ElemEq(x, y)
                } else {
                    Constraint::ElemNeq(x, y)
                }
            }
        };
        constraints.push(c);
    }
    if rng.chance(1, 2) {
        push_random_cards(&mut ctx, &mut rng, &set_vars, &mut decls, &mut constraints);
    }
    Problem {
        ctx,
        decls,
        constraints,
    }
}

fn random_set_term(
    ctx: &mut Ctx,
    rng: &mut Rng,
    set_vars: &[TermId],
    elem_syms: &[Sym],
    depth: u32,
) -> TermId {
    if depth == 0 || rng.chance(2, 5) {
        return *rng.pick(set_vars);
    }
    match rng.below(5) {
        0 => {
            let x = *rng.pick(elem_syms);
            ctx.singleton(x).expect("element argument")
        }
        1 => {
            let a = random_set_term(ctx, rng, set_vars, elem_syms, depth - 1);
            let b = random_set_term(ctx, rng, set_vars, elem_syms, depth - 1);
            ctx.union(a, b)
        }
        2 => {
            let a = random_set_term(ctx, rng, set_vars, elem_syms, depth - 1);
            let b = random_set_term(ctx, rng, set_vars, elem_syms, depth - 1);
            ctx.inter(a, b)
        }
        3 => {
            let a = random_set_term(ctx, rng, set_vars, elem_syms, depth - 1);
            let b = random_set_term(ctx, rng, set_vars, elem_syms, depth - 1);
            ctx.diff(a, b)
        }
        _ => ctx.empty(),
    }
}

/// Like [`random_flat`], but with set terms nested up to depth 2, exercising
/// the flattening pass.
pub fn random_nested(seed: u64) -> Problem {
    let mut rng = Rng::new(seed.wrapping_mul(0x5851_f42d_4c95_7f2d).wrapping_add(1));
    let mut ctx = Ctx::new();
    let mut decls = Vec::new();
    let n_sets = 2 + rng.below(2) as usize;
    let n_elems = 1 + rng.below(2) as usize;
    let set_names: Vec<String> = (0..n_sets).map(|i| format!("S{i}")).collect();
    let name_refs: Vec<&str> = set_names.iter().map(String::as_str).collect();
    let set_vars = declare_set_vars(&mut ctx, &name_refs, &mut decls);
    let elem_syms: Vec<Sym> = (0..n_elems)
        .map(|i| {
            let s = ctx
                .declare(&format!("x{i}"), Sort::Element)
                .expect("fresh name");
            decls.push(s);
            s
        })
        .collect();

    let mut constraints = Vec::new();
    let n_cons = 2 + rng.below(3) as usize;
    for _ in 0..n_cons {
        let c = match rng.below(6) {
            0 | 1 => {
                let t = random_set_term(&mut ctx, &mut rng, &set_vars, &elem_syms, 2);
                let u = random_set_term(&mut ctx, &mut rng, &set_vars, &elem_syms, 2);
                if rng.chance(3, 4) {
                    Constraint::SetEq(t, u)
                } else {
                    Constraint::SetNeq(t, u)
                }
            }
            2 | 3 => {
                let t = random_set_term(&mut ctx, &mut rng, &set_vars, &elem_syms, 2);
                let x = *rng.pick(&elem_syms);
                if rng.chance(2, 3) {
                    Constraint::Member(x, t)
                } else {
                    Constraint::NotMember(x, t)
                }
            }
            4 => {
                let x = *rng.pick(&elem_syms);
                let y = *rng.pick(&elem_syms);
                if rng.chance(1, 2) {
                    Constraint::ElemEq(x, y)
                } else {
                    Constraint::ElemNeq(x, y)
                }
            }
            _ => {
                // Subset written as s = s ∩ t.
                let s = random_set_term(&mut ctx, &mut rng, &set_vars, &elem_syms, 1);
                let t = random_set_term(&mut ctx, &mut rng, &set_vars, &elem_syms, 1);
                let cap = ctx.inter(s, t);
                Constraint::SetEq(s, cap)
            }
        };
        constraints.push(c);
    }
    if rng.chance(1, 3) {
        push_random_cards(&mut ctx, &mut rng, &set_vars, &mut decls, &mut constraints);
    }
    Problem {
        ctx,
        decls,
        constraints,
    }
}

fn rebuild_term(old: &Ctx, new: &mut Ctx, map: &HashMap<Sym, Sym>, t: TermId) -> TermId {
    match old.node(t) {
        TermNode::Var(v) => new.var(map[&v]).expect("mapped set variable"),
        TermNode::Empty => new.empty(),
        TermNode::Singleton(x) => new.singleton(map[&x]).expect("mapped element"),
        TermNode::Union(a, b) => {
            let (a2, b2) = (rebuild_term(old, new, map, a), rebuild_term(old, new, map, b));
            new.union(a2, b2)
        }
        TermNode::Inter(a, b) => {
            let (a2, b2) = (rebuild_term(old, new, map, a), rebuild_term(old, new, map, b));
            new.inter(a2, b2)
        }
        TermNode::Diff(a, b) => {
            let (a2, b2) = (rebuild_term(old, new, map, a), rebuild_term(old, new, map, b));
            new.diff(a2, b2)
        }
    }
}

fn rebuild_constraint(
    old: &Ctx,
    new: &mut Ctx,
    map: &HashMap<Sym, Sym>,
    c: &Constraint,
) -> Constraint {
    match *c {
        Constraint::SetEq(s, t) => Constraint::SetEq(
            rebuild_term(old, new, map, s),
            rebuild_term(old, new, map, t),
        ),
        Constraint::SetNeq(s, t) => Constraint::SetNeq(
            rebuild_term(old, new, map, s),
            rebuild_term(old, new, map, t),
        ),
        Constraint::Member(x, s) => Constraint::Member(map[&x], rebuild_term(old, new, map, s)),
        Constraint::NotMember(x, s) => {
            Constraint::NotMember(map[&x], rebuild_term(old, new, map, s))
        }
        Constraint::CardOf(v, s) => Constraint::CardOf(map[&v], rebuild_term(old, new, map, s)),
        Constraint::ElemEq(x, y) => Constraint::ElemEq(map[&x], map[&y]),
        Constraint::ElemNeq(x, y) => Constraint::ElemNeq(map[&x], map[&y]),
        Constraint::Arith(ref a) => Constraint::Arith(CardAtom::new(
            a.lhs.iter().map(|&(c, v)| (c, map[&v])),
            a.rel,
            a.rhs,
        )),
    }
}

/// The same problem under a bijective rename of every declared symbol and a
/// shuffle of the constraint order. Verdicts must be invariant under this.
pub fn renamed_shuffled(p: &Problem, seed: u64) -> Problem {
    let mut rng = Rng::new(seed);
    let mut ctx = Ctx::new();
    let mut order: Vec<usize> = (0..p.decls.len()).collect();
    shuffle(&mut order, &mut rng);
    let mut map = HashMap::new();
    let mut decls = Vec::new();
    for (new_i, &old_i) in order.iter().enumerate() {
        let old = p.decls[old_i];
        let sym = ctx
            .declare(&format!("g{new_i}"), p.ctx.sym_sort(old))
            .expect("fresh name");
        map.insert(old, sym);
        decls.push(sym);
    }
    let mut constraints: Vec<Constraint> = p
        .constraints
        .iter()
        .map(|c| rebuild_constraint(&p.ctx, &mut ctx, &map, c))
        .collect();
    shuffle(&mut constraints, &mut rng);
    Problem {
        ctx,
        decls,
        constraints,
    }
}
