//! Exact integer feasibility for conjunctions of linear cardinality atoms.
//!
//! All variables are implicitly nonnegative integers. Atoms are canonicalized
//! to `sum <= rhs` and `sum = rhs` rows (`>=` by negation, `<` by decrementing
//! the bound); every `!=` atom is split depth-first into `<= b-1` then
//! `>= b+1`. Each fully split system is decided by branch-and-bound over an
//! exact rational phase-1 simplex, so there is no floating-point error
//! anywhere. Bland's rule makes every pivot sequence finite, and branching
//! always picks the most fractional variable (ties to the lowest index, lower
//! branch first), which keeps answers deterministic.
//!
//! Every node is presolved before the relaxation is solved: constant rows are
//! checked and dropped, each row is divided by its coefficient gcd (with the
//! divisibility test on equalities), rows sharing a direction are merged into
//! a single window (an empty window refutes, a closed one becomes an
//! equality), and equality rows are eliminated — by substitution when one of
//! their coefficients is a unit, and otherwise by a residue rewrite that
//! shrinks coefficients over fresh auxiliary variables until a unit appears.
//! Branching values are capped by an a-priori bound on the smallest solution
//! of the node's system, so the search is complete — Unsat genuinely means no
//! nonnegative integer solution exists. With a budget (and on pathological
//! searches that exceed an internal depth ceiling) it returns
//! [`LiaOutcome::ResourceLimit`] instead of an answer.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ast::{CardAtom, Rel, Sym};

/// Result of a feasibility check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LiaOutcome {
    /// A satisfying assignment for every variable occurring in the atoms.
    Sat(BTreeMap<Sym, i64>),
    Unsat,
    /// The node budget ran out before the search finished.
    ResourceLimit,
}

type Rat = BigRational;

/// One canonical row: `sum(coeffs) (<=|=) rhs` over dense variable indices,
/// coefficients sorted by index and free of zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Row {
    coeffs: Vec<(usize, BigInt)>,
    le: bool,
    rhs: BigInt,
}

/// A recorded equality elimination: `var = konst + sum(terms)`.
struct Subst {
    var: usize,
    konst: BigInt,
    terms: Vec<(usize, BigInt)>,
}

enum Inner {
    Sat(Vec<BigInt>),
    Unsat,
    Limit,
}

/// Decides `atoms` over nonnegative integers. `budget` caps the number of
/// linear-programming relaxations solved.
pub fn solve(atoms: &[CardAtom], budget: Option<u64>) -> LiaOutcome {
    let mut var_set: BTreeSet<Sym> = BTreeSet::new();
    for a in atoms {
        var_set.extend(a.vars());
    }
    let ordered: Vec<Sym> = var_set.into_iter().collect();
    let index: HashMap<Sym, usize> = ordered.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = ordered.len();

    let mut rows: Vec<Row> = Vec::new();
    let mut nes: Vec<(Vec<(usize, BigInt)>, BigInt)> = Vec::new();
    for a in atoms {
        let lhs: Vec<(usize, BigInt)> = a
            .lhs
            .iter()
            .map(|&(c, v)| (index[&v], BigInt::from(c)))
            .collect();
        let rhs = BigInt::from(a.rhs);
        match a.rel {
            Rel::Eq => rows.push(Row { coeffs: lhs, le: false, rhs }),
            Rel::Ge => rows.push(Row { coeffs: negate(&lhs), le: true, rhs: -rhs }),
            Rel::Lt => rows.push(Row { coeffs: lhs, le: true, rhs: rhs - 1 }),
            Rel::Ne => nes.push((lhs, rhs)),
        }
    }

    let mut remaining = budget.unwrap_or(u64::MAX);
    match ne_dfs(rows, &nes, 0, n, &mut remaining) {
        Inner::Unsat => LiaOutcome::Unsat,
        Inner::Limit => LiaOutcome::ResourceLimit,
        Inner::Sat(vals) => {
            let map = ordered
                .into_iter()
                .zip(vals)
                .map(|(s, v)| {
                    let v = v.to_i64().expect("integer solution exceeds i64 range");
                    (s, v)
                })
                .collect();
            LiaOutcome::Sat(map)
        }
    }
}

/// True iff `atoms` literally contains the single-variable bound
/// `1*var >= k` for some `k >= n`. This is a syntactic check, not entailment.
pub fn syntactic_geq(atoms: &[CardAtom], var: Sym, n: i64) -> bool {
    atoms.iter().any(|a| {
        a.rel == Rel::Ge && a.rhs >= n && a.lhs.len() == 1 && a.lhs[0] == (1, var)
    })
}

/// True iff `atoms` literally contains the single-variable bound
/// `1*var < k` for some `k <= n`. Syntactic counterpart of [`syntactic_geq`]
/// for the other branch of a guessed bound.
pub fn syntactic_lt(atoms: &[CardAtom], var: Sym, n: i64) -> bool {
    atoms.iter().any(|a| {
        a.rel == Rel::Lt && a.rhs <= n && a.lhs.len() == 1 && a.lhs[0] == (1, var)
    })
}

fn negate(lhs: &[(usize, BigInt)]) -> Vec<(usize, BigInt)> {
    lhs.iter().map(|(i, c)| (*i, -c)).collect()
}

/// Splits each `!=` atom into its two half-spaces, lower side first.
fn ne_dfs(
    rows: Vec<Row>,
    nes: &[(Vec<(usize, BigInt)>, BigInt)],
    k: usize,
    n: usize,
    budget: &mut u64,
) -> Inner {
    if k == nes.len() {
        let cap = small_model_bound(&rows, n);
        return decide(rows, n, 0, budget, &cap);
    }
    let (lhs, b) = &nes[k];
    let mut low = rows.clone();
    low.push(Row {
        coeffs: lhs.clone(),
        le: true,
        rhs: b - 1,
    });
    match ne_dfs(low, nes, k + 1, n, budget) {
        Inner::Unsat => {}
        other => return other,
    }
    let mut high = rows;
    high.push(Row {
        coeffs: negate(lhs),
        le: true,
        rhs: -(b + BigInt::from(1)),
    });
    ne_dfs(high, nes, k + 1, n, budget)
}

/// An a-priori cap on the smallest nonnegative integer solution of `rows`
/// (Hadamard-style bound on basic solutions, deliberately generous). If the
/// system has any solution it has one with every variable below this value,
/// so branch lower bounds beyond it can be pruned without losing
/// completeness.
fn small_model_bound(rows: &[Row], n: usize) -> BigInt {
    let mut a = BigInt::from(2);
    for row in rows {
        for (_, c) in &row.coeffs {
            if c.abs() > a {
                a = c.abs();
            }
        }
        if row.rhs.abs() > a {
            a = row.rhs.abs();
        }
    }
    let m = rows.len() + n + 2;
    num_traits::pow(BigInt::from(m) * a, 2 * m + 5) * BigInt::from(n + 2)
}

/// Symmetric residue of `c` modulo `m`, in `(-m/2, m/2]`.
fn smod(c: &BigInt, m: &BigInt) -> BigInt {
    let r = c.mod_floor(m);
    if &r * 2 > *m {
        r - m
    } else {
        r
    }
}

/// Replaces `s.var` in `row` by its defining expression.
fn substitute(row: &mut Row, s: &Subst) {
    let Some(pos) = row.coeffs.iter().position(|&(i, _)| i == s.var) else {
        return;
    };
    let b = row.coeffs.remove(pos).1;
    let mut map: BTreeMap<usize, BigInt> = row.coeffs.drain(..).collect();
    for (k, e) in &s.terms {
        *map.entry(*k).or_default() += &b * e;
    }
    row.rhs -= &b * &s.konst;
    row.coeffs = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
}

/// The per-direction bound window accumulated by [`presolve`].
#[derive(Default)]
struct Window {
    lb: Option<BigInt>,
    ub: Option<BigInt>,
    eq: Option<BigInt>,
}

/// Simplifies `rows` to a fixed point and records equality eliminations in
/// `subst` (application order). Returns false when the system is refuted
/// outright. The passes repeat until nothing changes: constant-row checks,
/// gcd tightening (with the divisibility test on equalities), consolidation
/// of rows sharing a direction into one window, and elimination of equality
/// rows — by direct substitution when a unit coefficient is available, and
/// otherwise through a coefficient-shrinking rewrite that introduces fresh
/// auxiliary variables (tracked in `width`).
fn presolve(rows: &mut Vec<Row>, subst: &mut Vec<Subst>, width: &mut usize) -> bool {
    loop {
        // Constant rows are checked and dropped.
        let mut unsat = false;
        rows.retain(|row| {
            if !row.coeffs.is_empty() {
                return true;
            }
            let holds = if row.le {
                BigInt::zero() <= row.rhs
            } else {
                row.rhs.is_zero()
            };
            if !holds {
                unsat = true;
            }
            false
        });
        if unsat {
            return false;
        }

        // Gcd tightening.
        for row in rows.iter_mut() {
            let mut g = BigInt::zero();
            for (_, c) in &row.coeffs {
                g = g.gcd(c);
            }
            if g <= BigInt::one() {
                continue;
            }
            if row.le {
                for (_, c) in row.coeffs.iter_mut() {
                    *c = &*c / &g;
                }
                row.rhs = row.rhs.div_floor(&g);
            } else {
                if !row.rhs.is_multiple_of(&g) {
                    return false;
                }
                for (_, c) in row.coeffs.iter_mut() {
                    *c = &*c / &g;
                }
                row.rhs = &row.rhs / &g;
            }
        }

        // Rows sharing a direction collapse into a single window. The
        // canonical direction makes its first coefficient positive; an upper
        // bound on the flipped direction is a lower bound on the canonical
        // one. A closed window becomes an equality; an empty one refutes.
        let old = std::mem::take(rows);
        let mut windows: BTreeMap<Vec<(usize, BigInt)>, Window> = BTreeMap::new();
        for row in &old {
            let mut dir = row.coeffs.clone();
            dir.sort_by(|a, b| a.0.cmp(&b.0));
            let flip = dir[0].1 < BigInt::zero();
            if flip {
                dir = negate(&dir);
            }
            let w = windows.entry(dir).or_default();
            match (row.le, flip) {
                (true, false) => {
                    if w.ub.as_ref().is_none_or(|u| row.rhs < *u) {
                        w.ub = Some(row.rhs.clone());
                    }
                }
                (true, true) => {
                    let lb = -row.rhs.clone();
                    if w.lb.as_ref().is_none_or(|l| lb > *l) {
                        w.lb = Some(lb);
                    }
                }
                (false, flipped) => {
                    let v = if flipped { -row.rhs.clone() } else { row.rhs.clone() };
                    match &w.eq {
                        Some(e) if *e != v => return false,
                        _ => w.eq = Some(v),
                    }
                }
            }
        }
        for (dir, mut w) in windows {
            // A direction with only positive coefficients is nonnegative for
            // free, which turns a zero upper bound into an equality and a
            // negative one into a refutation. The implied bound itself is
            // never materialized as a row.
            let all_pos = dir.iter().all(|(_, c)| c.is_positive());
            if all_pos && w.lb.as_ref().is_none_or(|l| l.is_negative()) {
                w.lb = Some(BigInt::zero());
            }
            if let Some(e) = w.eq {
                if w.ub.as_ref().is_some_and(|u| e > *u) || w.lb.as_ref().is_some_and(|l| e < *l)
                {
                    return false;
                }
                rows.push(Row { coeffs: dir, le: false, rhs: e });
                continue;
            }
            match (w.lb, w.ub) {
                (Some(l), Some(u)) if l > u => return false,
                (Some(l), Some(u)) if l == u => {
                    rows.push(Row { coeffs: dir, le: false, rhs: u });
                }
                (lb, ub) => {
                    if let Some(u) = ub {
                        rows.push(Row { coeffs: dir.clone(), le: true, rhs: u });
                    }
                    if let Some(l) = lb {
                        if !(all_pos && !l.is_positive()) {
                            rows.push(Row { coeffs: negate(&dir), le: true, rhs: -l });
                        }
                    }
                }
            }
        }
        let mut changed = *rows != old;

        // One unit-coefficient equality is eliminated per round; the loop
        // picks up follow-on simplifications. When every equality lacks a
        // unit coefficient, one of them is rewritten against a fresh
        // auxiliary so that a unit appears.
        let unit = rows.iter().position(|r| {
            !r.le && r.coeffs.iter().any(|(_, c)| c.abs().is_one())
        });
        if let Some(i) = unit {
            let row = rows.remove(i);
            let (j, c) = row
                .coeffs
                .iter()
                .find(|(_, c)| c.abs().is_one())
                .map(|(j, c)| (*j, c.clone()))
                .expect("a unit coefficient was just found");
            // c*x + rest = rhs  =>  x = c*rhs - sum(c*a_k x_k), using c = 1/c.
            let konst = &c * &row.rhs;
            let terms: Vec<(usize, BigInt)> = row
                .coeffs
                .iter()
                .filter(|&&(k, _)| k != j)
                .map(|(k, a)| (*k, -(&c * a)))
                .collect();
            let s = Subst { var: j, konst, terms };
            for r in rows.iter_mut() {
                substitute(r, &s);
            }
            // The eliminated variable stays nonnegative: expr >= 0.
            rows.push(Row {
                coeffs: negate(&s.terms),
                le: true,
                rhs: s.konst.clone(),
            });
            subst.push(s);
            changed = true;
        } else if let Some(i) = rows.iter().position(|r| !r.le && !r.coeffs.is_empty()) {
            // Every coefficient of this equality has magnitude >= 2. Taking
            // symmetric residues modulo m = |a|+1, where a is the smallest
            // coefficient (on variable x), yields an equivalent equation
            // with a fresh integer variable sigma in which x carries the
            // unit coefficient -sign(a):
            //   -sign(a)*x + sum smod(a_k, m)*x_k = smod(rhs, m) + m*sigma.
            // Solving it for x and substituting makes the original row's
            // coefficients divisible by m, so gcd tightening shrinks them;
            // repetition terminates because they shrink geometrically.
            // sigma has no sign restriction and enters as the difference of
            // two fresh nonnegative variables.
            let row = rows[i].clone();
            let (j, a) = row
                .coeffs
                .iter()
                .min_by_key(|(_, c)| c.abs())
                .map(|(j, c)| (*j, c.clone()))
                .expect("the equality row is nonempty");
            let m = a.abs() + BigInt::one();
            let sign = if a.is_negative() {
                BigInt::from(-1)
            } else {
                BigInt::one()
            };
            let sp = *width;
            let sm = *width + 1;
            *width += 2;
            let konst = -&sign * smod(&row.rhs, &m);
            let mut terms: Vec<(usize, BigInt)> = row
                .coeffs
                .iter()
                .filter(|&&(k, _)| k != j)
                .map(|(k, c)| (*k, &sign * smod(c, &m)))
                .filter(|(_, c)| !c.is_zero())
                .collect();
            terms.push((sp, -&sign * &m));
            terms.push((sm, &sign * &m));
            let s = Subst { var: j, konst, terms };
            for r in rows.iter_mut() {
                substitute(r, &s);
            }
            rows.push(Row {
                coeffs: negate(&s.terms),
                le: true,
                rhs: s.konst.clone(),
            });
            subst.push(s);
            changed = true;
        }

        if !changed {
            return true;
        }
    }
}

/// Hard ceiling on branching depth. Genuine systems stay within tens of
/// levels; a path this deep signals a pathological search, which is cut off
/// as a resource limit rather than risking stack exhaustion.
const MAX_DEPTH: usize = 2048;

/// Complete bounded branch-and-bound. `cap` prunes lower-bound branches
/// beyond the small-model bound of the root system, which keeps the search
/// finite on relaxation-feasible but integer-infeasible unbounded systems.
/// `n` counts the variables live at this node; presolve may add auxiliaries,
/// so the returned assignment can be longer than the caller's count.
fn decide(mut rows: Vec<Row>, n: usize, depth: usize, budget: &mut u64, cap: &BigInt) -> Inner {
    let mut subst = Vec::new();
    let mut width = n;
    if !presolve(&mut rows, &mut subst, &mut width) {
        return Inner::Unsat;
    }
    if *budget == 0 || depth > MAX_DEPTH {
        return Inner::Limit;
    }
    *budget -= 1;
    let Some(vals) = phase1_feasible(&rows, width) else {
        return Inner::Unsat;
    };

    // Most fractional variable; ties break to the lowest index.
    let mut pick: Option<(usize, Rat)> = None;
    for (j, v) in vals.iter().enumerate() {
        let frac = v.fract();
        if frac.is_zero() {
            continue;
        }
        let one = Rat::from_integer(BigInt::from(1));
        let dist = std::cmp::min(frac.clone(), one - frac);
        if pick.as_ref().is_none_or(|(_, best)| dist > *best) {
            pick = Some((j, dist));
        }
    }
    let outcome = match pick {
        None => Inner::Sat(vals.into_iter().map(|v| v.to_integer()).collect()),
        Some((j, _)) => {
            let fl = vals[j].floor().to_integer();
            let mut low = rows.clone();
            low.push(Row {
                coeffs: vec![(j, BigInt::from(1))],
                le: true,
                rhs: fl.clone(),
            });
            match decide(low, width, depth + 1, budget, cap) {
                Inner::Unsat => {
                    let lb = fl + BigInt::one();
                    if lb > *cap {
                        Inner::Unsat
                    } else {
                        let mut high = rows;
                        high.push(Row {
                            coeffs: vec![(j, BigInt::from(-1))],
                            le: true,
                            rhs: -lb,
                        });
                        decide(high, width, depth + 1, budget, cap)
                    }
                }
                other => other,
            }
        }
    };
    match outcome {
        Inner::Sat(mut ints) => {
            for s in subst.iter().rev() {
                let mut v = s.konst.clone();
                for (k, e) in &s.terms {
                    v += e * &ints[*k];
                }
                ints[s.var] = v;
            }
            Inner::Sat(ints)
        }
        other => other,
    }
}

/// Phase-1 simplex: returns values for the `n` structural variables of a
/// basic feasible solution of `rows` (with all variables nonnegative), or
/// `None` when the linear relaxation is infeasible.
fn phase1_feasible(rows: &[Row], n: usize) -> Option<Vec<Rat>> {
    let zero = || Rat::zero();
    if rows.is_empty() {
        return Some(vec![zero(); n]);
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.le).count();
    let mut width = n + n_slack;

    let mut t: Vec<Vec<Rat>> = vec![vec![zero(); width]; m];
    let mut rhs: Vec<Rat> = Vec::with_capacity(m);
    let mut slack = n;
    for (i, row) in rows.iter().enumerate() {
        for (j, c) in &row.coeffs {
            t[i][*j] += Rat::from_integer(c.clone());
        }
        if row.le {
            t[i][slack] = Rat::from_integer(BigInt::from(1));
            slack += 1;
        }
        rhs.push(Rat::from_integer(row.rhs.clone()));
    }
    // Normalize to nonnegative right-hand sides.
    for i in 0..m {
        if rhs[i] < zero() {
            for v in t[i].iter_mut() {
                *v = -v.clone();
            }
            rhs[i] = -rhs[i].clone();
        }
    }

    // Choose an initial basis from existing unit columns, then complete it
    // with artificial variables.
    let one = Rat::from_integer(BigInt::from(1));
    let mut basis: Vec<Option<usize>> = vec![None; m];
    let mut col_used = vec![false; width];
    for j in 0..width {
        let mut nonzero_row = None;
        let mut unique = true;
        for i in 0..m {
            if !t[i][j].is_zero() {
                if nonzero_row.is_some() {
                    unique = false;
                    break;
                }
                nonzero_row = Some(i);
            }
        }
        if !unique {
            continue;
        }
        if let Some(i) = nonzero_row {
            if t[i][j] == one && basis[i].is_none() && !col_used[j] {
                basis[i] = Some(j);
                col_used[j] = true;
            }
        }
    }
    let artificial_start = width;
    for i in 0..m {
        if basis[i].is_none() {
            for (r, trow) in t.iter_mut().enumerate() {
                trow.push(if r == i { one.clone() } else { zero() });
            }
            basis[i] = Some(width);
            width += 1;
        }
    }
    let mut basis: Vec<usize> = basis.into_iter().map(|b| b.unwrap()).collect();

    // Reduced costs for minimizing the sum of artificial variables.
    let is_art = |j: usize| j >= artificial_start;
    let mut red: Vec<Rat> = (0..width)
        .map(|j| {
            let c_j = if is_art(j) { one.clone() } else { zero() };
            let mut s = c_j;
            for i in 0..m {
                if is_art(basis[i]) {
                    s -= &t[i][j];
                }
            }
            s
        })
        .collect();
    let mut w: Rat = (0..m)
        .filter(|&i| is_art(basis[i]))
        .map(|i| rhs[i].clone())
        .fold(zero(), |a, b| a + b);

    loop {
        // Bland's rule: the lowest-index column with negative reduced cost.
        let Some(enter) = (0..width).find(|&j| red[j] < zero()) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best: Option<Rat> = None;
        for i in 0..m {
            if t[i][enter] > zero() {
                let ratio = &rhs[i] / &t[i][enter];
                let better = match &best {
                    None => true,
                    Some(b) => {
                        ratio < *b || (ratio == *b && basis[i] < basis[leave.unwrap()])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let r = leave.expect("phase-1 objective is bounded below by zero");

        // Pivot on (r, enter).
        let pivot = t[r][enter].clone();
        for v in t[r].iter_mut() {
            *v = v.clone() / &pivot;
        }
        rhs[r] = rhs[r].clone() / &pivot;
        for i in 0..m {
            if i == r || t[i][enter].is_zero() {
                continue;
            }
            let factor = t[i][enter].clone();
            for j in 0..width {
                let delta = &factor * &t[r][j];
                t[i][j] -= delta;
            }
            let delta = &factor * &rhs[r];
            rhs[i] -= delta;
        }
        let factor = red[enter].clone();
        for j in 0..width {
            let delta = &factor * &t[r][j];
            red[j] -= delta;
        }
        let delta = &factor * &rhs[r];
        w += delta;
        basis[r] = enter;
    }

    if !w.is_zero() {
        return None;
    }
    let mut vals = vec![zero(); n];
    for i in 0..m {
        if basis[i] < n {
            vals[basis[i]] = rhs[i].clone();
        }
    }
    Some(vals)
}
