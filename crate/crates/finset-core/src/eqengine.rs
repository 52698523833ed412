//! Union-find over element variables with disequalities and exact undo.
//!
//! Equalities are merged with union-by-size (ties keep the smaller root
//! index). Paths are deliberately *not* compressed: every mutation is a
//! single parent/size update recorded on a trail, so [`EqEngine::undo_to`]
//! restores any earlier [`EqEngine::mark`] exactly, in time proportional to
//! the number of undone operations.
//!
//! Disequalities are stored as the original symbol pairs and evaluated
//! against current roots, which closes them under the known equalities: after
//! `x != y` and `y = z`, the query `x != z` holds.

use std::collections::{BTreeMap, HashMap};

use crate::ast::Sym;

/// Restore point returned by [`EqEngine::mark`].
pub type Mark = usize;

#[derive(Debug)]
enum Trail {
    Register(Sym),
    Union { loser: u32 },
    Diseq,
}

/// Incremental equality/disequality store over element variables.
#[derive(Debug, Default)]
pub struct EqEngine {
    parent: Vec<u32>,
    size: Vec<u32>,
    syms: Vec<Sym>,
    ids: HashMap<Sym, u32>,
    diseqs: Vec<(Sym, Sym)>,
    trail: Vec<Trail>,
}

impl EqEngine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ensures `s` has a dense id; registration order is significant (it
    /// drives class ordering) and is undone by `undo_to` like any mutation.
    pub fn register(&mut self, s: Sym) -> u32 {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.size.push(1);
        self.syms.push(s);
        self.ids.insert(s, id);
        self.trail.push(Trail::Register(s));
        id
    }

    pub fn is_registered(&self, s: Sym) -> bool {
        self.ids.contains_key(&s)
    }

    fn find(&self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            i = self.parent[i as usize];
        }
        i
    }

    /// Root id of a registered symbol.
    fn root_id(&self, s: Sym) -> Option<u32> {
        self.ids.get(&s).map(|&i| self.find(i))
    }

    /// Dense class id of `s`'s class (its root index), if registered. Class
    /// ids order classes by root registration.
    pub fn root_index(&self, s: Sym) -> Option<u32> {
        self.root_id(s)
    }

    /// Asserts `a = b`. Returns true if the state changed.
    pub fn merge(&mut self, a: Sym, b: Sym) -> bool {
        let ia = self.register(a);
        let ib = self.register(b);
        let ra = self.find(ia);
        let rb = self.find(ib);
        if ra == rb {
            return false;
        }
        let (winner, loser) = match self.size[ra as usize].cmp(&self.size[rb as usize]) {
            std::cmp::Ordering::Greater => (ra, rb),
            std::cmp::Ordering::Less => (rb, ra),
            std::cmp::Ordering::Equal => (ra.min(rb), ra.max(rb)),
        };
        self.parent[loser as usize] = winner;
        self.size[winner as usize] += self.size[loser as usize];
        self.trail.push(Trail::Union { loser });
        true
    }

    /// Asserts `a != b` (recorded even if redundant; callers dedupe via
    /// [`EqEngine::in_diseq_closure`] when they need closed adds).
    pub fn add_diseq(&mut self, a: Sym, b: Sym) {
        self.register(a);
        self.register(b);
        self.diseqs.push((a, b));
        self.trail.push(Trail::Diseq);
    }

    /// Is `a = b` entailed? Reflexivity holds even for unregistered symbols.
    pub fn in_eq_closure(&self, a: Sym, b: Sym) -> bool {
        if a == b {
            return true;
        }
        match (self.root_id(a), self.root_id(b)) {
            (Some(ra), Some(rb)) => ra == rb,
            _ => false,
        }
    }

    /// Is `a != b` entailed, i.e. is some asserted disequality between the
    /// classes of `a` and `b`?
    pub fn in_diseq_closure(&self, a: Sym, b: Sym) -> bool {
        let (ra, rb) = match (self.root_id(a), self.root_id(b)) {
            (Some(ra), Some(rb)) => (ra, rb),
            _ => return false,
        };
        self.diseqs.iter().any(|&(p, q)| {
            let rp = self.root_id(p).expect("diseq symbols are registered");
            let rq = self.root_id(q).expect("diseq symbols are registered");
            (rp == ra && rq == rb) || (rp == rb && rq == ra)
        })
    }

    /// First disequality whose two sides have been merged, if any.
    pub fn inconsistency(&self) -> Option<(Sym, Sym)> {
        self.diseqs.iter().copied().find(|&(p, q)| {
            self.root_id(p).expect("registered") == self.root_id(q).expect("registered")
        })
    }

    /// Equivalence classes: ordered by root registration index, members in
    /// registration order.
    pub fn classes(&self) -> Vec<Vec<Sym>> {
        let mut by_root: BTreeMap<u32, Vec<Sym>> = BTreeMap::new();
        for (i, &s) in self.syms.iter().enumerate() {
            by_root.entry(self.find(i as u32)).or_default().push(s);
        }
        by_root.into_values().collect()
    }

    /// Representative symbol of `s`'s class (the root), if registered.
    pub fn rep_of(&self, s: Sym) -> Option<Sym> {
        self.root_id(s).map(|r| self.syms[r as usize])
    }

    /// Asserted disequalities, as originally given.
    pub fn diseqs(&self) -> &[(Sym, Sym)] {
        &self.diseqs
    }

    pub fn mark(&self) -> Mark {
        self.trail.len()
    }

    /// Rewinds every mutation made after `mark`, restoring the exact state.
    pub fn undo_to(&mut self, mark: Mark) {
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                Trail::Register(s) => {
                    self.parent.pop();
                    self.size.pop();
                    self.syms.pop();
                    self.ids.remove(&s);
                }
                Trail::Union { loser } => {
                    let winner = self.parent[loser as usize];
                    self.size[winner as usize] -= self.size[loser as usize];
                    self.parent[loser as usize] = loser;
                }
                Trail::Diseq => {
                    self.diseqs.pop();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Ctx, Sort};

    fn syms(n: usize) -> (Ctx, Vec<Sym>) {
        let mut ctx = Ctx::new();
        let v = (0..n)
            .map(|i| ctx.declare(&format!("x{i}"), Sort::Element).unwrap())
            .collect();
        (ctx, v)
    }

    #[test]
    fn union_by_size_with_index_tie_break() {
        let (_ctx, v) = syms(4);
        let mut eq = EqEngine::new();
        for &s in &v {
            eq.register(s);
        }
        assert!(eq.merge(v[2], v[3])); // tie: root is x2 (smaller index)
        assert_eq!(eq.rep_of(v[3]), Some(v[2]));
        assert!(eq.merge(v[1], v[2])); // size 1 vs 2: root stays x2
        assert_eq!(eq.rep_of(v[1]), Some(v[2]));
        assert!(!eq.merge(v[3], v[1])); // already equal: no change
        assert_eq!(eq.classes(), vec![vec![v[0]], vec![v[1], v[2], v[3]]]);
    }

    #[test]
    fn equality_closure_is_reflexive_even_unregistered() {
        let (_ctx, v) = syms(2);
        let eq = EqEngine::new();
        assert!(eq.in_eq_closure(v[0], v[0]));
        assert!(!eq.in_eq_closure(v[0], v[1]));
    }

    #[test]
    fn disequalities_close_under_equalities() {
        let (_ctx, v) = syms(3);
        let mut eq = EqEngine::new();
        eq.add_diseq(v[0], v[1]);
        assert!(eq.in_diseq_closure(v[0], v[1]));
        assert!(!eq.in_diseq_closure(v[0], v[2]));
        eq.merge(v[1], v[2]);
        assert!(eq.in_diseq_closure(v[0], v[2]));
        assert!(eq.inconsistency().is_none());
        eq.merge(v[0], v[2]);
        assert_eq!(eq.inconsistency(), Some((v[0], v[1])));
    }

    #[test]
    fn self_disequality_is_detected_through_merges() {
        let (_ctx, v) = syms(2);
        let mut eq = EqEngine::new();
        eq.add_diseq(v[0], v[1]);
        eq.merge(v[0], v[1]);
        assert!(eq.in_diseq_closure(v[0], v[0]));
    }

    #[test]
    fn undo_restores_exact_state() {
        let (_ctx, v) = syms(5);
        let mut eq = EqEngine::new();
        eq.merge(v[0], v[1]);
        eq.add_diseq(v[0], v[2]);
        let mark = eq.mark();
        let classes_before = eq.classes();
        eq.merge(v[2], v[3]);
        eq.merge(v[0], v[4]);
        eq.add_diseq(v[3], v[4]);
        eq.register(v[4]);
        eq.undo_to(mark);
        assert_eq!(eq.classes(), classes_before);
        assert_eq!(eq.diseqs().len(), 1);
        assert!(!eq.is_registered(v[3]));
        assert!(!eq.is_registered(v[4]));
        assert!(eq.in_eq_closure(v[0], v[1]));
        assert!(!eq.in_diseq_closure(v[0], v[3]));
    }

    #[test]
    fn undo_through_nested_marks() {
        let (_ctx, v) = syms(6);
        let mut eq = EqEngine::new();
        let m0 = eq.mark();
        eq.merge(v[0], v[1]);
        let m1 = eq.mark();
        eq.merge(v[2], v[3]);
        eq.merge(v[0], v[2]);
        eq.undo_to(m1);
        assert!(eq.in_eq_closure(v[0], v[1]));
        assert!(!eq.in_eq_closure(v[0], v[2]));
        assert!(!eq.in_eq_closure(v[2], v[3]));
        eq.undo_to(m0);
        assert!(!eq.in_eq_closure(v[0], v[1]));
        assert_eq!(eq.classes(), Vec::<Vec<Sym>>::new());
    }

    #[test]
    fn classes_order_members_by_registration() {
        let (_ctx, v) = syms(4);
        let mut eq = EqEngine::new();
        eq.register(v[3]);
        eq.register(v[0]);
        eq.merge(v[1], v[3]); // registers x1 third; root x3 (earlier registration, tie on size? sizes 1,1 -> smaller root id = x3's id 0)
        assert_eq!(eq.classes(), vec![vec![v[3], v[1]], vec![v[0]]]);
    }
}
