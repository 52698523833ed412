//! Region graph for cardinality reasoning.
//!
//! The graph decomposes set terms into disjoint regions lazily. A vertex is a
//! set term; edges point from a term to the regions that partition it. Adding
//! a composite `T op U` introduces the three regions `T \ U`, `T inter U`,
//! `U \ T` with edges from `T` and `U` (and from `T union U` to all three,
//! when the composite is a union). The *nonempty leaves* of a vertex are the
//! childless vertices reachable from it that are not currently equated with
//! the empty set; their cardinalities sum to the vertex's cardinality.
//!
//! Equating two terms whose region sets differ is resolved by
//! [`CardGraph::merge`]: the regions unique to each side are refined into
//! pairwise intersections, after which both sides decompose into the same
//! regions. Merging is quadratic in the number of differing regions, which
//! is why regions guessed empty are excluded up front.
//!
//! All traversals report vertices in insertion order, so the whole structure
//! is deterministic. [`CardGraph::mark`]/[`CardGraph::undo_to`] rewind
//! vertex and edge additions exactly, in reverse insertion order.

use std::collections::{HashMap, HashSet};

use crate::ast::{Constraint, Ctx, TermId, TermNode};
use crate::setrules::{ClosureIndex, Concl, Kind, RuleInstance, RuleTag};

/// Restore point for [`CardGraph::undo_to`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphMark {
    verts: usize,
    edges: usize,
}

/// The region graph: a DAG from set terms down to their regions.
#[derive(Debug, Default)]
pub struct CardGraph {
    verts: Vec<TermId>,
    pos: HashMap<TermId, usize>,
    children: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    edge_set: HashSet<(usize, usize)>,
}

impl CardGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, t: TermId) -> bool {
        self.pos.contains_key(&t)
    }

    /// Is `t` a childless vertex? Panics if `t` is not a vertex.
    pub fn is_leaf(&self, t: TermId) -> bool {
        self.children[self.pos[&t]].is_empty()
    }

    pub fn vertices(&self) -> &[TermId] {
        &self.verts
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as (parent, child) vertex positions, in insertion order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn add_vertex(&mut self, t: TermId) -> bool {
        if self.pos.contains_key(&t) {
            return false;
        }
        self.pos.insert(t, self.verts.len());
        self.verts.push(t);
        self.children.push(Vec::new());
        true
    }

    fn add_edge(&mut self, parent: TermId, child: TermId) {
        let p = self.pos[&parent];
        let c = self.pos[&child];
        if self.edge_set.insert((p, c)) {
            self.edges.push((p, c));
            self.children[p].push(c);
        }
    }

    /// Adds `t` to the graph: a bare vertex for variables, the empty set and
    /// singletons; the three-region decomposition for composites. Returns the
    /// newly created vertices in insertion order.
    pub fn add_node(&mut self, ctx: &mut Ctx, t: TermId) -> Vec<TermId> {
        let mut created = Vec::new();
        let add = |g: &mut Self, term: TermId, created: &mut Vec<TermId>| {
            if g.add_vertex(term) {
                created.push(term);
            }
        };
        match ctx.node(t) {
            TermNode::Var(_) | TermNode::Empty | TermNode::Singleton(_) => {
                add(self, t, &mut created);
            }
            TermNode::Union(a, b) | TermNode::Inter(a, b) | TermNode::Diff(a, b) => {
                let left = ctx.diff(a, b);
                let mid = ctx.inter(a, b);
                let right = ctx.diff(b, a);
                add(self, a, &mut created);
                add(self, b, &mut created);
                add(self, left, &mut created);
                add(self, mid, &mut created);
                add(self, right, &mut created);
                if matches!(ctx.node(t), TermNode::Union(..)) {
                    add(self, t, &mut created);
                }
                self.add_edge(a, left);
                self.add_edge(a, mid);
                self.add_edge(b, mid);
                self.add_edge(b, right);
                if matches!(ctx.node(t), TermNode::Union(..)) {
                    self.add_edge(t, left);
                    self.add_edge(t, mid);
                    self.add_edge(t, right);
                }
            }
        }
        created
    }

    /// All childless vertices, in insertion order.
    pub fn leaves(&self) -> Vec<TermId> {
        self.verts
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.children[i].is_empty())
            .map(|(_, &t)| t)
            .collect()
    }

    /// Childless vertices reachable from `v`, in insertion order.
    pub fn leaves_of(&self, v: TermId) -> Vec<TermId> {
        let start = self.pos[&v];
        let mut seen = vec![false; self.verts.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for &c in &self.children[i] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        self.verts
            .iter()
            .enumerate()
            .filter(|&(i, _)| seen[i] && self.children[i].is_empty())
            .map(|(_, &t)| t)
            .collect()
    }

    /// The regions of `v`: reachable leaves not known to be empty.
    pub fn nonempty_leaves_of<F: Fn(TermId) -> bool>(
        &self,
        v: TermId,
        is_empty: &F,
    ) -> Vec<TermId> {
        self.leaves_of(v)
            .into_iter()
            .filter(|&t| !is_empty(t))
            .collect()
    }

    /// Refines the regions of two equated terms into a common partition.
    /// Creates `|L1| * |L2|` pairwise intersections, where `L1`/`L2` are the
    /// regions unique to `s`/`t`; both must be nonempty. Returns the new
    /// vertices in insertion order.
    pub fn merge<F: Fn(TermId) -> bool>(
        &mut self,
        ctx: &mut Ctx,
        s: TermId,
        t: TermId,
        is_empty: &F,
    ) -> Vec<TermId> {
        let nl_s = self.nonempty_leaves_of(s, is_empty);
        let nl_t = self.nonempty_leaves_of(t, is_empty);
        let set_s: HashSet<TermId> = nl_s.iter().copied().collect();
        let set_t: HashSet<TermId> = nl_t.iter().copied().collect();
        let l1: Vec<TermId> = nl_s.iter().copied().filter(|x| !set_t.contains(x)).collect();
        let l2: Vec<TermId> = nl_t.iter().copied().filter(|x| !set_s.contains(x)).collect();
        debug_assert!(
            !l1.is_empty() && !l2.is_empty(),
            "merge requires regions unique to each side"
        );
        let mut created = Vec::new();
        for &a in &l1 {
            for &b in &l2 {
                let product = ctx.inter(a, b);
                if self.add_vertex(product) {
                    created.push(product);
                }
                self.add_edge(a, product);
                self.add_edge(b, product);
            }
        }
        created
    }

    pub fn mark(&self) -> GraphMark {
        GraphMark {
            verts: self.verts.len(),
            edges: self.edges.len(),
        }
    }

    /// Rewinds vertex and edge additions past `mark`, newest first.
    pub fn undo_to(&mut self, mark: GraphMark) {
        while self.edges.len() > mark.edges {
            let (p, c) = self.edges.pop().unwrap();
            self.edge_set.remove(&(p, c));
            let popped = self.children[p].pop();
            debug_assert_eq!(popped, Some(c), "edges undo in reverse insertion order");
        }
        while self.verts.len() > mark.verts {
            let t = self.verts.pop().unwrap();
            self.pos.remove(&t);
            let extra = self.children.pop().unwrap();
            debug_assert!(extra.is_empty(), "removed vertex still had children");
        }
    }
}

/// First applicable graph rule, in order: the empty guess on an undecided
/// region, then the introduction rules (empty set, cardinality sets, equated
/// terms, composites whose arguments are present, singletons), then region
/// refinement for equated terms (emptying a subsumed side's extra regions
/// first, full merges last).
pub fn find_graph_rule(
    ctx: &Ctx,
    g: &CardGraph,
    s_lits: &[Constraint],
    singletons: &[TermId],
    idx: &ClosureIndex,
    guess_empty_set: bool,
) -> Option<RuleInstance> {
    let empty = ctx.empty();

    if guess_empty_set {
        for t in g.leaves() {
            if !idx.known_empty(t) && !idx.neq_sets(t, empty) {
                return Some(RuleInstance {
                    tag: RuleTag::GuessEmptySet,
                    kind: Kind::Branch(
                        vec![Concl::S(Constraint::SetEq(t, empty))],
                        vec![Concl::S(Constraint::SetNeq(t, empty))],
                    ),
                });
            }
        }
    }

    if !g.contains(empty) {
        return Some(RuleInstance {
            tag: RuleTag::IntroduceEmptySet,
            kind: Kind::AddNode(empty),
        });
    }

    for c in s_lits {
        if let Constraint::CardOf(_, s) = *c {
            if !g.contains(s) {
                return Some(RuleInstance {
                    tag: RuleTag::IntroduceCard,
                    kind: Kind::AddNode(s),
                });
            }
        }
    }

    for c in s_lits {
        if let Constraint::SetEq(s, t) = *c {
            if g.contains(s) && !g.contains(t) {
                return Some(RuleInstance {
                    tag: RuleTag::IntroduceEqRight,
                    kind: Kind::AddNode(t),
                });
            }
        }
    }

    for c in s_lits {
        if let Constraint::SetEq(s, t) = *c {
            if !g.contains(s) && g.contains(t) {
                return Some(RuleInstance {
                    tag: RuleTag::IntroduceEqLeft,
                    kind: Kind::AddNode(s),
                });
            }
        }
    }

    for c in s_lits {
        if let Constraint::SetEq(_, t) = *c {
            if let TermNode::Union(a, b) = ctx.node(t) {
                if !g.contains(t) && (g.contains(a) || g.contains(b)) {
                    return Some(RuleInstance {
                        tag: RuleTag::IntroduceUnion,
                        kind: Kind::AddNode(t),
                    });
                }
            }
        }
    }

    for c in s_lits {
        if let Constraint::SetEq(_, t) = *c {
            if let TermNode::Inter(a, b) = ctx.node(t) {
                if !g.contains(t) && g.contains(a) && g.contains(b) {
                    return Some(RuleInstance {
                        tag: RuleTag::IntroduceInter,
                        kind: Kind::AddNode(t),
                    });
                }
            }
        }
    }

    for c in s_lits {
        if let Constraint::SetEq(_, t) = *c {
            if let TermNode::Diff(a, _) = ctx.node(t) {
                if !g.contains(t) && g.contains(a) {
                    return Some(RuleInstance {
                        tag: RuleTag::IntroduceDiff,
                        kind: Kind::AddNode(t),
                    });
                }
            }
        }
    }

    for &sg in singletons {
        if !g.contains(sg) {
            return Some(RuleInstance {
                tag: RuleTag::IntroduceSingleton,
                kind: Kind::AddNode(sg),
            });
        }
    }

    let is_empty = |t: TermId| idx.known_empty(t);

    // One side's regions subsume the other's: the extra regions are empty.
    for c in s_lits {
        if let Constraint::SetEq(s, t) = *c {
            if !(g.contains(s) && g.contains(t) && g.contains(empty)) {
                continue;
            }
            let nl_s = g.nonempty_leaves_of(s, &is_empty);
            let nl_t = g.nonempty_leaves_of(t, &is_empty);
            let set_s: HashSet<TermId> = nl_s.iter().copied().collect();
            let set_t: HashSet<TermId> = nl_t.iter().copied().collect();
            let extras: Vec<TermId> = if set_s.is_subset(&set_t) && set_s != set_t {
                nl_t.iter().copied().filter(|x| !set_s.contains(x)).collect()
            } else if set_t.is_subset(&set_s) && set_s != set_t {
                nl_s.iter().copied().filter(|x| !set_t.contains(x)).collect()
            } else {
                continue;
            };
            let concls = extras
                .into_iter()
                .map(|l| Concl::S(Constraint::SetEq(l, empty)))
                .collect();
            return Some(RuleInstance {
                tag: RuleTag::MergeEqI,
                kind: Kind::Propagate(concls),
            });
        }
    }

    // Incomparable region sets: refine into a common partition.
    for c in s_lits {
        if let Constraint::SetEq(s, t) = *c {
            if !(g.contains(s) && g.contains(t) && g.contains(empty)) {
                continue;
            }
            let set_s: HashSet<TermId> =
                g.nonempty_leaves_of(s, &is_empty).into_iter().collect();
            let set_t: HashSet<TermId> =
                g.nonempty_leaves_of(t, &is_empty).into_iter().collect();
            if !set_s.is_subset(&set_t) && !set_t.is_subset(&set_s) {
                return Some(RuleInstance {
                    tag: RuleTag::MergeEqII,
                    kind: Kind::Merge(s, t),
                });
            }
        }
    }

    None
}
