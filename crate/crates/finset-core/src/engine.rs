//! Depth-first tableau search over set constraints.
//!
//! [`Solver`] owns the solver state: the set literals `S`, element literals
//! `M`, arithmetic atoms `A`, the element equality engine, and the region
//! graph `G`. [`Solver::solve`] saturates the state under the rule tiers —
//! contradiction checks, arithmetic consistency, membership propagation,
//! membership splits, graph rules, and cardinality bounds — backtracking
//! chronologically through recorded decisions. It answers [`Outcome::Unsat`]
//! when every branch closes, or [`Outcome::Sat`] with a finite [`Model`] that
//! is validated against the original constraints before being returned.
//!
//! The search also instruments two internal soundness signals exposed through
//! [`Stats`]: a lexicographic termination measure that must strictly decrease
//! at every rule application, and the region-graph invariants (leaf sets of
//! composite vertices decompose as unions, intersections, and differences of
//! their arguments' leaf sets) checked whenever the graph rules reach a fixed
//! point.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ast::{CardAtom, Constraint, Ctx, Rel, Sort, Sym, TermId, TermNode};
use crate::cardgraph::{self, CardGraph, GraphMark};
use crate::eqengine::{EqEngine, Mark};
use crate::lia::{self, LiaOutcome};
use crate::normalize;
use crate::setrules::{self, ClosureIndex, Concl, Kind, RuleInstance, RuleTag};

/// Tunable search behaviour. The defaults match the standard strategy:
/// empty-set guessing on, lower-bound guessing off, no resource limits.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Decide each region leaf against the empty set before merging regions.
    pub guess_empty_set: bool,
    /// Guess `card(t) >= n` for leaves with `n` known members instead of
    /// arranging the members pairwise. Off by default.
    pub guess_lower_bound: bool,
    /// Give up with `Unknown` after this many decisions.
    pub decision_limit: Option<u64>,
    /// Give up with `Unknown` after this much wall time.
    pub time_limit_ms: Option<u64>,
    /// Pivot/branch budget for each arithmetic check.
    pub lia_budget: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            guess_empty_set: true,
            guess_lower_bound: false,
            decision_limit: None,
            time_limit_ms: None,
            lia_budget: None,
        }
    }
}

/// Counters describing one `solve` run.
#[derive(Debug, Clone, Default)]
pub struct Stats {
    /// Branching rule applications (each counted once, when first taken).
    pub decisions: u64,
    /// Applications per rule name, including both sides of branches.
    pub rule_applications: BTreeMap<&'static str, u64>,
    /// Peak region-graph vertex count.
    pub max_vertices: usize,
    /// Peak region-graph leaf count.
    pub max_leaves: usize,
    /// Number of arithmetic consistency checks.
    pub lia_calls: u64,
    /// Rule applications after which the termination measure failed to
    /// decrease lexicographically. Always zero unless the solver is broken.
    pub measure_violations: u64,
    /// Region-graph invariant failures observed at graph fixed points.
    /// Always zero unless the solver is broken.
    pub nl_violations: u64,
    /// Wall time of the `solve` call.
    pub elapsed: Duration,
}

/// One element of a model's universe: either an equivalence class of the
/// element variables (numbered in registration order) or an anonymous
/// padding element added to meet a cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnivId {
    Class(u32),
    Pad(u32),
}

/// A finite model: a universe of `n_classes + n_pads` elements, and values
/// for every element, set, and integer variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub n_classes: u32,
    pub n_pads: u32,
    pub elems: BTreeMap<Sym, UnivId>,
    pub sets: BTreeMap<Sym, BTreeSet<UnivId>>,
    pub cards: BTreeMap<Sym, i64>,
}

impl Model {
    /// Display name of a universe element: classes are `@e0 .. @e{n-1}`,
    /// pads continue the numbering.
    pub fn univ_name(&self, u: UnivId) -> String {
        match u {
            UnivId::Class(k) => format!("@e{k}"),
            UnivId::Pad(j) => format!("@e{}", self.n_classes + j),
        }
    }

    pub fn universe_size(&self) -> u32 {
        self.n_classes + self.n_pads
    }
}

/// Verdict of a `solve` run.
#[derive(Debug, Clone)]
pub enum Outcome {
    Sat(Model),
    Unsat,
    /// The search stopped early; the string names the exhausted resource.
    Unknown(String),
}

/// Internal failures. These indicate a solver bug, never a property of the
/// input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Search interruptions that surface as `Outcome::Unknown`.
enum Interrupt {
    DecisionLimit,
}

impl Interrupt {
    fn outcome(self) -> Outcome {
        match self {
            Interrupt::DecisionLimit => Outcome::Unknown("decision limit reached".into()),
        }
    }
}

/// Lexicographic termination measure; compared with array `Ord`.
type Measure = [i128; 9];

/// Restore point for chronological backtracking.
#[derive(Debug, Clone, Copy)]
struct Checkpoint {
    s_len: usize,
    m_len: usize,
    a_len: usize,
    eq_mark: Mark,
    graph_mark: GraphMark,
    relevant_len: usize,
    singletons_len: usize,
}

/// A pending alternative of a branching rule.
struct Decision {
    checkpoint: Checkpoint,
    alt: Vec<Concl>,
    tag: RuleTag,
    /// Measure of the state the branch was decided in; both sides must
    /// decrease below it.
    parent_measure: Measure,
}

/// The solver. Construct with [`Solver::new`], run with [`Solver::solve`].
pub struct Solver {
    ctx: Ctx,
    opts: SolverOptions,
    /// Original constraints, kept for model validation.
    original: Vec<Constraint>,
    /// Set literals `S` (set (dis)equalities, memberships, `card` links).
    s_lits: Vec<Constraint>,
    /// Element literals `M`.
    m_lits: Vec<Constraint>,
    /// Arithmetic atoms `A`.
    a_atoms: Vec<CardAtom>,
    eq: EqEngine,
    graph: CardGraph,
    /// Set terms mentioned so far, first-seen order, the empty set first.
    relevant: Vec<TermId>,
    relevant_set: HashSet<TermId>,
    /// Singleton terms among `relevant`, first-seen order.
    singletons: Vec<TermId>,
    decisions: Vec<Decision>,
    /// Bumped whenever inputs of the literal-closure index change.
    rev: u64,
    idx_cache: Option<(u64, ClosureIndex)>,
    /// Re-run the arithmetic check before the next rule tier.
    lia_dirty: bool,
    has_card: bool,
    stats: Stats,
    dot_snapshot: Option<String>,
}

impl Solver {
    /// Builds a solver over `constraints`, flattening them into the
    /// restricted constraint shapes first. `ctx` must be the context the
    /// constraints were built in.
    pub fn new(mut ctx: Ctx, constraints: &[Constraint], opts: SolverOptions) -> Solver {
        let original = constraints.to_vec();
        let flat = normalize::flatten(&mut ctx, constraints);
        debug_assert_eq!(normalize::check_flat(&ctx, &flat.constraints), Ok(()));
        let empty = ctx.empty();
        let mut solver = Solver {
            ctx,
            opts,
            original,
            s_lits: Vec::new(),
            m_lits: Vec::new(),
            a_atoms: Vec::new(),
            eq: EqEngine::new(),
            graph: CardGraph::new(),
            relevant: Vec::new(),
            relevant_set: HashSet::new(),
            singletons: Vec::new(),
            decisions: Vec::new(),
            rev: 0,
            idx_cache: None,
            lia_dirty: true,
            has_card: false,
            stats: Stats::default(),
            dot_snapshot: None,
        };
        solver.push_relevant(empty);
        for c in &flat.constraints {
            match c {
                Constraint::SetEq(..)
                | Constraint::SetNeq(..)
                | Constraint::Member(..)
                | Constraint::NotMember(..)
                | Constraint::CardOf(..) => solver.add_s(c.clone()),
                Constraint::ElemEq(..) | Constraint::ElemNeq(..) => solver.add_m(c.clone()),
                Constraint::Arith(a) => solver.add_a(a.clone()),
            }
        }
        solver.has_card = solver
            .s_lits
            .iter()
            .any(|c| matches!(c, Constraint::CardOf(..)));
        // Tie user-facing cardinality variables to the canonical one per term,
        // so the graph-induced system constrains them.
        let links: Vec<(Sym, TermId)> = solver
            .s_lits
            .iter()
            .filter_map(|c| match *c {
                Constraint::CardOf(v, s) => Some((v, s)),
                _ => None,
            })
            .collect();
        for (v, s) in links {
            let canonical = solver.ctx.card_var_of(s);
            if v != canonical {
                solver.add_a(CardAtom::new([(1, v), (-1, canonical)], Rel::Eq, 0));
            }
        }
        solver
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn ctx_mut(&mut self) -> &mut Ctx {
        &mut self.ctx
    }

    /// DOT rendering of the region graph captured when the vertex count
    /// peaked; `None` if the graph stayed empty.
    pub fn graph_dot(&self) -> Option<&str> {
        self.dot_snapshot.as_deref()
    }

    /// Is the literal entailed by the current state's closure? Terms never
    /// mentioned are not entailed anything (beyond what the closure gives
    /// their class).
    pub fn in_sstar(&mut self, c: &Constraint) -> bool {
        self.ensure_index();
        let idx = &self.idx_cache.as_ref().expect("index built").1;
        let known = |t: TermId| self.relevant_set.contains(&t);
        match *c {
            Constraint::Member(x, s) => known(s) && idx.member(&self.eq, x, s),
            Constraint::NotMember(x, s) => known(s) && idx.not_member(&self.eq, x, s),
            Constraint::SetEq(s, t) => known(s) && known(t) && idx.eq_sets(s, t),
            Constraint::SetNeq(s, t) => known(s) && known(t) && idx.neq_sets(s, t),
            _ => false,
        }
    }

    /// Runs the search to a verdict.
    pub fn solve(&mut self) -> Result<Outcome, EngineError> {
        let t0 = Instant::now();
        let out = self.run(t0);
        self.stats.elapsed = t0.elapsed();
        out
    }

    fn run(&mut self, t0: Instant) -> Result<Outcome, EngineError> {
        let deadline = self
            .opts
            .time_limit_ms
            .map(|ms| t0 + Duration::from_millis(ms));
        loop {
            if let Some(d) = deadline {
                if Instant::now() >= d {
                    return Ok(Outcome::Unknown("time limit reached".into()));
                }
            }
            self.ensure_index();

            if let Some(inst) = setrules::find_close(self.idx(), &self.eq) {
                self.bump_rule(inst.tag);
                if !self.backtrack() {
                    return Ok(Outcome::Unsat);
                }
                continue;
            }

            if self.lia_dirty {
                match self.lia_check() {
                    LiaOutcome::Sat(_) => {}
                    LiaOutcome::Unsat => {
                        self.bump_rule(RuleTag::ArithContradiction);
                        if !self.backtrack() {
                            return Ok(Outcome::Unsat);
                        }
                        continue;
                    }
                    LiaOutcome::ResourceLimit => {
                        return Ok(Outcome::Unknown("arithmetic budget exhausted".into()));
                    }
                }
            }

            if let Some(inst) = setrules::find_membership_propagation(&self.ctx, self.idx(), &self.eq) {
                if let Err(i) = self.apply_checked(inst) {
                    return Ok(i.outcome());
                }
                continue;
            }

            if let Some(inst) = setrules::find_membership_split(&self.ctx, self.idx(), &self.eq) {
                if let Err(i) = self.apply_checked(inst) {
                    return Ok(i.outcome());
                }
                continue;
            }

            if self.has_card {
                let inst = cardgraph::find_graph_rule(
                    &self.ctx,
                    &self.graph,
                    &self.s_lits,
                    &self.singletons,
                    self.idx(),
                    self.opts.guess_empty_set,
                );
                if let Some(inst) = inst {
                    if let Err(i) = self.apply_checked(inst) {
                        return Ok(i.outcome());
                    }
                    continue;
                }
                // Graph rules are at a fixed point: the region decomposition
                // invariants must hold from here on.
                self.check_nl_invariants();

                if let Some(inst) = self.find_minsize() {
                    if let Err(i) = self.apply_checked(inst) {
                        return Ok(i.outcome());
                    }
                    continue;
                }
                if self.opts.guess_lower_bound {
                    if let Some(inst) = self.find_guess_lower_bound() {
                        if let Err(i) = self.apply_checked(inst) {
                            return Ok(i.outcome());
                        }
                        continue;
                    }
                }
                if let Some(inst) = self.find_members_arrangement() {
                    if let Err(i) = self.apply_checked(inst) {
                        return Ok(i.outcome());
                    }
                    continue;
                }
            }

            #[cfg(debug_assertions)]
            self.assert_saturated();
            let model = self.build_model()?;
            if let Err(msg) = validate_model(&self.ctx, &self.original, &model) {
                return Err(EngineError::Invariant(format!(
                    "model failed validation: {msg}"
                )));
            }
            return Ok(Outcome::Sat(model));
        }
    }

    // ----- state mutation -----

    fn ensure_index(&mut self) {
        let fresh = matches!(&self.idx_cache, Some((r, _)) if *r == self.rev);
        if !fresh {
            let idx = ClosureIndex::build(&self.ctx, &self.relevant, &self.s_lits, &self.eq);
            self.idx_cache = Some((self.rev, idx));
        }
    }

    fn idx(&self) -> &ClosureIndex {
        &self
            .idx_cache
            .as_ref()
            .expect("ensure_index precedes idx()")
            .1
    }

    fn bump_rule(&mut self, tag: RuleTag) {
        *self.stats.rule_applications.entry(tag.name()).or_insert(0) += 1;
    }

    fn push_relevant(&mut self, t: TermId) {
        if self.relevant_set.insert(t) {
            self.relevant.push(t);
            if let TermNode::Singleton(y) = self.ctx.node(t) {
                self.eq.register(y);
                self.singletons.push(t);
            }
            self.rev += 1;
        }
    }

    fn add_relevant_term(&mut self, t: TermId) {
        let mut buf = Vec::new();
        self.ctx.collect_subterms(t, &mut buf);
        for s in buf {
            self.push_relevant(s);
        }
    }

    fn add_s(&mut self, c: Constraint) {
        match c {
            Constraint::SetEq(a, b) | Constraint::SetNeq(a, b) => {
                self.add_relevant_term(a);
                self.add_relevant_term(b);
            }
            Constraint::Member(x, s) | Constraint::NotMember(x, s) => {
                self.eq.register(x);
                self.add_relevant_term(s);
            }
            Constraint::CardOf(_, s) => {
                self.add_relevant_term(s);
            }
            Constraint::ElemEq(..) | Constraint::ElemNeq(..) | Constraint::Arith(_) => {
                unreachable!("element and arithmetic constraints never enter S")
            }
        }
        if matches!(c, Constraint::SetEq(..)) {
            // Emptiness knowledge feeds the graph-induced arithmetic.
            self.lia_dirty = true;
        }
        self.s_lits.push(c);
        self.rev += 1;
    }

    fn add_m(&mut self, c: Constraint) {
        match c {
            Constraint::ElemEq(x, y) => {
                self.eq.merge(x, y);
            }
            Constraint::ElemNeq(x, y) => {
                self.eq.add_diseq(x, y);
            }
            _ => unreachable!("only element literals enter M"),
        }
        self.m_lits.push(c);
        self.rev += 1;
    }

    fn add_a(&mut self, a: CardAtom) {
        self.a_atoms.push(a);
        self.lia_dirty = true;
    }

    fn add_concl(&mut self, c: Concl) {
        match c {
            Concl::S(lit) => self.add_s(lit),
            Concl::M(lit) => self.add_m(lit),
            Concl::A(atom) => self.add_a(atom),
        }
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            s_len: self.s_lits.len(),
            m_len: self.m_lits.len(),
            a_len: self.a_atoms.len(),
            eq_mark: self.eq.mark(),
            graph_mark: self.graph.mark(),
            relevant_len: self.relevant.len(),
            singletons_len: self.singletons.len(),
        }
    }

    fn restore(&mut self, cp: Checkpoint) {
        self.s_lits.truncate(cp.s_len);
        self.m_lits.truncate(cp.m_len);
        self.a_atoms.truncate(cp.a_len);
        self.eq.undo_to(cp.eq_mark);
        self.graph.undo_to(cp.graph_mark);
        for t in self.relevant.drain(cp.relevant_len..) {
            self.relevant_set.remove(&t);
        }
        self.singletons.truncate(cp.singletons_len);
        self.rev += 1;
        self.lia_dirty = true;
    }

    fn push_decision(
        &mut self,
        tag: RuleTag,
        alt: Vec<Concl>,
        parent_measure: Measure,
    ) -> Result<(), Interrupt> {
        if let Some(limit) = self.opts.decision_limit {
            if self.stats.decisions >= limit {
                return Err(Interrupt::DecisionLimit);
            }
        }
        self.decisions.push(Decision {
            checkpoint: self.checkpoint(),
            alt,
            tag,
            parent_measure,
        });
        self.stats.decisions += 1;
        Ok(())
    }

    /// Applies a rule instance and checks that the termination measure
    /// strictly decreased (lower-bound guessing is exempt).
    fn apply_checked(&mut self, inst: RuleInstance) -> Result<(), Interrupt> {
        let tracked = inst.tag != RuleTag::GuessLowerBound;
        let before = self.measure();
        self.apply(inst, before)?;
        if tracked {
            let after = self.measure();
            if after >= before {
                self.stats.measure_violations += 1;
            }
        }
        Ok(())
    }

    fn apply(&mut self, inst: RuleInstance, parent: Measure) -> Result<(), Interrupt> {
        self.bump_rule(inst.tag);
        match inst.kind {
            Kind::Close => unreachable!("closes are handled by the search loop"),
            Kind::Propagate(concls) => {
                for c in concls {
                    self.add_concl(c);
                }
            }
            Kind::Branch(left, right) => {
                self.push_decision(inst.tag, right, parent)?;
                for c in left {
                    self.add_concl(c);
                }
            }
            Kind::BranchFreshWitness { s, t } => {
                let y = self.ctx.fresh(Sort::Element);
                let right = vec![
                    Concl::S(Constraint::NotMember(y, s)),
                    Concl::S(Constraint::Member(y, t)),
                ];
                self.push_decision(inst.tag, right, parent)?;
                self.add_s(Constraint::Member(y, s));
                self.add_s(Constraint::NotMember(y, t));
            }
            Kind::AddNode(t) => {
                let created = self.graph.add_node(&mut self.ctx, t);
                for c in created {
                    self.push_relevant(c);
                }
                self.lia_dirty = true;
                self.note_graph_change();
            }
            Kind::Merge(s, t) => {
                self.ensure_index();
                let created = {
                    let idx = &self.idx_cache.as_ref().expect("fresh index").1;
                    self.graph.merge(&mut self.ctx, s, t, &|x| idx.known_empty(x))
                };
                for c in created {
                    self.push_relevant(c);
                }
                self.lia_dirty = true;
                self.note_graph_change();
            }
        }
        Ok(())
    }

    /// Pops the most recent decision, restores its checkpoint, and applies
    /// the stored alternative. Returns false when no decision remains.
    fn backtrack(&mut self) -> bool {
        match self.decisions.pop() {
            None => false,
            Some(d) => {
                self.restore(d.checkpoint);
                self.bump_rule(d.tag);
                for c in d.alt {
                    self.add_concl(c);
                }
                if d.tag != RuleTag::GuessLowerBound {
                    let after = self.measure();
                    if after >= d.parent_measure {
                        self.stats.measure_violations += 1;
                    }
                }
                true
            }
        }
    }

    fn note_graph_change(&mut self) {
        let leaves = self.graph.leaves().len();
        if leaves > self.stats.max_leaves {
            self.stats.max_leaves = leaves;
        }
        let verts = self.graph.vertex_count();
        if verts > self.stats.max_vertices {
            self.stats.max_vertices = verts;
            self.dot_snapshot = Some(self.render_dot());
        }
    }

    fn render_dot(&mut self) -> String {
        self.ensure_index();
        let idx = &self.idx_cache.as_ref().expect("index built").1;
        let mut out = String::from("digraph regions {\n");
        for (i, &v) in self.graph.vertices().iter().enumerate() {
            let highlight = self.graph.is_leaf(v) && !idx.known_empty(v);
            let attrs = if highlight { ", peripheries=2" } else { "" };
            out.push_str(&format!(
                "  n{} [label=\"{}\"{}];\n",
                i,
                self.ctx.term_text(v),
                attrs
            ));
        }
        for &(p, c) in self.graph.edges() {
            out.push_str(&format!("  n{p} -> n{c};\n"));
        }
        out.push_str("}\n");
        out
    }

    // ----- arithmetic -----

    fn lia_check(&mut self) -> LiaOutcome {
        let atoms = self.all_atoms();
        self.stats.lia_calls += 1;
        let out = lia::solve(&atoms, self.opts.lia_budget);
        if matches!(out, LiaOutcome::Sat(_)) {
            self.lia_dirty = false;
        }
        out
    }

    fn all_atoms(&mut self) -> Vec<CardAtom> {
        let mut atoms = self.a_atoms.clone();
        atoms.extend(self.induced_atoms());
        atoms
    }

    /// The arithmetic system induced by the region graph: every inner vertex's
    /// cardinality is the sum over its nonempty leaves, empty leaves have
    /// cardinality zero, singleton vertices cardinality one, and every vertex
    /// cardinality is nonnegative. A nonempty leaf's defining identity is the
    /// trivial `c = c` and is skipped.
    fn induced_atoms(&mut self) -> Vec<CardAtom> {
        if self.graph.vertex_count() == 0 {
            return Vec::new();
        }
        self.ensure_index();
        enum Plan {
            Sum(Vec<TermId>),
            Zero,
        }
        let mut plans: Vec<(TermId, Plan)> = Vec::new();
        let mut units: Vec<TermId> = Vec::new();
        {
            let idx = &self.idx_cache.as_ref().expect("index built").1;
            for &v in self.graph.vertices() {
                if !self.graph.is_leaf(v) {
                    let nl = self.graph.nonempty_leaves_of(v, &|x| idx.known_empty(x));
                    plans.push((v, Plan::Sum(nl)));
                } else if idx.known_empty(v) {
                    plans.push((v, Plan::Zero));
                }
                if matches!(self.ctx.node(v), TermNode::Singleton(_)) {
                    units.push(v);
                }
            }
        }
        let mut out = Vec::new();
        for (v, plan) in plans {
            let cv = self.ctx.card_var_of(v);
            match plan {
                Plan::Sum(nl) => {
                    let mut terms = vec![(1i64, cv)];
                    for l in nl {
                        terms.push((-1, self.ctx.card_var_of(l)));
                    }
                    out.push(CardAtom::new(terms, Rel::Eq, 0));
                }
                Plan::Zero => out.push(CardAtom::simple(cv, Rel::Eq, 0)),
            }
        }
        for v in units {
            let cv = self.ctx.card_var_of(v);
            out.push(CardAtom::simple(cv, Rel::Eq, 1));
        }
        let verts: Vec<TermId> = self.graph.vertices().to_vec();
        for v in verts {
            let cv = self.ctx.card_var_of(v);
            out.push(CardAtom::simple(cv, Rel::Ge, 0));
        }
        out
    }

    // ----- cardinality bound rules -----

    /// Propagates `card(t) >= n` for the first leaf whose `n >= 1` known
    /// member classes are mutually disequal and whose bound is not yet
    /// explicit in `A`.
    fn find_minsize(&mut self) -> Option<RuleInstance> {
        self.ensure_index();
        let mut cands: Vec<(TermId, i64)> = Vec::new();
        {
            let idx = &self.idx_cache.as_ref().expect("index built").1;
            for t in self.graph.leaves() {
                let mc = idx.member_classes(t);
                if mc.is_empty() {
                    continue;
                }
                let distinct = mc.iter().enumerate().all(|(i, &(_, wi))| {
                    mc[i + 1..]
                        .iter()
                        .all(|&(_, wj)| self.eq.in_diseq_closure(wi, wj))
                });
                if distinct {
                    cands.push((t, mc.len() as i64));
                }
            }
        }
        for (t, n) in cands {
            let cv = self.ctx.card_var_of(t);
            if !lia::syntactic_geq(&self.a_atoms, cv, n) {
                return Some(RuleInstance {
                    tag: RuleTag::PropagateMinsize,
                    kind: Kind::Propagate(vec![Concl::A(CardAtom::simple(cv, Rel::Ge, n))]),
                });
            }
        }
        None
    }

    /// Splits on equality of the first undecided pair of member classes of a
    /// leaf whose member count exceeds its known cardinality bound.
    fn find_members_arrangement(&mut self) -> Option<RuleInstance> {
        self.ensure_index();
        let mut cands: Vec<(TermId, Vec<Sym>)> = Vec::new();
        {
            let idx = &self.idx_cache.as_ref().expect("index built").1;
            for t in self.graph.leaves() {
                let mc = idx.member_classes(t);
                if mc.len() >= 2 {
                    cands.push((t, mc.iter().map(|&(_, w)| w).collect()));
                }
            }
        }
        for (t, witnesses) in cands {
            let cv = self.ctx.card_var_of(t);
            if lia::syntactic_geq(&self.a_atoms, cv, witnesses.len() as i64) {
                continue;
            }
            for (i, &x) in witnesses.iter().enumerate() {
                for &y in &witnesses[i + 1..] {
                    if !self.eq.in_diseq_closure(x, y) {
                        return Some(RuleInstance {
                            tag: RuleTag::MembersArrangement,
                            kind: Kind::Branch(
                                vec![Concl::M(Constraint::ElemEq(x, y))],
                                vec![Concl::M(Constraint::ElemNeq(x, y))],
                            ),
                        });
                    }
                }
            }
        }
        None
    }

    /// Optional eager variant: guess the cardinality bound of a leaf with
    /// undecided members instead of arranging them.
    fn find_guess_lower_bound(&mut self) -> Option<RuleInstance> {
        self.ensure_index();
        let mut cands: Vec<(TermId, i64)> = Vec::new();
        {
            let idx = &self.idx_cache.as_ref().expect("index built").1;
            for t in self.graph.leaves() {
                let n = idx.member_classes(t).len();
                if n >= 1 {
                    cands.push((t, n as i64));
                }
            }
        }
        for (t, n) in cands {
            let cv = self.ctx.card_var_of(t);
            // Either branch's conclusion counts as "decided"; otherwise the
            // right branch would re-enable the rule forever.
            if !lia::syntactic_geq(&self.a_atoms, cv, n)
                && !lia::syntactic_lt(&self.a_atoms, cv, n)
            {
                return Some(RuleInstance {
                    tag: RuleTag::GuessLowerBound,
                    kind: Kind::Branch(
                        vec![Concl::A(CardAtom::simple(cv, Rel::Ge, n))],
                        vec![Concl::A(CardAtom::simple(cv, Rel::Lt, n))],
                    ),
                });
            }
        }
        None
    }

    // ----- instrumentation -----

    /// The termination measure: a lexicographic 9-tuple that every rule
    /// application must strictly decrease.
    fn measure(&mut self) -> Measure {
        self.ensure_index();
        let empty = self.ctx.empty();
        let idx = &self.idx_cache.as_ref().expect("index built").1;
        let g = &self.graph;
        let is_empty = |t: TermId| idx.known_empty(t);
        // Leaf set of a vertex, with vertices asserted empty contributing
        // nothing even before their leaves are individually emptied.
        let nl_of = |v: TermId| -> BTreeSet<TermId> {
            if idx.known_empty(v) {
                BTreeSet::new()
            } else {
                g.nonempty_leaves_of(v, &is_empty).into_iter().collect()
            }
        };

        let f5 = self.relevant.len() as i128;
        let f2 = self.relevant.iter().filter(|t| !g.contains(**t)).count() as i128;

        let mut f1 = 0i128;
        for c in &self.s_lits {
            if let Constraint::SetEq(s, t) = *c {
                if !g.contains(s) || !g.contains(t) || nl_of(s) != nl_of(t) {
                    f1 += 1;
                }
            }
        }

        let f3 = g
            .leaves()
            .iter()
            .filter(|&&l| !idx.known_empty(l) && !idx.neq_sets(l, empty))
            .count() as i128;

        let f4 = self
            .s_lits
            .iter()
            .filter(|c| {
                if let Constraint::SetNeq(s, t) = **c {
                    !idx.diseq_witnessed(s, t)
                } else {
                    false
                }
            })
            .count() as i128;

        let mut ue: HashSet<Sym> = HashSet::new();
        for c in &self.s_lits {
            if let Constraint::Member(x, _) | Constraint::NotMember(x, _) = *c {
                ue.insert(x);
            }
        }
        for &sg in &self.singletons {
            if let TermNode::Singleton(y) = self.ctx.node(sg) {
                ue.insert(y);
            }
        }
        for c in &self.m_lits {
            if let Constraint::ElemEq(x, y) | Constraint::ElemNeq(x, y) = *c {
                ue.insert(x);
                ue.insert(y);
            }
        }
        let f6 = ue.len() as i128;

        // Entailed element literals, counted over the element variables above:
        // ordered equal pairs within classes, plus disequal pairs lifted to
        // whole classes (a disequality inside one class lifts to every
        // ordered pair of the class).
        let mut ecnt: HashMap<u32, i128> = HashMap::new();
        for &x in &ue {
            if let Some(r) = self.eq.root_index(x) {
                *ecnt.entry(r).or_insert(0) += 1;
            }
        }
        let cnt = |m: &HashMap<u32, i128>, r: u32| m.get(&r).copied().unwrap_or(0);
        let mut mstar: i128 = ecnt.values().map(|&n| n * n).sum();
        let mut seen: HashSet<(u32, u32)> = HashSet::new();
        for &(p, q) in self.eq.diseqs() {
            let rp = self.eq.root_index(p).expect("diseq vars registered");
            let rq = self.eq.root_index(q).expect("diseq vars registered");
            if seen.insert((rp.min(rq), rp.max(rq))) {
                if rp == rq {
                    mstar += cnt(&ecnt, rp) * cnt(&ecnt, rp);
                } else {
                    mstar += 2 * cnt(&ecnt, rp) * cnt(&ecnt, rq);
                }
            }
        }
        let f7 = 2 * f6 * f6 - mstar;

        // Entailed set literals over the relevant terms: equal and disequal
        // ordered term pairs, plus (non)membership pairs.
        let mut scnt: HashMap<usize, i128> = HashMap::new();
        for &r in &idx.root {
            *scnt.entry(r).or_insert(0) += 1;
        }
        let scount = |r: usize| scnt.get(&r).copied().unwrap_or(0);
        let mut sstar: i128 = scnt.values().map(|&n| n * n).sum();
        for &(a, b) in &idx.set_diseqs {
            if a == b {
                sstar += scount(a) * scount(a);
            } else {
                sstar += 2 * scount(a) * scount(b);
            }
        }
        for (r, m) in &idx.members_in {
            sstar += scount(*r) * m.keys().map(|e| cnt(&ecnt, *e)).sum::<i128>();
        }
        for (r, m) in &idx.members_out {
            sstar += scount(*r) * m.keys().map(|e| cnt(&ecnt, *e)).sum::<i128>();
        }
        let f8 = 2 * f5 * f5 + 2 * f5 * f6 - sstar;

        let pairs: Vec<(TermId, usize)> = g
            .leaves()
            .iter()
            .map(|&t| (t, idx.member_classes(t).len()))
            .collect();
        let mut covered = 0i128;
        for (t, n) in pairs {
            let cv = self.ctx.card_var_of(t);
            if lia::syntactic_geq(&self.a_atoms, cv, n as i64) {
                covered += 1;
            }
        }
        let f9 = f5 - covered;

        [f1, f2, f3, f4, f5, f6, f7, f8, f9]
    }

    /// At a graph fixed point the leaf sets must decompose compositely
    /// (union/intersection/difference of the arguments' leaf sets) and agree
    /// across asserted equalities. Counts violations into the stats.
    fn check_nl_invariants(&mut self) {
        if self.graph.vertex_count() == 0 {
            return;
        }
        self.ensure_index();
        let idx = &self.idx_cache.as_ref().expect("index built").1;
        let g = &self.graph;
        let is_empty = |t: TermId| idx.known_empty(t);
        let nl = |v: TermId| -> BTreeSet<TermId> {
            g.nonempty_leaves_of(v, &is_empty).into_iter().collect()
        };
        let mut violations = 0u64;
        for &v in g.vertices() {
            let (a, b) = match self.ctx.node(v) {
                TermNode::Union(a, b) | TermNode::Inter(a, b) | TermNode::Diff(a, b) => (a, b),
                _ => continue,
            };
            if !g.contains(a) || !g.contains(b) {
                violations += 1;
                continue;
            }
            let (na, nb, nv) = (nl(a), nl(b), nl(v));
            let want: BTreeSet<TermId> = match self.ctx.node(v) {
                TermNode::Union(..) => na.union(&nb).copied().collect(),
                TermNode::Inter(..) => na.intersection(&nb).copied().collect(),
                TermNode::Diff(..) => na.difference(&nb).copied().collect(),
                _ => unreachable!(),
            };
            if nv != want {
                violations += 1;
            }
        }
        for c in &self.s_lits {
            if let Constraint::SetEq(s, t) = *c {
                if g.contains(s) && g.contains(t) && nl(s) != nl(t) {
                    violations += 1;
                }
            }
        }
        self.stats.nl_violations += violations;
    }

    #[cfg(debug_assertions)]
    fn assert_saturated(&mut self) {
        self.ensure_index();
        assert!(
            setrules::find_close(self.idx(), &self.eq).is_none(),
            "saturated state must be open"
        );
        assert!(!self.lia_dirty, "arithmetic must be checked at saturation");
        assert!(
            setrules::find_membership_propagation(&self.ctx, self.idx(), &self.eq).is_none(),
            "membership propagations must be exhausted at saturation"
        );
        assert!(
            setrules::find_membership_split(&self.ctx, self.idx(), &self.eq).is_none(),
            "membership splits must be exhausted at saturation"
        );
        if self.has_card {
            assert!(
                cardgraph::find_graph_rule(
                    &self.ctx,
                    &self.graph,
                    &self.s_lits,
                    &self.singletons,
                    self.idx(),
                    self.opts.guess_empty_set,
                )
                .is_none(),
                "graph rules must be exhausted at saturation"
            );
            assert!(
                self.find_minsize().is_none(),
                "cardinality bounds must be propagated at saturation"
            );
            if self.opts.guess_lower_bound {
                assert!(
                    self.find_guess_lower_bound().is_none(),
                    "guessed bounds must be decided at saturation"
                );
            }
            assert!(
                self.find_members_arrangement().is_none(),
                "member arrangements must be decided at saturation"
            );
        }
    }

    // ----- model construction -----

    /// Assembles a model from a saturated open state: element classes become
    /// universe elements, each nonempty region leaf gets its known members
    /// plus anonymous pads up to its cardinality, and each set variable is
    /// the union of its region leaves (or its membership extension when it is
    /// outside the graph).
    fn build_model(&mut self) -> Result<Model, EngineError> {
        // Every element variable needs a value, even ones never constrained.
        let missing: Vec<Sym> = self
            .ctx
            .syms()
            .filter(|&s| self.ctx.sym_sort(s) == Sort::Element && !self.eq.is_registered(s))
            .collect();
        for s in missing {
            self.eq.register(s);
        }
        self.rev += 1;
        self.ensure_index();

        let classes = self.eq.classes();
        let n_classes = classes.len() as u32;
        let mut class_of: HashMap<Sym, u32> = HashMap::new();
        let mut root_to_class: HashMap<u32, u32> = HashMap::new();
        for (k, class) in classes.iter().enumerate() {
            let root = self
                .eq
                .root_index(class[0])
                .expect("class members are registered");
            root_to_class.insert(root, k as u32);
            for &s in class {
                class_of.insert(s, k as u32);
            }
        }

        let atoms = self.all_atoms();
        let assign = match lia::solve(&atoms, self.opts.lia_budget) {
            LiaOutcome::Sat(a) => a,
            LiaOutcome::Unsat => {
                return Err(EngineError::Invariant(
                    "arithmetic became unsatisfiable at model construction".into(),
                ));
            }
            LiaOutcome::ResourceLimit => {
                return Err(EngineError::Invariant(
                    "arithmetic budget exhausted at model construction".into(),
                ));
            }
        };

        let plans: Vec<(TermId, Vec<u32>)> = {
            let idx = &self.idx_cache.as_ref().expect("index built").1;
            self.graph
                .leaves()
                .into_iter()
                .filter(|&t| !idx.known_empty(t))
                .map(|t| {
                    let members = idx.member_classes(t).iter().map(|&(e, _)| e).collect();
                    (t, members)
                })
                .collect()
        };
        let mut pad_counter = 0u32;
        let mut leaf_ext: HashMap<TermId, BTreeSet<UnivId>> = HashMap::new();
        for (t, member_roots) in plans {
            let cv = self.ctx.card_var_of(t);
            let card = assign.get(&cv).copied().unwrap_or(0);
            let mut ext: BTreeSet<UnivId> = member_roots
                .iter()
                .map(|r| UnivId::Class(root_to_class[r]))
                .collect();
            let need = card - ext.len() as i64;
            if need < 0 {
                return Err(EngineError::Invariant(format!(
                    "region {} has {} known members but cardinality {}",
                    self.ctx.term_text(t),
                    ext.len(),
                    card
                )));
            }
            for _ in 0..need {
                ext.insert(UnivId::Pad(pad_counter));
                pad_counter += 1;
            }
            leaf_ext.insert(t, ext);
        }

        let mut elems: BTreeMap<Sym, UnivId> = BTreeMap::new();
        for s in self.ctx.syms() {
            if self.ctx.sym_sort(s) == Sort::Element {
                elems.insert(s, UnivId::Class(class_of[&s]));
            }
        }

        let set_syms: Vec<Sym> = self
            .ctx
            .syms()
            .filter(|&s| self.ctx.sym_sort(s) == Sort::Set)
            .collect();
        let mut sets: BTreeMap<Sym, BTreeSet<UnivId>> = BTreeMap::new();
        for v in set_syms {
            let t = self.ctx.var(v).expect("set-sorted variable");
            let ext: BTreeSet<UnivId> = if self.graph.contains(t) {
                let nl = {
                    let idx = &self.idx_cache.as_ref().expect("index built").1;
                    self.graph.nonempty_leaves_of(t, &|x| idx.known_empty(x))
                };
                nl.iter()
                    .flat_map(|l| leaf_ext[l].iter().copied())
                    .collect()
            } else if self.relevant_set.contains(&t) {
                let idx = &self.idx_cache.as_ref().expect("index built").1;
                idx.member_classes(t)
                    .iter()
                    .map(|&(e, _)| UnivId::Class(root_to_class[&e]))
                    .collect()
            } else {
                BTreeSet::new()
            };
            sets.insert(v, ext);
        }

        let mut cards: BTreeMap<Sym, i64> = BTreeMap::new();
        for s in self.ctx.syms() {
            if self.ctx.sym_sort(s) == Sort::Card {
                cards.insert(s, assign.get(&s).copied().unwrap_or(0));
            }
        }

        Ok(Model {
            n_classes,
            n_pads: pad_counter,
            elems,
            sets,
            cards,
        })
    }
}

/// Evaluates a set term under a model.
fn eval_set_term(ctx: &Ctx, model: &Model, t: TermId) -> Result<BTreeSet<UnivId>, String> {
    Ok(match ctx.node(t) {
        TermNode::Var(v) => model.sets.get(&v).cloned().unwrap_or_default(),
        TermNode::Empty => BTreeSet::new(),
        TermNode::Singleton(x) => {
            let e = elem_value(ctx, model, x)?;
            BTreeSet::from([e])
        }
        TermNode::Union(a, b) => {
            let (ea, eb) = (eval_set_term(ctx, model, a)?, eval_set_term(ctx, model, b)?);
            ea.union(&eb).copied().collect()
        }
        TermNode::Inter(a, b) => {
            let (ea, eb) = (eval_set_term(ctx, model, a)?, eval_set_term(ctx, model, b)?);
            ea.intersection(&eb).copied().collect()
        }
        TermNode::Diff(a, b) => {
            let (ea, eb) = (eval_set_term(ctx, model, a)?, eval_set_term(ctx, model, b)?);
            ea.difference(&eb).copied().collect()
        }
    })
}

fn elem_value(ctx: &Ctx, model: &Model, x: Sym) -> Result<UnivId, String> {
    model
        .elems
        .get(&x)
        .copied()
        .ok_or_else(|| format!("element `{}` has no value", ctx.sym_name(x)))
}

fn card_value(ctx: &Ctx, model: &Model, v: Sym) -> Result<i64, String> {
    model
        .cards
        .get(&v)
        .copied()
        .ok_or_else(|| format!("integer `{}` has no value", ctx.sym_name(v)))
}

/// Checks every constraint against a model, returning the first violated
/// constraint's text. Works on arbitrary (non-flat) constraints.
pub fn validate_model(ctx: &Ctx, constraints: &[Constraint], model: &Model) -> Result<(), String> {
    for c in constraints {
        let ok = match c {
            Constraint::SetEq(s, t) => {
                eval_set_term(ctx, model, *s)? == eval_set_term(ctx, model, *t)?
            }
            Constraint::SetNeq(s, t) => {
                eval_set_term(ctx, model, *s)? != eval_set_term(ctx, model, *t)?
            }
            Constraint::Member(x, s) => {
                eval_set_term(ctx, model, *s)?.contains(&elem_value(ctx, model, *x)?)
            }
            Constraint::NotMember(x, s) => {
                !eval_set_term(ctx, model, *s)?.contains(&elem_value(ctx, model, *x)?)
            }
            Constraint::CardOf(v, s) => {
                eval_set_term(ctx, model, *s)?.len() as i64 == card_value(ctx, model, *v)?
            }
            Constraint::ElemEq(x, y) => {
                elem_value(ctx, model, *x)? == elem_value(ctx, model, *y)?
            }
            Constraint::ElemNeq(x, y) => {
                elem_value(ctx, model, *x)? != elem_value(ctx, model, *y)?
            }
            Constraint::Arith(a) => {
                let mut sum = 0i64;
                for &(coeff, v) in &a.lhs {
                    sum += coeff * card_value(ctx, model, v)?;
                }
                match a.rel {
                    Rel::Eq => sum == a.rhs,
                    Rel::Ne => sum != a.rhs,
                    Rel::Lt => sum < a.rhs,
                    Rel::Ge => sum >= a.rhs,
                }
            }
        };
        if !ok {
            return Err(format!(
                "constraint {} is violated",
                ctx.constraint_text(c)
            ));
        }
    }
    Ok(())
}
