//! SMT-LIB-style script parser and printer.
//!
//! Commands: `declare-const`, `assert`, `check-sat`, `get-model`,
//! `set-option`. Sorts: `Element`, `Int`, `(Set Element)`. Set terms are
//! built from declared constants, `emptyset` (bare or as
//! `(as emptyset (Set Element))`), `singleton`, `union`, `inter`, and
//! `setminus`. Atoms are `member`, `subset`, `=`, `distinct`, the integer
//! comparisons `<`, `<=`, `>`, `>=` over linear expressions (`+`, `-`,
//! `(* literal expr)`, `card` applications, `Int` constants, literals), and
//! `not` over any atom. Anything else is rejected with a positioned error.
//!
//! `card` applications are purified while parsing: `(card t)` becomes the
//! canonical cardinality variable of `t`, and a constraint linking the two
//! is recorded once per distinct term. `(subset s t)` is sugar for
//! `(= s (inter s t))`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::ast::{CardAtom, Constraint, Ctx, Rel, Sort, Sym, TermId};

/// Parse failure at a 1-based line/column position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: u32, col: u32, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        col,
        msg: msg.into(),
    })
}

/// Solver options set from the script via `set-option`. `None` means the
/// script did not mention the option.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScriptOptions {
    pub guess_empty_set: Option<bool>,
    pub guess_lower_bound: Option<bool>,
}

/// A fully parsed script.
#[derive(Debug)]
pub struct ParsedInput {
    pub ctx: Ctx,
    /// Declared symbols, in declaration order.
    pub decls: Vec<Sym>,
    pub constraints: Vec<Constraint>,
    /// Distinct `card` argument terms, in first-occurrence order; model
    /// output reports one cardinality per entry.
    pub card_apps: Vec<TermId>,
    /// Whether the script requested `get-model`.
    pub want_model: bool,
    pub options: ScriptOptions,
}

// ----- lexing and s-expressions -----

enum Token {
    Open(u32, u32),
    Close(u32, u32),
    Atom(String, u32, u32),
}

fn is_atom_char(c: char) -> bool {
    c.is_alphanumeric()
        || matches!(
            c,
            '_' | '-' | '+' | '*' | '/' | '<' | '>' | '=' | '.' | ':' | '?' | '!' | '@' | '$'
                | '%' | '&' | '^' | '~'
        )
}

fn lex(text: &str) -> Result<(Vec<Token>, (u32, u32)), ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = Vec::with_capacity(chars.len() + 1);
    let (mut l, mut c) = (1u32, 1u32);
    for &ch in &chars {
        pos.push((l, c));
        if ch == '\n' {
            l += 1;
            c = 1;
        } else {
            c += 1;
        }
    }
    pos.push((l, c));

    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let (l, c) = pos[i];
        if ch == '(' {
            toks.push(Token::Open(l, c));
            i += 1;
        } else if ch == ')' {
            toks.push(Token::Close(l, c));
            i += 1;
        } else if ch == ';' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if ch.is_whitespace() {
            i += 1;
        } else if is_atom_char(ch) {
            let start = i;
            while i < chars.len() && is_atom_char(chars[i]) {
                i += 1;
            }
            toks.push(Token::Atom(chars[start..i].iter().collect(), l, c));
        } else {
            return err(l, c, format!("unexpected character `{ch}`"));
        }
    }
    Ok((toks, pos[chars.len()]))
}

enum Sexp {
    Atom { text: String, line: u32, col: u32 },
    List { items: Vec<Sexp>, line: u32, col: u32 },
}

impl Sexp {
    fn pos(&self) -> (u32, u32) {
        match self {
            Sexp::Atom { line, col, .. } | Sexp::List { line, col, .. } => (*line, *col),
        }
    }

    fn atom_text(&self) -> Option<&str> {
        match self {
            Sexp::Atom { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }
}

fn parse_sexps(toks: Vec<Token>) -> Result<Vec<Sexp>, ParseError> {
    let mut cur: Vec<Sexp> = Vec::new();
    let mut stack: Vec<(Vec<Sexp>, u32, u32)> = Vec::new();
    for t in toks {
        match t {
            Token::Open(l, c) => stack.push((std::mem::take(&mut cur), l, c)),
            Token::Close(l, c) => {
                let Some((parent, ll, lc)) = stack.pop() else {
                    return err(l, c, "unmatched `)`");
                };
                let done = Sexp::List {
                    items: std::mem::replace(&mut cur, parent),
                    line: ll,
                    col: lc,
                };
                cur.push(done);
            }
            Token::Atom(s, l, c) => cur.push(Sexp::Atom {
                text: s,
                line: l,
                col: c,
            }),
        }
    }
    if let Some((_, l, c)) = stack.pop() {
        return err(l, c, "unclosed `(`");
    }
    Ok(cur)
}

// ----- script walking -----

/// Linear integer expression: a sum of coefficient-variable pairs plus a
/// constant.
#[derive(Clone, Default)]
struct Lin {
    terms: Vec<(i64, Sym)>,
    konst: i64,
}

enum Val {
    Set(TermId),
    Elem(Sym),
    Int(Lin),
}

impl Val {
    fn kind(&self) -> &'static str {
        match self {
            Val::Set(_) => "a set",
            Val::Elem(_) => "an element",
            Val::Int(_) => "an integer",
        }
    }
}

struct Parser {
    ctx: Ctx,
    decls: Vec<Sym>,
    constraints: Vec<Constraint>,
    card_apps: Vec<TermId>,
    seen_cards: HashSet<TermId>,
    want_model: bool,
    options: ScriptOptions,
    checked: bool,
}

/// Parses a full script.
pub fn parse(text: &str) -> Result<ParsedInput, ParseError> {
    let (toks, eof) = lex(text)?;
    let forms = parse_sexps(toks)?;
    let mut p = Parser {
        ctx: Ctx::new(),
        decls: Vec::new(),
        constraints: Vec::new(),
        card_apps: Vec::new(),
        seen_cards: HashSet::new(),
        want_model: false,
        options: ScriptOptions::default(),
        checked: false,
    };
    for form in &forms {
        p.command(form)?;
    }
    if !p.checked {
        return err(eof.0, eof.1, "script has no `check-sat`");
    }
    Ok(ParsedInput {
        ctx: p.ctx,
        decls: p.decls,
        constraints: p.constraints,
        card_apps: p.card_apps,
        want_model: p.want_model,
        options: p.options,
    })
}

impl Parser {
    fn command(&mut self, form: &Sexp) -> Result<(), ParseError> {
        let (line, col) = form.pos();
        let Sexp::List { items, .. } = form else {
            return err(line, col, "expected a command (a parenthesized form)");
        };
        let Some(head) = items.first().and_then(Sexp::atom_text) else {
            return err(line, col, "expected a command name");
        };
        match head {
            "declare-const" => {
                if items.len() != 3 {
                    return err(line, col, "`declare-const` takes a name and a sort");
                }
                let (nl, nc) = items[1].pos();
                let Some(name) = items[1].atom_text() else {
                    return err(nl, nc, "expected a constant name");
                };
                if name.starts_with("__") {
                    return err(nl, nc, "names starting with `__` are reserved");
                }
                if self.ctx.lookup(name).is_some() {
                    return err(nl, nc, format!("duplicate declaration of `{name}`"));
                }
                let sort = self.sort(&items[2])?;
                let sym = self
                    .ctx
                    .declare(name, sort)
                    .map_err(|e| ParseError {
                        line: nl,
                        col: nc,
                        msg: e.to_string(),
                    })?;
                self.decls.push(sym);
                Ok(())
            }
            "assert" => {
                if items.len() != 2 {
                    return err(line, col, "`assert` takes exactly one atom");
                }
                self.atom(&items[1], true)
            }
            "check-sat" => {
                if items.len() != 1 {
                    return err(line, col, "`check-sat` takes no arguments");
                }
                if self.checked {
                    return err(line, col, "multiple `check-sat` commands");
                }
                self.checked = true;
                Ok(())
            }
            "get-model" => {
                if items.len() != 1 {
                    return err(line, col, "`get-model` takes no arguments");
                }
                self.want_model = true;
                Ok(())
            }
            "set-option" => {
                if items.len() != 3 {
                    return err(line, col, "`set-option` takes a keyword and a value");
                }
                let (kl, kc) = items[1].pos();
                let Some(key) = items[1].atom_text() else {
                    return err(kl, kc, "expected an option keyword");
                };
                let (vl, vc) = items[2].pos();
                let value = match items[2].atom_text() {
                    Some("true") => true,
                    Some("false") => false,
                    _ => return err(vl, vc, "expected `true` or `false`"),
                };
                match key {
                    ":guess-empty-set" => self.options.guess_empty_set = Some(value),
                    ":guess-lower-bound" => self.options.guess_lower_bound = Some(value),
                    _ => return err(kl, kc, format!("unknown option `{key}`")),
                }
                Ok(())
            }
            other => err(line, col, format!("unknown command `{other}`")),
        }
    }

    fn sort(&mut self, form: &Sexp) -> Result<Sort, ParseError> {
        let (line, col) = form.pos();
        match form {
            Sexp::Atom { text, .. } => match text.as_str() {
                "Element" => Ok(Sort::Element),
                "Int" => Ok(Sort::Card),
                other => err(line, col, format!("unknown sort `{other}`")),
            },
            Sexp::List { items, .. } => {
                let inner: Vec<Option<&str>> = items.iter().map(Sexp::atom_text).collect();
                if inner == [Some("Set"), Some("Element")] {
                    Ok(Sort::Set)
                } else {
                    err(line, col, "unknown sort (expected `Element`, `Int`, or `(Set Element)`)")
                }
            }
        }
    }

    // ----- atoms -----

    fn atom(&mut self, form: &Sexp, positive: bool) -> Result<(), ParseError> {
        let (line, col) = form.pos();
        let Sexp::List { items, .. } = form else {
            return err(line, col, "expected an atom (a predicate application)");
        };
        let Some(head) = items.first().and_then(Sexp::atom_text) else {
            return err(line, col, "expected a predicate name");
        };
        match head {
            "not" => {
                if items.len() != 2 {
                    return err(line, col, "`not` takes exactly one atom");
                }
                self.atom(&items[1], !positive)
            }
            "member" => {
                if items.len() != 3 {
                    return err(line, col, "`member` takes an element and a set");
                }
                let x = self.elem_expr(&items[1])?;
                let s = self.set_expr(&items[2])?;
                self.constraints.push(if positive {
                    Constraint::Member(x, s)
                } else {
                    Constraint::NotMember(x, s)
                });
                Ok(())
            }
            "subset" => {
                if items.len() != 3 {
                    return err(line, col, "`subset` takes two sets");
                }
                let s = self.set_expr(&items[1])?;
                let t = self.set_expr(&items[2])?;
                let cap = self.ctx.inter(s, t);
                self.constraints.push(if positive {
                    Constraint::SetEq(s, cap)
                } else {
                    Constraint::SetNeq(s, cap)
                });
                Ok(())
            }
            "=" => {
                if items.len() != 3 {
                    return err(line, col, "`=` takes exactly two arguments");
                }
                let a = self.expr(&items[1])?;
                let b = self.expr(&items[2])?;
                let c = self.equality(a, b, positive, line, col)?;
                self.constraints.push(c);
                Ok(())
            }
            "distinct" => {
                if items.len() < 3 {
                    return err(line, col, "`distinct` takes at least two arguments");
                }
                if !positive && items.len() > 3 {
                    return err(line, col, "negated n-ary `distinct` is not supported");
                }
                let vals: Vec<Val> = items[1..]
                    .iter()
                    .map(|it| self.expr(it))
                    .collect::<Result<_, _>>()?;
                for i in 0..vals.len() {
                    for j in i + 1..vals.len() {
                        let c = self.equality(
                            clone_val(&vals[i]),
                            clone_val(&vals[j]),
                            !positive,
                            line,
                            col,
                        )?;
                        self.constraints.push(c);
                    }
                }
                Ok(())
            }
            "<" | "<=" | ">" | ">=" => {
                if items.len() != 3 {
                    return err(line, col, format!("`{head}` takes exactly two arguments"));
                }
                let l = self.int_expr(&items[1])?;
                let r = self.int_expr(&items[2])?;
                // Normalize to `<` or `>=` on l - r, shifting by one for the
                // strict/non-strict variants; negation flips the relation.
                let (mut rel, shift) = match head {
                    "<" => (Rel::Lt, 0),
                    "<=" => (Rel::Lt, 1),
                    ">" => (Rel::Ge, 1),
                    _ => (Rel::Ge, 0),
                };
                if !positive {
                    rel = match rel {
                        Rel::Lt => Rel::Ge,
                        Rel::Ge => Rel::Lt,
                        Rel::Eq | Rel::Ne => unreachable!(),
                    };
                }
                self.constraints.push(lin_atom(l, r, rel, shift));
                Ok(())
            }
            other => err(line, col, format!("unknown predicate `{other}`")),
        }
    }

    fn equality(
        &mut self,
        a: Val,
        b: Val,
        positive: bool,
        line: u32,
        col: u32,
    ) -> Result<Constraint, ParseError> {
        match (a, b) {
            (Val::Set(s), Val::Set(t)) => Ok(if positive {
                Constraint::SetEq(s, t)
            } else {
                Constraint::SetNeq(s, t)
            }),
            (Val::Elem(x), Val::Elem(y)) => Ok(if positive {
                Constraint::ElemEq(x, y)
            } else {
                Constraint::ElemNeq(x, y)
            }),
            (Val::Int(l), Val::Int(r)) => {
                Ok(lin_atom(l, r, if positive { Rel::Eq } else { Rel::Ne }, 0))
            }
            (a, b) => err(
                line,
                col,
                format!("sort mismatch: cannot equate {} with {}", a.kind(), b.kind()),
            ),
        }
    }

    // ----- expressions -----

    fn expr(&mut self, form: &Sexp) -> Result<Val, ParseError> {
        let (line, col) = form.pos();
        match form {
            Sexp::Atom { text, .. } => {
                if text.chars().next().is_some_and(|c| c.is_ascii_digit())
                    || (text.len() > 1 && text.starts_with('-'))
                {
                    let n: i64 = match text.parse() {
                        Ok(n) => n,
                        Err(_) => return err(line, col, format!("bad integer literal `{text}`")),
                    };
                    return Ok(Val::Int(Lin {
                        terms: Vec::new(),
                        konst: n,
                    }));
                }
                if text == "emptyset" {
                    return Ok(Val::Set(self.ctx.empty()));
                }
                let Some(sym) = self.ctx.lookup(text) else {
                    return err(line, col, format!("`{text}` is not declared"));
                };
                Ok(match self.ctx.sym_sort(sym) {
                    Sort::Element => Val::Elem(sym),
                    Sort::Set => Val::Set(self.ctx.var(sym).expect("set-sorted symbol")),
                    Sort::Card => Val::Int(Lin {
                        terms: vec![(1, sym)],
                        konst: 0,
                    }),
                })
            }
            Sexp::List { items, .. } => {
                let Some(head) = items.first().and_then(Sexp::atom_text) else {
                    return err(line, col, "expected an operator");
                };
                match head {
                    "union" | "inter" | "setminus" => {
                        if items.len() != 3 {
                            return err(line, col, format!("`{head}` takes exactly two sets"));
                        }
                        let a = self.set_expr(&items[1])?;
                        let b = self.set_expr(&items[2])?;
                        Ok(Val::Set(match head {
                            "union" => self.ctx.union(a, b),
                            "inter" => self.ctx.inter(a, b),
                            _ => self.ctx.diff(a, b),
                        }))
                    }
                    "singleton" => {
                        if items.len() != 2 {
                            return err(line, col, "`singleton` takes one element");
                        }
                        let x = self.elem_expr(&items[1])?;
                        Ok(Val::Set(self.ctx.singleton(x).expect("element argument")))
                    }
                    "as" => {
                        // (as emptyset (Set Element))
                        if items.len() == 3
                            && items[1].atom_text() == Some("emptyset")
                            && self.sort(&items[2]).ok() == Some(Sort::Set)
                        {
                            Ok(Val::Set(self.ctx.empty()))
                        } else {
                            err(line, col, "the only `as` form is `(as emptyset (Set Element))`")
                        }
                    }
                    "card" => {
                        if items.len() != 2 {
                            return err(line, col, "`card` takes one set");
                        }
                        let t = self.set_expr(&items[1])?;
                        let cv = self.ctx.card_var_of(t);
                        if self.seen_cards.insert(t) {
                            self.constraints.push(Constraint::CardOf(cv, t));
                            self.card_apps.push(t);
                        }
                        Ok(Val::Int(Lin {
                            terms: vec![(1, cv)],
                            konst: 0,
                        }))
                    }
                    "+" => {
                        if items.len() < 2 {
                            return err(line, col, "`+` takes at least one argument");
                        }
                        let mut acc = Lin::default();
                        for it in &items[1..] {
                            acc = lin_add(acc, self.int_expr(it)?, 1);
                        }
                        Ok(Val::Int(acc))
                    }
                    "-" => {
                        if items.len() < 2 {
                            return err(line, col, "`-` takes at least one argument");
                        }
                        let first = self.int_expr(&items[1])?;
                        if items.len() == 2 {
                            return Ok(Val::Int(lin_add(Lin::default(), first, -1)));
                        }
                        let mut acc = first;
                        for it in &items[2..] {
                            acc = lin_add(acc, self.int_expr(it)?, -1);
                        }
                        Ok(Val::Int(acc))
                    }
                    "*" => {
                        if items.len() != 3 {
                            return err(line, col, "`*` takes exactly two arguments");
                        }
                        let a = self.int_expr(&items[1])?;
                        let b = self.int_expr(&items[2])?;
                        if a.terms.is_empty() {
                            Ok(Val::Int(lin_add(Lin::default(), b, a.konst)))
                        } else if b.terms.is_empty() {
                            Ok(Val::Int(lin_add(Lin::default(), a, b.konst)))
                        } else {
                            err(line, col, "nonlinear multiplication is not supported")
                        }
                    }
                    other => err(line, col, format!("unknown term operator `{other}`")),
                }
            }
        }
    }

    fn set_expr(&mut self, form: &Sexp) -> Result<TermId, ParseError> {
        let (line, col) = form.pos();
        match self.expr(form)? {
            Val::Set(t) => Ok(t),
            v => err(line, col, format!("expected a set, found {}", v.kind())),
        }
    }

    fn elem_expr(&mut self, form: &Sexp) -> Result<Sym, ParseError> {
        let (line, col) = form.pos();
        match self.expr(form)? {
            Val::Elem(x) => Ok(x),
            v => err(line, col, format!("expected an element, found {}", v.kind())),
        }
    }

    fn int_expr(&mut self, form: &Sexp) -> Result<Lin, ParseError> {
        let (line, col) = form.pos();
        match self.expr(form)? {
            Val::Int(l) => Ok(l),
            v => err(
                line,
                col,
                format!("expected an integer expression, found {}", v.kind()),
            ),
        }
    }
}

fn clone_val(v: &Val) -> Val {
    match v {
        Val::Set(t) => Val::Set(*t),
        Val::Elem(x) => Val::Elem(*x),
        Val::Int(l) => Val::Int(l.clone()),
    }
}

/// `acc + scale * rhs`.
fn lin_add(mut acc: Lin, rhs: Lin, scale: i64) -> Lin {
    for (c, v) in rhs.terms {
        acc.terms.push((scale * c, v));
    }
    acc.konst += scale * rhs.konst;
    acc
}

/// `l REL r (+ shift on the right)` as a canonical atom over `l - r`.
fn lin_atom(l: Lin, r: Lin, rel: Rel, shift: i64) -> Constraint {
    let mut terms = l.terms;
    for (c, v) in r.terms {
        terms.push((-c, v));
    }
    Constraint::Arith(CardAtom::new(terms, rel, r.konst - l.konst + shift))
}

// ----- printing -----

/// Renders declarations and constraints back to script text that [`parse`]
/// accepts. Cardinality-link constraints are omitted: the linked variables
/// print as `(card t)` inside the arithmetic atoms that use them, whether the
/// link came from parsing or appears as an explicit constraint in the list.
pub fn print_script(ctx: &Ctx, decls: &[Sym], constraints: &[Constraint], want_model: bool) -> String {
    let mut links: HashMap<Sym, TermId> = HashMap::new();
    for c in constraints {
        if let Constraint::CardOf(v, s) = c {
            links.entry(*v).or_insert(*s);
        }
    }
    let mut out = String::new();
    for &d in decls {
        let sort = match ctx.sym_sort(d) {
            Sort::Element => "Element",
            Sort::Card => "Int",
            Sort::Set => "(Set Element)",
        };
        out.push_str(&format!("(declare-const {} {})\n", ctx.sym_name(d), sort));
    }
    for c in constraints {
        if matches!(c, Constraint::CardOf(..)) {
            continue;
        }
        out.push_str(&format!("(assert {})\n", atom_text(ctx, &links, c)));
    }
    out.push_str("(check-sat)\n");
    if want_model {
        out.push_str("(get-model)\n");
    }
    out
}

fn atom_text(ctx: &Ctx, links: &HashMap<Sym, TermId>, c: &Constraint) -> String {
    match c {
        Constraint::SetEq(s, t) => format!("(= {} {})", ctx.term_text(*s), ctx.term_text(*t)),
        Constraint::SetNeq(s, t) => {
            format!("(not (= {} {}))", ctx.term_text(*s), ctx.term_text(*t))
        }
        Constraint::Member(x, s) => {
            format!("(member {} {})", ctx.sym_name(*x), ctx.term_text(*s))
        }
        Constraint::NotMember(x, s) => {
            format!("(not (member {} {}))", ctx.sym_name(*x), ctx.term_text(*s))
        }
        Constraint::ElemEq(x, y) => format!("(= {} {})", ctx.sym_name(*x), ctx.sym_name(*y)),
        Constraint::ElemNeq(x, y) => {
            format!("(not (= {} {}))", ctx.sym_name(*x), ctx.sym_name(*y))
        }
        Constraint::CardOf(v, s) => {
            // Only reachable if a caller prints a link directly; keep it
            // parseable.
            format!("(= {} (card {}))", ctx.sym_name(*v), ctx.term_text(*s))
        }
        Constraint::Arith(a) => arith_text(ctx, links, a),
    }
}

fn int_term_text(ctx: &Ctx, links: &HashMap<Sym, TermId>, v: Sym) -> String {
    let linked = ctx.card_var_term(v).or_else(|| links.get(&v).copied());
    match linked {
        Some(t) => format!("(card {})", ctx.term_text(t)),
        None => ctx.sym_name(v).to_string(),
    }
}

fn arith_text(ctx: &Ctx, links: &HashMap<Sym, TermId>, a: &CardAtom) -> String {
    let parts: Vec<String> = a
        .lhs
        .iter()
        .map(|&(c, v)| {
            let vt = int_term_text(ctx, links, v);
            if c == 1 {
                vt
            } else {
                format!("(* {c} {vt})")
            }
        })
        .collect();
    let lhs = match parts.len() {
        0 => "0".to_string(),
        1 => parts.into_iter().next().expect("one part"),
        _ => format!("(+ {})", parts.join(" ")),
    };
    let rhs = a.rhs;
    match a.rel {
        Rel::Eq => format!("(= {lhs} {rhs})"),
        Rel::Ne => format!("(not (= {lhs} {rhs}))"),
        Rel::Lt => format!("(< {lhs} {rhs})"),
        Rel::Ge => format!("(>= {lhs} {rhs})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(p: &ParsedInput) -> Vec<String> {
        p.constraints
            .iter()
            .map(|c| p.ctx.constraint_text(c))
            .collect()
    }

    #[test]
    fn declares_and_basic_atoms() {
        let p = parse(
            "(declare-const S (Set Element))\n\
             (declare-const x Element)\n\
             (declare-const k Int)\n\
             (assert (member x S))\n\
             (assert (not (member x (union S S))))\n\
             (check-sat)\n",
        )
        .unwrap();
        assert_eq!(p.decls.len(), 3);
        assert_eq!(p.ctx.sym_sort(p.decls[0]), Sort::Set);
        assert_eq!(p.ctx.sym_sort(p.decls[1]), Sort::Element);
        assert_eq!(p.ctx.sym_sort(p.decls[2]), Sort::Card);
        assert_eq!(
            texts(&p),
            ["(member x S)", "(not (member x (union S S)))"]
        );
        assert!(!p.want_model);
    }

    #[test]
    fn subset_is_sugar_for_an_intersection_equality() {
        let p = parse(
            "(declare-const A (Set Element))\n\
             (declare-const B (Set Element))\n\
             (assert (subset A B))\n\
             (assert (not (subset B A)))\n\
             (check-sat)\n",
        )
        .unwrap();
        assert_eq!(
            texts(&p),
            ["(= A (inter A B))", "(not (= B (inter B A)))"]
        );
    }

    #[test]
    fn card_applications_are_purified_once() {
        let p = parse(
            "(declare-const S (Set Element))\n\
             (assert (>= (card S) 3))\n\
             (assert (< (card S) 7))\n\
             (check-sat)\n",
        )
        .unwrap();
        assert_eq!(p.card_apps.len(), 1);
        let link_count = p
            .constraints
            .iter()
            .filter(|c| matches!(c, Constraint::CardOf(..)))
            .count();
        assert_eq!(link_count, 1);
        assert_eq!(p.constraints.len(), 3);
    }

    #[test]
    fn integer_comparisons_normalize_to_lt_and_ge() {
        let p = parse(
            "(declare-const a Int)\n\
             (declare-const b Int)\n\
             (assert (<= a 2))\n\
             (assert (> a b))\n\
             (assert (not (< a 5)))\n\
             (assert (= (+ a (* 2 b)) 4))\n\
             (assert (distinct a b))\n\
             (check-sat)\n",
        )
        .unwrap();
        let a = p.ctx.lookup("a").unwrap();
        let b = p.ctx.lookup("b").unwrap();
        let atoms: Vec<&CardAtom> = p
            .constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::Arith(at) => Some(at),
                _ => None,
            })
            .collect();
        assert_eq!(atoms[0], &CardAtom::simple(a, Rel::Lt, 3));
        assert_eq!(atoms[1], &CardAtom::new([(1, a), (-1, b)], Rel::Ge, 1));
        assert_eq!(atoms[2], &CardAtom::simple(a, Rel::Ge, 5));
        assert_eq!(atoms[3], &CardAtom::new([(1, a), (2, b)], Rel::Eq, 4));
        assert_eq!(atoms[4], &CardAtom::new([(1, a), (-1, b)], Rel::Ne, 0));
    }

    #[test]
    fn distinct_expands_pairwise() {
        let p = parse(
            "(declare-const x Element)\n\
             (declare-const y Element)\n\
             (declare-const z Element)\n\
             (assert (distinct x y z))\n\
             (assert (not (distinct x y)))\n\
             (check-sat)\n",
        )
        .unwrap();
        assert_eq!(
            texts(&p),
            [
                "(not (= x y))",
                "(not (= x z))",
                "(not (= y z))",
                "(= x y)"
            ]
        );
        let e = parse(
            "(declare-const x Element)\n(declare-const y Element)\n(declare-const z Element)\n\
             (assert (not (distinct x y z)))\n(check-sat)\n",
        )
        .unwrap_err();
        assert!(e.msg.contains("negated n-ary `distinct`"), "got: {e}");
    }

    #[test]
    fn emptyset_forms_and_options() {
        let p = parse(
            "(set-option :guess-empty-set false)\n\
             (declare-const S (Set Element))\n\
             (assert (= S (as emptyset (Set Element))))\n\
             (assert (not (= S emptyset)))\n\
             (check-sat)\n\
             (get-model)\n",
        )
        .unwrap();
        assert_eq!(p.options.guess_empty_set, Some(false));
        assert_eq!(p.options.guess_lower_bound, None);
        assert!(p.want_model);
        assert_eq!(texts(&p), ["(= S emptyset)", "(not (= S emptyset))"]);
    }

    #[test]
    fn errors_carry_one_based_positions() {
        let e = parse("(declare-const S (Set Element))\n(assert\n        (member q S))\n(check-sat)\n")
            .unwrap_err();
        assert_eq!((e.line, e.col), (3, 17));
        assert_eq!(e.to_string(), "3:17: `q` is not declared");
    }

    #[test]
    fn malformed_scripts_are_rejected() {
        let cases: &[(&str, &str)] = &[
            ("(frobnicate)\n(check-sat)\n", "unknown command"),
            ("(declare-const __x Element)\n(check-sat)\n", "reserved"),
            (
                "(declare-const x Element)\n(declare-const x Element)\n(check-sat)\n",
                "duplicate declaration",
            ),
            ("(declare-const x Bool)\n(check-sat)\n", "unknown sort"),
            ("(declare-const x Element)\n", "no `check-sat`"),
            ("(check-sat)\n(check-sat)\n", "multiple `check-sat`"),
            (
                "(declare-const a Int)\n(assert (= a (* a a)))\n(check-sat)\n",
                "nonlinear",
            ),
            (
                "(declare-const x Element)\n(declare-const S (Set Element))\n(assert (= x S))\n(check-sat)\n",
                "sort mismatch",
            ),
            ("(assert (member x S)\n", "unclosed `(`"),
            (")\n", "unmatched `)`"),
            (
                "(set-option :unknown-thing true)\n(check-sat)\n",
                "unknown option",
            ),
            (
                "(declare-const S (Set Element))\n(assert (union S S))\n(check-sat)\n",
                "unknown predicate",
            ),
        ];
        for (text, needle) in cases {
            let e = parse(text).unwrap_err();
            assert!(
                e.msg.contains(needle),
                "script {text:?} gave `{e}`, expected a message containing {needle:?}"
            );
        }
    }

    #[test]
    fn comments_and_whitespace_are_skipped() {
        let p = parse(
            "; a header comment\n\
             (declare-const S (Set Element)) ; trailing\n\
             \t (check-sat)\n",
        )
        .unwrap();
        assert_eq!(p.decls.len(), 1);
    }

    #[test]
    fn printing_reparses_to_a_fixed_point() {
        let text = "(declare-const S (Set Element))\n\
                    (declare-const T (Set Element))\n\
                    (declare-const x Element)\n\
                    (declare-const k Int)\n\
                    (assert (member x (setminus S T)))\n\
                    (assert (subset T S))\n\
                    (assert (not (= S T)))\n\
                    (assert (< (+ (card S) (* -2 (card T)) k) 7))\n\
                    (assert (distinct k 3))\n\
                    (check-sat)\n\
                    (get-model)\n";
        let p1 = parse(text).unwrap();
        let printed1 = print_script(&p1.ctx, &p1.decls, &p1.constraints, p1.want_model);
        let p2 = parse(&printed1).unwrap();
        let printed2 = print_script(&p2.ctx, &p2.decls, &p2.constraints, p2.want_model);
        assert_eq!(printed1, printed2);
        assert_eq!(texts(&p1), texts(&p2));
        assert_eq!(p1.card_apps.len(), p2.card_apps.len());
    }
}
