//! Abstract syntax of the core language: terms, contexts, and module
//! declarations, together with the de Bruijn machinery (shift, substitution,
//! alpha equivalence) that every judgment builds on.
//!
//! Bound variables are de Bruijn indices; surface names survive only in
//! declarations and are re-invented by the pretty printer. This makes
//! alpha equivalence structural equality.

use std::fmt;

/// Universe layer of the stratified hierarchy.
///
/// `Uc(i)` carries executable objects, `TypeL(i)` carries trace-indexed
/// families, and `Prop` is the proposition layer sitting below `TypeL(0)`.
/// The hierarchies are non-cumulative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    Uc(u32),
    TypeL(u32),
    Prop,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Uc(i) => write!(f, "Uc{i}"),
            Layer::TypeL(i) => write!(f, "Type{i}"),
            Layer::Prop => write!(f, "Prop"),
        }
    }
}

/// Terms of the core language.
///
/// `Pi` and `Lam` bind one variable in their second (resp. only) component.
/// `TraceElim(motive, base, step, scrutinee)` is the finite-trace eliminator;
/// its computation rules live in the kernel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Bound variable, innermost binder = 0.
    Var(usize),
    Universe(Layer),
    /// Dependent product; the codomain binds one variable.
    Pi(Box<Term>, Box<Term>),
    /// Unannotated lambda; checkable against `Pi` only.
    Lam(Box<Term>),
    App(Box<Term>, Box<Term>),
    /// Declared state constant.
    StateConst(String),
    /// Declared event constant.
    EventConst(String),
    /// Opaque one-step transition witness introduced by a step declaration.
    StepWitness(String),
    /// Empty trace at a state: `nil(s) : FinTrace(s, s)`.
    Nil(Box<Term>),
    /// Trace extension: `step(prefix, event, witness)`.
    Step(Box<Term>, Box<Term>, Box<Term>),
    /// `trace_elim(motive, base, step, scrutinee)`.
    TraceElim(Box<Term>, Box<Term>, Box<Term>, Box<Term>),
    /// Endpoint-indexed finite trace type.
    FinTraceTy(Box<Term>, Box<Term>),
    /// One-step transition type `Step(src, event, dst)`.
    StepTy(Box<Term>, Box<Term>, Box<Term>),
    StateTy,
    EventTy,
    NatTy,
    Zero,
    Succ(Box<Term>),
    InfTraceTy,
    /// Reference to a corecursive infinite-trace definition.
    CorecRef(String),
    /// The empty proposition.
    Bottom,
}

impl Term {
    pub fn var(i: usize) -> Term {
        Term::Var(i)
    }
    pub fn pi(dom: Term, cod: Term) -> Term {
        Term::Pi(Box::new(dom), Box::new(cod))
    }
    pub fn lam(body: Term) -> Term {
        Term::Lam(Box::new(body))
    }
    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }
    /// Left-nested application `f a1 a2 ...`.
    pub fn apps(f: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(f, Term::app)
    }
    pub fn state(name: impl Into<String>) -> Term {
        Term::StateConst(name.into())
    }
    pub fn event(name: impl Into<String>) -> Term {
        Term::EventConst(name.into())
    }
    pub fn witness(name: impl Into<String>) -> Term {
        Term::StepWitness(name.into())
    }
    pub fn nil(state: Term) -> Term {
        Term::Nil(Box::new(state))
    }
    pub fn step(prefix: Term, event: Term, witness: Term) -> Term {
        Term::Step(Box::new(prefix), Box::new(event), Box::new(witness))
    }
    pub fn trace_elim(motive: Term, base: Term, step: Term, scrutinee: Term) -> Term {
        Term::TraceElim(
            Box::new(motive),
            Box::new(base),
            Box::new(step),
            Box::new(scrutinee),
        )
    }
    pub fn fin_trace_ty(src: Term, dst: Term) -> Term {
        Term::FinTraceTy(Box::new(src), Box::new(dst))
    }
    pub fn step_ty(src: Term, event: Term, dst: Term) -> Term {
        Term::StepTy(Box::new(src), Box::new(event), Box::new(dst))
    }
    pub fn succ(t: Term) -> Term {
        Term::Succ(Box::new(t))
    }
    /// `Succ^n(Zero)`.
    pub fn nat(n: u64) -> Term {
        let mut t = Term::Zero;
        for _ in 0..n {
            t = Term::succ(t);
        }
        t
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_)
            | Term::Universe(_)
            | Term::StateConst(_)
            | Term::EventConst(_)
            | Term::StepWitness(_)
            | Term::StateTy
            | Term::EventTy
            | Term::NatTy
            | Term::Zero
            | Term::InfTraceTy
            | Term::CorecRef(_)
            | Term::Bottom => 1,
            Term::Lam(b) | Term::Nil(b) | Term::Succ(b) => 1 + b.size(),
            Term::Pi(a, b) | Term::App(a, b) | Term::FinTraceTy(a, b) => 1 + a.size() + b.size(),
            Term::Step(a, b, c) | Term::StepTy(a, b, c) => 1 + a.size() + b.size() + c.size(),
            Term::TraceElim(a, b, c, d) => 1 + a.size() + b.size() + c.size() + d.size(),
        }
    }

    /// True iff every variable index is bound, assuming `depth` enclosing
    /// binders.
    pub fn is_scope_valid(&self, depth: usize) -> bool {
        match self {
            Term::Var(i) => *i < depth,
            Term::Universe(_)
            | Term::StateConst(_)
            | Term::EventConst(_)
            | Term::StepWitness(_)
            | Term::StateTy
            | Term::EventTy
            | Term::NatTy
            | Term::Zero
            | Term::InfTraceTy
            | Term::CorecRef(_)
            | Term::Bottom => true,
            Term::Lam(b) => b.is_scope_valid(depth + 1),
            Term::Pi(a, b) => a.is_scope_valid(depth) && b.is_scope_valid(depth + 1),
            Term::Nil(s) => s.is_scope_valid(depth),
            Term::Succ(t) => t.is_scope_valid(depth),
            Term::App(f, a) => f.is_scope_valid(depth) && a.is_scope_valid(depth),
            Term::FinTraceTy(a, b) => a.is_scope_valid(depth) && b.is_scope_valid(depth),
            Term::Step(a, b, c) | Term::StepTy(a, b, c) => {
                a.is_scope_valid(depth) && b.is_scope_valid(depth) && c.is_scope_valid(depth)
            }
            Term::TraceElim(a, b, c, d) => {
                a.is_scope_valid(depth)
                    && b.is_scope_valid(depth)
                    && c.is_scope_valid(depth)
                    && d.is_scope_valid(depth)
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.is_scope_valid(0)
    }
}

/// Shift free indices `>= cutoff` by `amount`.
pub fn shift(t: &Term, cutoff: usize, amount: usize) -> Term {
    match t {
        Term::Var(i) => {
            if *i >= cutoff {
                Term::Var(i + amount)
            } else {
                Term::Var(*i)
            }
        }
        Term::Universe(_)
        | Term::StateConst(_)
        | Term::EventConst(_)
        | Term::StepWitness(_)
        | Term::StateTy
        | Term::EventTy
        | Term::NatTy
        | Term::Zero
        | Term::InfTraceTy
        | Term::CorecRef(_)
        | Term::Bottom => t.clone(),
        Term::Pi(a, b) => Term::pi(shift(a, cutoff, amount), shift(b, cutoff + 1, amount)),
        Term::Lam(b) => Term::lam(shift(b, cutoff + 1, amount)),
        Term::App(f, a) => Term::app(shift(f, cutoff, amount), shift(a, cutoff, amount)),
        Term::Nil(s) => Term::nil(shift(s, cutoff, amount)),
        Term::Succ(n) => Term::succ(shift(n, cutoff, amount)),
        Term::Step(a, b, c) => Term::step(
            shift(a, cutoff, amount),
            shift(b, cutoff, amount),
            shift(c, cutoff, amount),
        ),
        Term::StepTy(a, b, c) => Term::step_ty(
            shift(a, cutoff, amount),
            shift(b, cutoff, amount),
            shift(c, cutoff, amount),
        ),
        Term::FinTraceTy(a, b) => {
            Term::fin_trace_ty(shift(a, cutoff, amount), shift(b, cutoff, amount))
        }
        Term::TraceElim(p, b, s, tr) => Term::trace_elim(
            shift(p, cutoff, amount),
            shift(b, cutoff, amount),
            shift(s, cutoff, amount),
            shift(tr, cutoff, amount),
        ),
    }
}

/// Weaken under `at` binders: shift free indices `>= at` by one.
pub fn weaken(t: &Term, at: usize) -> Term {
    shift(t, at, 1)
}

/// Substitute `s` for the variable bound at depth `at` inside `t`, removing
/// that binder level: `Var(at)` becomes `s` (shifted under the enclosing
/// binders), indices above `at` drop by one.
pub fn subst_at(t: &Term, at: usize, s: &Term) -> Term {
    match t {
        Term::Var(i) => {
            if *i == at {
                shift(s, 0, at)
            } else if *i > at {
                Term::Var(i - 1)
            } else {
                Term::Var(*i)
            }
        }
        Term::Universe(_)
        | Term::StateConst(_)
        | Term::EventConst(_)
        | Term::StepWitness(_)
        | Term::StateTy
        | Term::EventTy
        | Term::NatTy
        | Term::Zero
        | Term::InfTraceTy
        | Term::CorecRef(_)
        | Term::Bottom => t.clone(),
        Term::Pi(a, b) => Term::pi(subst_at(a, at, s), subst_at(b, at + 1, s)),
        Term::Lam(b) => Term::lam(subst_at(b, at + 1, s)),
        Term::App(f, a) => Term::app(subst_at(f, at, s), subst_at(a, at, s)),
        Term::Nil(st) => Term::nil(subst_at(st, at, s)),
        Term::Succ(n) => Term::succ(subst_at(n, at, s)),
        Term::Step(a, b, c) => Term::step(
            subst_at(a, at, s),
            subst_at(b, at, s),
            subst_at(c, at, s),
        ),
        Term::StepTy(a, b, c) => Term::step_ty(
            subst_at(a, at, s),
            subst_at(b, at, s),
            subst_at(c, at, s),
        ),
        Term::FinTraceTy(a, b) => Term::fin_trace_ty(subst_at(a, at, s), subst_at(b, at, s)),
        Term::TraceElim(p, b, st, tr) => Term::trace_elim(
            subst_at(p, at, s),
            subst_at(b, at, s),
            subst_at(st, at, s),
            subst_at(tr, at, s),
        ),
    }
}

/// Replace the outermost bound variable of a one-binder body with `s`.
pub fn subst(body: &Term, s: &Term) -> Term {
    subst_at(body, 0, s)
}

/// Alpha equivalence. With de Bruijn indices and no stored binder names this
/// is structural equality.
pub fn alpha_eq(t: &Term, u: &Term) -> bool {
    t == u
}

/// Typing telescope of named assumptions. Entry 0 of `entries` is the
/// outermost assumption; de Bruijn index 0 refers to the last entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Context {
    entries: Vec<(String, Term)>,
}

impl Context {
    pub fn empty() -> Context {
        Context::default()
    }

    pub fn from_entries(entries: Vec<(String, Term)>) -> Context {
        Context { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append an assumption as the new innermost entry.
    pub fn push(&mut self, name: impl Into<String>, ty: Term) {
        self.entries.push((name.into(), ty));
    }

    /// A copy extended with one more assumption.
    pub fn extended(&self, name: impl Into<String>, ty: Term) -> Context {
        let mut c = self.clone();
        c.push(name, ty);
        c
    }

    /// Type of `Var(index)` as written at its binding site (not weakened to
    /// the current depth).
    pub fn lookup(&self, index: usize) -> Option<&(String, Term)> {
        if index < self.entries.len() {
            Some(&self.entries[self.entries.len() - 1 - index])
        } else {
            None
        }
    }

    /// Type of `Var(index)` weakened to be valid at the full context depth.
    pub fn lookup_ty(&self, index: usize) -> Option<Term> {
        self.lookup(index).map(|(_, ty)| shift(ty, 0, index + 1))
    }

    /// Entries in binding order (outermost first).
    pub fn entries(&self) -> &[(String, Term)] {
        &self.entries
    }
}

/// Body of a corecursive infinite-trace definition.
///
/// `Cons` is the guarded head/tail form; `Ref` is a bare reference, which the
/// kernel rejects as unguarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorecBody {
    Cons {
        head: Term,
        event: Term,
        tail: String,
    },
    Ref(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorecDecl {
    pub name: String,
    pub body: CorecBody,
}

/// Policy expressions over the events of the ambient transition system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyExpr {
    Occurs(String),
    CountAtLeast(String, u32),
    Not(Box<PolicyExpr>),
    And(Box<PolicyExpr>, Box<PolicyExpr>),
    Or(Box<PolicyExpr>, Box<PolicyExpr>),
}

impl PolicyExpr {
    pub fn occurs(e: impl Into<String>) -> PolicyExpr {
        PolicyExpr::Occurs(e.into())
    }
    pub fn count_at_least(e: impl Into<String>, n: u32) -> PolicyExpr {
        PolicyExpr::CountAtLeast(e.into(), n)
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(e: PolicyExpr) -> PolicyExpr {
        PolicyExpr::Not(Box::new(e))
    }
    pub fn and(a: PolicyExpr, b: PolicyExpr) -> PolicyExpr {
        PolicyExpr::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: PolicyExpr, b: PolicyExpr) -> PolicyExpr {
        PolicyExpr::Or(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for PolicyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyExpr::Occurs(e) => write!(f, "occurs({e})"),
            PolicyExpr::CountAtLeast(e, n) => write!(f, "atleast({e}, {n})"),
            PolicyExpr::Not(e) => write!(f, "not {e}"),
            PolicyExpr::And(a, b) => write!(f, "({a} and {b})"),
            PolicyExpr::Or(a, b) => write!(f, "({a} or {b})"),
        }
    }
}

/// Surface form of a presheaf declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PresheafSurface {
    Predicate {
        expr: PolicyExpr,
        root: String,
        depth: u32,
    },
    Evidence {
        issue: String,
        revoke: String,
        root: String,
        depth: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresheafDecl {
    pub name: String,
    pub spec: PresheafSurface,
}

/// One module-level declaration. Term bodies have definition references
/// already inlined by the parser, so every `Term` here is closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    State(String),
    Event(String),
    Step {
        src: String,
        event: String,
        dst: String,
        witness: String,
    },
    Def {
        name: String,
        ty: Term,
        body: Term,
    },
    Presheaf(PresheafDecl),
    Corec(CorecDecl),
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::State(n) | Decl::Event(n) => n,
            Decl::Step { witness, .. } => witness,
            Decl::Def { name, .. } => name,
            Decl::Presheaf(p) => &p.name,
            Decl::Corec(c) => &c.name,
        }
    }
}

/// Source location, 1-based, end-exclusive on neither side (both endpoints
/// point at real characters).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SourceSpan {
    pub file: String,
    #[serde(rename = "startLine")]
    pub start_line: u32,
    #[serde(rename = "startCol")]
    pub start_col: u32,
    #[serde(rename = "endLine")]
    pub end_line: u32,
    #[serde(rename = "endCol")]
    pub end_col: u32,
}

impl SourceSpan {
    pub fn point(file: impl Into<String>, line: u32, col: u32) -> SourceSpan {
        SourceSpan {
            file: file.into(),
            start_line: line,
            start_col: col,
            end_line: line,
            end_col: col,
        }
    }

    /// Placeholder span for terms built in memory rather than parsed.
    pub fn synthetic() -> SourceSpan {
        SourceSpan::point("<internal>", 1, 1)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.start_line, self.start_col)
    }
}

/// Parsed module: declarations in source order, each with its span.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModuleAst {
    pub file: String,
    pub decls: Vec<(Decl, SourceSpan)>,
}

impl ModuleAst {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().map(|(d, _)| d).find(|d| d.name() == name)
    }
}
