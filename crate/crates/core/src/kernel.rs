//! The proof-checking kernel: context formation, bidirectional typing,
//! definitional equality by normalize-then-compare, and the computation rules
//! of the finite-trace eliminator.
//!
//! Conversion admits exactly beta and the two trace-eliminator equations; no
//! eta. Universes are non-cumulative: `Uc i : Uc (i+1)`, `Type i : Type (i+1)`,
//! `Prop : Type 0`. A product stays in the maximum layer of its parts within
//! one hierarchy and lands in the codomain hierarchy across hierarchies.

use std::collections::BTreeMap;
use std::fmt;

use crate::parser::pretty_print;
use crate::semantics::{validate_system, SystemError, TransitionSystem};
use crate::syntax::{
    alpha_eq, shift, subst, weaken, Context, CorecBody, CorecDecl, Decl, Layer, ModuleAst,
    PresheafDecl, SourceSpan, Term,
};

/// Reduction budget per kernel entry point. Exhaustion signals a kernel bug
/// (the calculus is normalizing) and is reported as an internal error.
pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnboundVariable { name: String },
    UniverseMismatch { found: Term },
    NotAFunction { found: Term },
    ConversionFailure { expected: Term, actual: Term },
    EndpointMismatch { expected: String, actual: String },
    IllFormedContext { entry: String, detail: String },
    UnguardedCorecursion { name: String },
    MotiveMismatch { detail: String },
    /// The term is not in an inferable form (e.g. a bare lambda).
    CannotInfer { detail: String },
    /// Kernel invariant breach, e.g. fuel exhaustion.
    Internal(String),
}

impl TypeErrorKind {
    /// Stable machine-readable code for reports.
    pub fn code(&self) -> &'static str {
        match self {
            TypeErrorKind::UnboundVariable { .. } => "UnboundVariable",
            TypeErrorKind::UniverseMismatch { .. } => "UniverseMismatch",
            TypeErrorKind::NotAFunction { .. } => "NotAFunction",
            TypeErrorKind::ConversionFailure { .. } => "ConversionFailure",
            TypeErrorKind::EndpointMismatch { .. } => "EndpointMismatch",
            TypeErrorKind::IllFormedContext { .. } => "IllFormedContext",
            TypeErrorKind::UnguardedCorecursion { .. } => "UnguardedCorecursion",
            TypeErrorKind::MotiveMismatch { .. } => "MotiveMismatch",
            TypeErrorKind::CannotInfer { .. } => "CannotInfer",
            TypeErrorKind::Internal(_) => "Internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub span: SourceSpan,
}

impl TypeError {
    pub fn new(kind: TypeErrorKind) -> TypeError {
        TypeError {
            kind,
            span: SourceSpan::synthetic(),
        }
    }

    pub fn at(mut self, span: SourceSpan) -> TypeError {
        self.span = span;
        self
    }

    /// Printed expected/actual pair for conversion failures.
    pub fn printed_expected_actual(&self) -> Option<(String, String)> {
        match &self.kind {
            TypeErrorKind::ConversionFailure { expected, actual } => Some((
                pretty_print(expected, &Context::empty()),
                pretty_print(actual, &Context::empty()),
            )),
            TypeErrorKind::EndpointMismatch { expected, actual } => {
                Some((expected.clone(), actual.clone()))
            }
            _ => None,
        }
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let empty = Context::empty();
        match &self.kind {
            TypeErrorKind::UnboundVariable { name } => {
                write!(f, "{}: unbound variable or constant `{name}`", self.span)
            }
            TypeErrorKind::UniverseMismatch { found } => write!(
                f,
                "{}: expected a universe, found `{}`",
                self.span,
                pretty_print(found, &empty)
            ),
            TypeErrorKind::NotAFunction { found } => write!(
                f,
                "{}: not a function type: `{}`",
                self.span,
                pretty_print(found, &empty)
            ),
            TypeErrorKind::ConversionFailure { expected, actual } => write!(
                f,
                "{}: type mismatch: expected `{}`, got `{}`",
                self.span,
                pretty_print(expected, &empty),
                pretty_print(actual, &empty)
            ),
            TypeErrorKind::EndpointMismatch { expected, actual } => write!(
                f,
                "{}: trace endpoint mismatch: expected `{expected}`, got `{actual}`",
                self.span
            ),
            TypeErrorKind::IllFormedContext { entry, detail } => {
                write!(f, "{}: ill-formed context at `{entry}`: {detail}", self.span)
            }
            TypeErrorKind::UnguardedCorecursion { name } => write!(
                f,
                "{}: unguarded corecursion in `{name}` (the corecursive reference must be the tail component)",
                self.span
            ),
            TypeErrorKind::MotiveMismatch { detail } => {
                write!(f, "{}: eliminator mismatch: {detail}", self.span)
            }
            TypeErrorKind::CannotInfer { detail } => {
                write!(f, "{}: cannot infer a type: {detail}", self.span)
            }
            TypeErrorKind::Internal(m) => write!(f, "{}: internal error: {m}", self.span),
        }
    }
}

impl std::error::Error for TypeError {}

fn err(kind: TypeErrorKind) -> TypeError {
    TypeError::new(kind)
}

/// Beta- and trace-elim-normal term with a canonicity flag: true iff the head
/// is not a neutral form (variable, application, or stuck eliminator). For
/// closed well-typed terms this coincides with being constructor-headed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalForm {
    pub term: Term,
    pub is_canonical: bool,
}

/// A checked corecursive definition: head state, tail event, tail reference,
/// all resolved to declared constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorecCons {
    pub head: String,
    pub event: String,
    pub tail: String,
}

/// Global signature a checker runs against: the transition system plus the
/// guardedness-checked corecursive definitions.
#[derive(Debug, Clone, Default)]
pub struct Signature {
    pub system: TransitionSystem,
    pub corecs: BTreeMap<String, CorecCons>,
}

impl Signature {
    pub fn new(system: TransitionSystem) -> Signature {
        Signature {
            system,
            corecs: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckedDef {
    pub name: String,
    pub ty: Term,
    pub body: Term,
}

/// Result of checking a whole module. Immutable; safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct CheckedModule {
    pub signature: Signature,
    pub defs: Vec<CheckedDef>,
    pub presheafs: Vec<PresheafDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckFailure {
    Type(TypeError),
    System(SystemError),
}

impl fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckFailure::Type(e) => e.fmt(f),
            CheckFailure::System(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CheckFailure {}

impl From<TypeError> for CheckFailure {
    fn from(e: TypeError) -> CheckFailure {
        CheckFailure::Type(e)
    }
}

/// The typing and normalization engine for one signature.
pub struct Checker<'a> {
    sig: &'a Signature,
    fuel_limit: u64,
}

impl<'a> Checker<'a> {
    pub fn new(sig: &'a Signature) -> Checker<'a> {
        Checker {
            sig,
            fuel_limit: DEFAULT_FUEL,
        }
    }

    pub fn with_fuel(sig: &'a Signature, fuel_limit: u64) -> Checker<'a> {
        Checker { sig, fuel_limit }
    }

    pub fn signature(&self) -> &Signature {
        self.sig
    }

    // ---- context formation -------------------------------------------------

    /// `ok` iff every entry type is a universe inhabitant under its prefix and
    /// entry names are unique.
    pub fn check_context(&self, ctx: &Context) -> Result<(), TypeError> {
        let mut prefix = Context::empty();
        for (name, ty) in ctx.entries() {
            if prefix.entries().iter().any(|(n, _)| n == name) {
                return Err(err(TypeErrorKind::IllFormedContext {
                    entry: name.clone(),
                    detail: "duplicate name in context".into(),
                }));
            }
            let mut fuel = self.fuel_limit;
            self.infer_universe(&prefix, ty, &mut fuel).map_err(|e| {
                err(TypeErrorKind::IllFormedContext {
                    entry: name.clone(),
                    detail: e.to_string(),
                })
            })?;
            prefix.push(name.clone(), ty.clone());
        }
        Ok(())
    }

    // ---- typing -------------------------------------------------------------

    /// Synthesize the (normalized) type of `t`. Lambdas are not inferable;
    /// they check against a product type.
    pub fn infer(&self, ctx: &Context, t: &Term) -> Result<Term, TypeError> {
        let mut fuel = self.fuel_limit;
        self.infer_fuel(ctx, t, &mut fuel)
    }

    /// `ok` iff `t` checks against the (well-formed) type `expected`.
    pub fn check(&self, ctx: &Context, t: &Term, expected: &Term) -> Result<(), TypeError> {
        let mut fuel = self.fuel_limit;
        self.check_fuel(ctx, t, expected, &mut fuel)
    }

    /// Definitional equality: normalize both sides and compare up to alpha.
    pub fn conv(&self, _ctx: &Context, a: &Term, b: &Term) -> Result<bool, TypeError> {
        let mut fuel = self.fuel_limit;
        let na = self.normalize_fuel(a, &mut fuel)?;
        let nb = self.normalize_fuel(b, &mut fuel)?;
        Ok(alpha_eq(&na, &nb))
    }

    /// Full normalization. Idempotent; guarded by the fuel bound.
    pub fn normalize(&self, t: &Term) -> Result<NormalForm, TypeError> {
        let mut fuel = self.fuel_limit;
        let term = self.normalize_fuel(t, &mut fuel)?;
        let is_canonical = !matches!(
            term,
            Term::Var(_) | Term::App(..) | Term::TraceElim(..)
        );
        Ok(NormalForm { term, is_canonical })
    }

    fn infer_fuel(&self, ctx: &Context, t: &Term, fuel: &mut u64) -> Result<Term, TypeError> {
        match t {
            Term::Var(i) => {
                let ty = ctx.lookup_ty(*i).ok_or_else(|| {
                    err(TypeErrorKind::UnboundVariable {
                        name: format!("#{i}"),
                    })
                })?;
                self.normalize_fuel(&ty, fuel)
            }
            Term::Universe(Layer::Uc(i)) => Ok(Term::Universe(Layer::Uc(i + 1))),
            Term::Universe(Layer::TypeL(i)) => Ok(Term::Universe(Layer::TypeL(i + 1))),
            Term::Universe(Layer::Prop) => Ok(Term::Universe(Layer::TypeL(0))),
            Term::Pi(dom, cod) => {
                let ua = self.infer_universe(ctx, dom, fuel)?;
                let inner = ctx.extended("_x", (**dom).clone());
                let ub = self.infer_universe(&inner, cod, fuel)?;
                Ok(Term::Universe(pi_layer(ua, ub)))
            }
            Term::Lam(_) => Err(err(TypeErrorKind::CannotInfer {
                detail: "a bare lambda checks against a product type only".into(),
            })),
            Term::App(f, a) => {
                if let Term::Lam(body) = f.as_ref() {
                    // immediate redex: type it as a let binding
                    let arg_ty = self.infer_fuel(ctx, a, fuel)?;
                    let inner = ctx.extended("_x", arg_ty);
                    let body_ty = self.infer_fuel(&inner, body, fuel)?;
                    self.normalize_fuel(&subst(&body_ty, a), fuel)
                } else {
                    let fty = self.infer_fuel(ctx, f, fuel)?;
                    match fty {
                        Term::Pi(dom, cod) => {
                            self.check_fuel(ctx, a, &dom, fuel)?;
                            self.normalize_fuel(&subst(&cod, a), fuel)
                        }
                        other => Err(err(TypeErrorKind::NotAFunction { found: other })),
                    }
                }
            }
            Term::StateConst(name) => {
                if self.sig.system.state(name).is_some() {
                    Ok(Term::StateTy)
                } else {
                    Err(err(TypeErrorKind::UnboundVariable { name: name.clone() }))
                }
            }
            Term::EventConst(name) => {
                if self.sig.system.event(name).is_some() {
                    Ok(Term::EventTy)
                } else {
                    Err(err(TypeErrorKind::UnboundVariable { name: name.clone() }))
                }
            }
            Term::StepWitness(name) => {
                let id = self.sig.system.witness(name).ok_or_else(|| {
                    err(TypeErrorKind::UnboundVariable { name: name.clone() })
                })?;
                let step = self.sig.system.step(id);
                Ok(Term::step_ty(
                    Term::state(self.sig.system.state_name(step.src)),
                    Term::event(self.sig.system.event_name(step.event)),
                    Term::state(self.sig.system.state_name(step.dst)),
                ))
            }
            Term::Nil(state) => {
                self.check_fuel(ctx, state, &Term::StateTy, fuel)?;
                let s = self.normalize_fuel(state, fuel)?;
                Ok(Term::fin_trace_ty(s.clone(), s))
            }
            Term::Step(prefix, event, witness) => {
                let prefix_ty = self.infer_fuel(ctx, prefix, fuel)?;
                let (src, mid) = match prefix_ty {
                    Term::FinTraceTy(a, b) => (*a, *b),
                    other => {
                        return Err(err(TypeErrorKind::CannotInfer {
                            detail: format!(
                                "step prefix has type `{}`, expected a finite trace",
                                pretty_print(&other, ctx)
                            ),
                        }))
                    }
                };
                self.check_fuel(ctx, event, &Term::EventTy, fuel)?;
                let witness_ty = self.infer_fuel(ctx, witness, fuel)?;
                let (wsrc, wev, wdst) = match witness_ty {
                    Term::StepTy(a, b, c) => (*a, *b, *c),
                    other => {
                        return Err(err(TypeErrorKind::CannotInfer {
                            detail: format!(
                                "step witness has type `{}`, expected a transition",
                                pretty_print(&other, ctx)
                            ),
                        }))
                    }
                };
                if !alpha_eq(&mid, &wsrc) {
                    return Err(err(TypeErrorKind::EndpointMismatch {
                        expected: pretty_print(&wsrc, ctx),
                        actual: pretty_print(&mid, ctx),
                    }));
                }
                let ev_norm = self.normalize_fuel(event, fuel)?;
                if !alpha_eq(&ev_norm, &wev) {
                    return Err(err(TypeErrorKind::ConversionFailure {
                        expected: wev,
                        actual: ev_norm,
                    }));
                }
                Ok(Term::fin_trace_ty(src, wdst))
            }
            Term::TraceElim(motive, base, step_case, scrut) => {
                self.infer_trace_elim(ctx, motive, base, step_case, scrut, fuel)
            }
            Term::FinTraceTy(a, b) => {
                self.check_fuel(ctx, a, &Term::StateTy, fuel)?;
                self.check_fuel(ctx, b, &Term::StateTy, fuel)?;
                Ok(Term::Universe(Layer::Uc(0)))
            }
            Term::StepTy(a, e, b) => {
                self.check_fuel(ctx, a, &Term::StateTy, fuel)?;
                self.check_fuel(ctx, e, &Term::EventTy, fuel)?;
                self.check_fuel(ctx, b, &Term::StateTy, fuel)?;
                Ok(Term::Universe(Layer::Uc(0)))
            }
            Term::StateTy | Term::EventTy | Term::NatTy | Term::InfTraceTy => {
                Ok(Term::Universe(Layer::Uc(0)))
            }
            Term::Zero => Ok(Term::NatTy),
            Term::Succ(n) => {
                self.check_fuel(ctx, n, &Term::NatTy, fuel)?;
                Ok(Term::NatTy)
            }
            Term::CorecRef(name) => {
                if self.sig.corecs.contains_key(name) {
                    Ok(Term::InfTraceTy)
                } else {
                    Err(err(TypeErrorKind::UnboundVariable { name: name.clone() }))
                }
            }
            Term::Bottom => Ok(Term::Universe(Layer::Prop)),
        }
    }

    fn infer_trace_elim(
        &self,
        ctx: &Context,
        motive: &Term,
        base: &Term,
        step_case: &Term,
        scrut: &Term,
        fuel: &mut u64,
    ) -> Result<Term, TypeError> {
        let scrut_ty = self.infer_fuel(ctx, scrut, fuel)?;
        let (src, dst) = match scrut_ty {
            Term::FinTraceTy(a, b) => (*a, *b),
            other => {
                return Err(err(TypeErrorKind::MotiveMismatch {
                    detail: format!(
                        "scrutinee has type `{}`, expected a finite trace",
                        pretty_print(&other, ctx)
                    ),
                }))
            }
        };
        // motive must be (s : State) -> FinTrace(src, s) -> U
        match motive {
            Term::Lam(b1) => match b1.as_ref() {
                Term::Lam(body) => {
                    let ctx_s = ctx.extended("_s", Term::StateTy);
                    let trace_ty = Term::fin_trace_ty(weaken(&src, 0), Term::var(0));
                    let ctx_st = ctx_s.extended("_t", trace_ty);
                    self.infer_universe(&ctx_st, body, fuel).map_err(|e| {
                        err(TypeErrorKind::MotiveMismatch {
                            detail: format!("motive body is not a type: {e}"),
                        })
                    })?;
                }
                _ => {
                    return Err(err(TypeErrorKind::MotiveMismatch {
                        detail: "motive must abstract a state and a trace".into(),
                    }))
                }
            },
            _ => {
                let mty = self.infer_fuel(ctx, motive, fuel)?;
                let ok = match &mty {
                    Term::Pi(d1, c1) => {
                        **d1 == Term::StateTy
                            && match c1.as_ref() {
                                Term::Pi(d2, _) => alpha_eq(
                                    d2,
                                    &Term::fin_trace_ty(weaken(&src, 0), Term::var(0)),
                                ),
                                _ => false,
                            }
                    }
                    _ => false,
                };
                if !ok {
                    return Err(err(TypeErrorKind::MotiveMismatch {
                        detail: format!(
                            "motive has type `{}`, expected `(s : State) -> FinTrace({}, s) -> _`",
                            pretty_print(&mty, ctx),
                            pretty_print(&src, ctx)
                        ),
                    }));
                }
            }
        }
        // base : P src (nil src)
        let base_ty = self.normalize_fuel(
            &Term::apps(
                motive.clone(),
                [src.clone(), Term::nil(src.clone())],
            ),
            fuel,
        )?;
        self.check_fuel(ctx, base, &base_ty, fuel)?;
        // stepCase : (s1 : State) -> (t : FinTrace(src, s1)) -> (e : Event)
        //            -> (s2 : State) -> (w : Step(s1, e, s2))
        //            -> P s1 t -> P s2 (step(t, e, w))
        let step_ty = Term::pi(
            Term::StateTy,
            Term::pi(
                Term::fin_trace_ty(shift(&src, 0, 1), Term::var(0)),
                Term::pi(
                    Term::EventTy,
                    Term::pi(
                        Term::StateTy,
                        Term::pi(
                            Term::step_ty(Term::var(3), Term::var(1), Term::var(0)),
                            Term::pi(
                                Term::apps(
                                    shift(motive, 0, 5),
                                    [Term::var(4), Term::var(3)],
                                ),
                                Term::apps(
                                    shift(motive, 0, 6),
                                    [
                                        Term::var(2),
                                        Term::step(Term::var(4), Term::var(3), Term::var(1)),
                                    ],
                                ),
                            ),
                        ),
                    ),
                ),
            ),
        );
        let step_ty = self.normalize_fuel(&step_ty, fuel)?;
        self.check_fuel(ctx, step_case, &step_ty, fuel)?;
        // result: P dst scrut
        self.normalize_fuel(
            &Term::apps(motive.clone(), [dst, scrut.clone()]),
            fuel,
        )
    }

    fn check_fuel(
        &self,
        ctx: &Context,
        t: &Term,
        expected: &Term,
        fuel: &mut u64,
    ) -> Result<(), TypeError> {
        let expected = self.normalize_fuel(expected, fuel)?;
        match (t, &expected) {
            (Term::Lam(body), Term::Pi(dom, cod)) => {
                let inner = ctx.extended("_x", (**dom).clone());
                self.check_fuel(&inner, body, cod, fuel)
            }
            (Term::Lam(_), _) => Err(err(TypeErrorKind::NotAFunction {
                found: expected.clone(),
            })),
            _ => {
                let actual = self.infer_fuel(ctx, t, fuel)?;
                if alpha_eq(&actual, &expected) {
                    Ok(())
                } else {
                    Err(err(TypeErrorKind::ConversionFailure {
                        expected,
                        actual,
                    }))
                }
            }
        }
    }

    fn infer_universe(
        &self,
        ctx: &Context,
        t: &Term,
        fuel: &mut u64,
    ) -> Result<Layer, TypeError> {
        let ty = self.infer_fuel(ctx, t, fuel)?;
        match ty {
            Term::Universe(l) => Ok(l),
            other => Err(err(TypeErrorKind::UniverseMismatch { found: other })),
        }
    }

    // ---- reduction ----------------------------------------------------------

    fn spend(&self, fuel: &mut u64) -> Result<(), TypeError> {
        if *fuel == 0 {
            return Err(err(TypeErrorKind::Internal(format!(
                "normalization fuel exhausted (limit {})",
                self.fuel_limit
            ))));
        }
        *fuel -= 1;
        Ok(())
    }

    /// Contract a trace-eliminator redex if the scrutinee is constructor
    /// headed with a resolvable witness. The step case is applied to its six
    /// arguments on the spot: lambda layers by substitution, anything else by
    /// application, so the reduct stays inferable.
    fn elim_redex(&self, motive: &Term, base: &Term, step_case: &Term, scrut: &Term) -> Option<Term> {
        match scrut {
            Term::Nil(_) => Some(base.clone()),
            Term::Step(prefix, event, witness) => {
                let wname = match witness.as_ref() {
                    Term::StepWitness(w) => w,
                    _ => return None,
                };
                let id = self.sig.system.witness(wname)?;
                let decl = self.sig.system.step(id);
                let s1 = Term::state(self.sig.system.state_name(decl.src));
                let s2 = Term::state(self.sig.system.state_name(decl.dst));
                let rec = Term::trace_elim(
                    motive.clone(),
                    base.clone(),
                    step_case.clone(),
                    (**prefix).clone(),
                );
                let args = [
                    s1,
                    (**prefix).clone(),
                    (**event).clone(),
                    s2,
                    (**witness).clone(),
                    rec,
                ];
                let mut out = step_case.clone();
                for arg in args {
                    out = match out {
                        Term::Lam(body) => subst(&body, &arg),
                        other => Term::app(other, arg),
                    };
                }
                Some(out)
            }
            _ => None,
        }
    }

    fn whnf(&self, t: &Term, fuel: &mut u64) -> Result<Term, TypeError> {
        let mut cur = t.clone();
        loop {
            cur = match cur {
                Term::App(f, a) => {
                    let fw = self.whnf(&f, fuel)?;
                    if let Term::Lam(body) = fw {
                        self.spend(fuel)?;
                        subst(&body, &a)
                    } else {
                        return Ok(Term::App(Box::new(fw), a));
                    }
                }
                Term::TraceElim(p, b, s, scrut) => {
                    let sw = self.whnf(&scrut, fuel)?;
                    match self.elim_redex(&p, &b, &s, &sw) {
                        Some(next) => {
                            self.spend(fuel)?;
                            next
                        }
                        None => return Ok(Term::TraceElim(p, b, s, Box::new(sw))),
                    }
                }
                other => return Ok(other),
            };
        }
    }

    fn normalize_fuel(&self, t: &Term, fuel: &mut u64) -> Result<Term, TypeError> {
        let w = self.whnf(t, fuel)?;
        Ok(match w {
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
            | Term::Bottom => w,
            Term::Lam(b) => Term::lam(self.normalize_fuel(&b, fuel)?),
            Term::Pi(a, b) => Term::pi(
                self.normalize_fuel(&a, fuel)?,
                self.normalize_fuel(&b, fuel)?,
            ),
            Term::Succ(n) => Term::succ(self.normalize_fuel(&n, fuel)?),
            Term::Nil(s) => Term::nil(self.normalize_fuel(&s, fuel)?),
            Term::Step(a, b, c) => Term::step(
                self.normalize_fuel(&a, fuel)?,
                self.normalize_fuel(&b, fuel)?,
                self.normalize_fuel(&c, fuel)?,
            ),
            Term::StepTy(a, b, c) => Term::step_ty(
                self.normalize_fuel(&a, fuel)?,
                self.normalize_fuel(&b, fuel)?,
                self.normalize_fuel(&c, fuel)?,
            ),
            Term::FinTraceTy(a, b) => Term::fin_trace_ty(
                self.normalize_fuel(&a, fuel)?,
                self.normalize_fuel(&b, fuel)?,
            ),
            Term::App(f, a) => {
                let fn_ = self.normalize_fuel(&f, fuel)?;
                let an = self.normalize_fuel(&a, fuel)?;
                if matches!(fn_, Term::Lam(_)) {
                    self.normalize_fuel(&Term::app(fn_, an), fuel)?
                } else {
                    Term::app(fn_, an)
                }
            }
            Term::TraceElim(p, b, s, scrut) => {
                let pn = self.normalize_fuel(&p, fuel)?;
                let bn = self.normalize_fuel(&b, fuel)?;
                let sn = self.normalize_fuel(&s, fuel)?;
                let scn = self.normalize_fuel(&scrut, fuel)?;
                match self.elim_redex(&pn, &bn, &sn, &scn) {
                    Some(next) => self.normalize_fuel(&next, fuel)?,
                    None => Term::trace_elim(pn, bn, sn, scn),
                }
            }
        })
    }

    /// Exactly one leftmost-outermost reduction, or `None` on a normal form.
    pub fn reduce_step(&self, t: &Term) -> Option<Term> {
        match t {
            Term::App(f, a) => {
                if let Term::Lam(body) = f.as_ref() {
                    return Some(subst(body, a));
                }
                if let Some(f2) = self.reduce_step(f) {
                    return Some(Term::app(f2, (**a).clone()));
                }
                self.reduce_step(a).map(|a2| Term::app((**f).clone(), a2))
            }
            Term::TraceElim(p, b, s, scrut) => {
                if let Some(next) = self.elim_redex(p, b, s, scrut) {
                    return Some(next);
                }
                if let Some(p2) = self.reduce_step(p) {
                    return Some(Term::trace_elim(p2, (**b).clone(), (**s).clone(), (**scrut).clone()));
                }
                if let Some(b2) = self.reduce_step(b) {
                    return Some(Term::trace_elim((**p).clone(), b2, (**s).clone(), (**scrut).clone()));
                }
                if let Some(s2) = self.reduce_step(s) {
                    return Some(Term::trace_elim((**p).clone(), (**b).clone(), s2, (**scrut).clone()));
                }
                self.reduce_step(scrut)
                    .map(|sc2| Term::trace_elim((**p).clone(), (**b).clone(), (**s).clone(), sc2))
            }
            Term::Lam(b) => self.reduce_step(b).map(Term::lam),
            Term::Pi(a, b) => {
                if let Some(a2) = self.reduce_step(a) {
                    return Some(Term::pi(a2, (**b).clone()));
                }
                self.reduce_step(b).map(|b2| Term::pi((**a).clone(), b2))
            }
            Term::Succ(n) => self.reduce_step(n).map(Term::succ),
            Term::Nil(s) => self.reduce_step(s).map(Term::nil),
            Term::Step(a, b, c) => {
                if let Some(a2) = self.reduce_step(a) {
                    return Some(Term::step(a2, (**b).clone(), (**c).clone()));
                }
                if let Some(b2) = self.reduce_step(b) {
                    return Some(Term::step((**a).clone(), b2, (**c).clone()));
                }
                self.reduce_step(c)
                    .map(|c2| Term::step((**a).clone(), (**b).clone(), c2))
            }
            Term::StepTy(a, b, c) => {
                if let Some(a2) = self.reduce_step(a) {
                    return Some(Term::step_ty(a2, (**b).clone(), (**c).clone()));
                }
                if let Some(b2) = self.reduce_step(b) {
                    return Some(Term::step_ty((**a).clone(), b2, (**c).clone()));
                }
                self.reduce_step(c)
                    .map(|c2| Term::step_ty((**a).clone(), (**b).clone(), c2))
            }
            Term::FinTraceTy(a, b) => {
                if let Some(a2) = self.reduce_step(a) {
                    return Some(Term::fin_trace_ty(a2, (**b).clone()));
                }
                self.reduce_step(b)
                    .map(|b2| Term::fin_trace_ty((**a).clone(), b2))
            }
            _ => None,
        }
    }
}

fn pi_layer(dom: Layer, cod: Layer) -> Layer {
    match (dom, cod) {
        (Layer::Uc(i), Layer::Uc(j)) => Layer::Uc(i.max(j)),
        (Layer::TypeL(i), Layer::TypeL(j)) => Layer::TypeL(i.max(j)),
        (Layer::Prop, Layer::Prop) => Layer::Prop,
        // cross-hierarchy products land in the codomain hierarchy
        (_, cod) => cod,
    }
}

/// Syntactic guard: the body must be the head/tail cons form and its tail
/// must reference a corecursive definition in scope. A bare reference is a
/// corecursive call outside the tail position.
pub fn check_guardedness(
    decl: &CorecDecl,
    corec_names: &std::collections::BTreeSet<String>,
) -> Result<(), TypeError> {
    match &decl.body {
        CorecBody::Cons { tail, .. } => {
            if corec_names.contains(tail) {
                Ok(())
            } else {
                Err(err(TypeErrorKind::UnboundVariable { name: tail.clone() }))
            }
        }
        CorecBody::Ref(_) => Err(err(TypeErrorKind::UnguardedCorecursion {
            name: decl.name.clone(),
        })),
    }
}

/// Bounded observation of an infinite trace: `depth` (state, event) pairs by
/// head/tail unfolding, then the final head state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub steps: Vec<(String, String)>,
    pub last: String,
}

pub fn observe_inftrace(
    module: &CheckedModule,
    name: &str,
    depth: usize,
) -> Result<Observation, TypeError> {
    let mut steps = Vec::with_capacity(depth);
    let mut cur = name;
    for _ in 0..depth {
        let cons = module.signature.corecs.get(cur).ok_or_else(|| {
            err(TypeErrorKind::UnboundVariable {
                name: cur.to_string(),
            })
        })?;
        steps.push((cons.head.clone(), cons.event.clone()));
        cur = &cons.tail;
    }
    let cons = module.signature.corecs.get(cur).ok_or_else(|| {
        err(TypeErrorKind::UnboundVariable {
            name: cur.to_string(),
        })
    })?;
    Ok(Observation {
        steps,
        last: cons.head.clone(),
    })
}

/// Check every declaration of a parsed module, in order: transition-system
/// validity, corecursive guardedness and typing, then each definition.
pub fn check_module(ast: &ModuleAst) -> Result<CheckedModule, CheckFailure> {
    let system = TransitionSystem::from_module(ast).map_err(CheckFailure::System)?;
    validate_system(&system).map_err(CheckFailure::System)?;

    let mut sig = Signature::new(system);
    let corec_names: std::collections::BTreeSet<String> = ast
        .decls
        .iter()
        .filter_map(|(d, _)| match d {
            Decl::Corec(c) => Some(c.name.clone()),
            _ => None,
        })
        .collect();

    // guardedness and head/event typing for corecursive definitions
    for (d, span) in &ast.decls {
        if let Decl::Corec(c) = d {
            check_guardedness(c, &corec_names).map_err(|e| e.at(span.clone()))?;
            let (head, event, tail) = match &c.body {
                CorecBody::Cons { head, event, tail } => (head, event, tail),
                CorecBody::Ref(_) => unreachable!("rejected by guardedness"),
            };
            let checker = Checker::new(&sig);
            let empty = Context::empty();
            checker
                .check(&empty, head, &Term::StateTy)
                .map_err(|e| e.at(span.clone()))?;
            checker
                .check(&empty, event, &Term::EventTy)
                .map_err(|e| e.at(span.clone()))?;
            let head_n = checker.normalize(head).map_err(|e| e.at(span.clone()))?;
            let event_n = checker.normalize(event).map_err(|e| e.at(span.clone()))?;
            let (head_name, event_name) = match (&head_n.term, &event_n.term) {
                (Term::StateConst(h), Term::EventConst(e)) => (h.clone(), e.clone()),
                _ => {
                    return Err(CheckFailure::Type(
                        err(TypeErrorKind::Internal(
                            "closed head/event did not normalize to constants".into(),
                        ))
                        .at(span.clone()),
                    ))
                }
            };
            sig.corecs.insert(
                c.name.clone(),
                CorecCons {
                    head: head_name,
                    event: event_name,
                    tail: tail.clone(),
                },
            );
        }
    }

    let checker = Checker::new(&sig);
    let empty = Context::empty();
    let mut defs = Vec::new();
    let mut presheafs = Vec::new();
    for (d, span) in &ast.decls {
        match d {
            Decl::Def { name, ty, body } => {
                let mut fuel = DEFAULT_FUEL;
                checker
                    .infer_universe(&empty, ty, &mut fuel)
                    .map_err(|e| e.at(span.clone()))?;
                checker
                    .check(&empty, body, ty)
                    .map_err(|e| e.at(span.clone()))?;
                defs.push(CheckedDef {
                    name: name.clone(),
                    ty: ty.clone(),
                    body: body.clone(),
                });
            }
            Decl::Presheaf(p) => presheafs.push(p.clone()),
            _ => {}
        }
    }

    Ok(CheckedModule {
        signature: sig,
        defs,
        presheafs,
    })
}
