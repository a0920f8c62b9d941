//! Metatheory harness: a typing-rule-directed generator of well-typed terms,
//! the structural property suites (weakening, substitution, subject
//! reduction, canonicity), and a bounded exhaustive consistency search.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::kernel::{Checker, Signature};
use crate::parser::pretty_print;
use crate::syntax::{alpha_eq, subst, weaken, Context, Layer, Term};

/// Deterministic generation settings: same config, same term sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub max_term_size: usize,
    pub max_ctx_len: usize,
    pub iterations: usize,
}

pub const DEFAULT_SEED: u64 = 7;

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig {
            seed: DEFAULT_SEED,
            max_term_size: 25,
            max_ctx_len: 4,
            iterations: 1000,
        }
    }
}

/// A generated judgment: `check(ctx, term, ty)` holds by construction.
#[derive(Debug, Clone)]
pub struct Generated {
    pub ctx: Context,
    pub term: Term,
    pub ty: Term,
}

/// Retry budget ran out while searching for a well-typed candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenExhausted {
    pub iteration: u64,
    pub attempts: u32,
}

impl fmt::Display for GenExhausted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "generator exhausted {} attempts at iteration {}",
            self.attempts, self.iteration
        )
    }
}

impl std::error::Error for GenExhausted {}

const MAX_ATTEMPTS: u32 = 10_000;

/// Outcome of one property suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub iterations: usize,
    /// (iteration index, printed counterexample)
    pub failures: Vec<(u64, String)>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Generate one well-typed (context, term, type) triple. Generation is
/// top-down and rule-directed; dead ends retry with a fresh rule choice.
pub fn generate_well_typed(
    sig: &Signature,
    cfg: &GenConfig,
    iteration: u64,
) -> Result<Generated, GenExhausted> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(iteration);
    let mut gen = Gen {
        sig,
        rng: &mut rng,
        attempts: 0,
    };
    for _ in 0..64 {
        let ctx_len = gen.rng.gen_range(0..=cfg.max_ctx_len);
        if let Some(ctx) = gen.gen_context(ctx_len) {
            let budget = 1 + gen.rng.gen_range(0..cfg.max_term_size);
            if let Some((term, ty)) = gen.gen_triple(&ctx, budget) {
                return Ok(Generated { ctx, term, ty });
            }
        }
        if gen.attempts >= MAX_ATTEMPTS {
            break;
        }
    }
    Err(GenExhausted {
        iteration,
        attempts: gen.attempts,
    })
}

struct Gen<'a, 'r> {
    sig: &'a Signature,
    rng: &'r mut ChaCha8Rng,
    attempts: u32,
}

impl<'a, 'r> Gen<'a, 'r> {
    fn spend(&mut self) -> bool {
        self.attempts += 1;
        self.attempts < MAX_ATTEMPTS
    }

    fn pick<'t, T>(&mut self, items: &'t [T]) -> Option<&'t T> {
        if items.is_empty() {
            None
        } else {
            let i = self.rng.gen_range(0..items.len());
            Some(&items[i])
        }
    }

    fn state_names(&self) -> Vec<String> {
        self.sig.system.state_names().to_vec()
    }

    /// Menu of small well-formed types for context entries and lambda
    /// domains.
    fn gen_simple_type(&mut self) -> Option<Term> {
        let states = self.state_names();
        let roll = self.rng.gen_range(0..100);
        Some(match roll {
            0..=24 => Term::NatTy,
            25..=39 => Term::StateTy,
            40..=49 => Term::EventTy,
            50..=69 => {
                let a = self.pick(&states)?.clone();
                let b = self.pick(&states)?.clone();
                Term::fin_trace_ty(Term::state(a), Term::state(b))
            }
            70..=79 => {
                let steps = self.sig.system.steps().to_vec();
                let s = self.pick(&steps)?;
                Term::step_ty(
                    Term::state(self.sig.system.state_name(s.src)),
                    Term::event(self.sig.system.event_name(s.event)),
                    Term::state(self.sig.system.state_name(s.dst)),
                )
            }
            80..=89 => Term::pi(Term::NatTy, Term::NatTy),
            _ => Term::pi(Term::StateTy, Term::NatTy),
        })
    }

    fn gen_context(&mut self, len: usize) -> Option<Context> {
        let mut ctx = Context::empty();
        for i in 0..len {
            let ty = self.gen_simple_type()?;
            ctx.push(format!("v{i}"), ty);
        }
        Some(ctx)
    }

    /// Synthesize (term, normalized type); the term is inferable.
    fn gen_inferable(&mut self, ctx: &Context, budget: usize) -> Option<(Term, Term)> {
        if !self.spend() {
            return None;
        }
        let checker = Checker::new(self.sig);
        for _ in 0..8 {
            let roll = self.rng.gen_range(0..100);
            let candidate: Option<(Term, Term)> = match roll {
                // variables
                0..=14 => {
                    let len = ctx.len();
                    if len == 0 {
                        None
                    } else {
                        let i = self.rng.gen_range(0..len);
                        ctx.lookup_ty(i).map(|ty| (Term::var(i), ty))
                    }
                }
                // nat constructors
                15..=29 => {
                    if budget >= 2 && self.rng.gen_bool(0.5) {
                        self.gen_checked(ctx, &Term::NatTy, budget - 1)
                            .map(|n| (Term::succ(n), Term::NatTy))
                    } else {
                        Some((Term::Zero, Term::NatTy))
                    }
                }
                // constants
                30..=37 => {
                    let states = self.state_names();
                    let s = self.pick(&states)?.clone();
                    Some((Term::state(s), Term::StateTy))
                }
                38..=42 => {
                    let events = self.sig.system.event_names().to_vec();
                    let e = self.pick(&events)?.clone();
                    Some((Term::event(e), Term::EventTy))
                }
                43..=47 => {
                    let steps = self.sig.system.steps().to_vec();
                    let s = self.pick(&steps)?;
                    let ty = Term::step_ty(
                        Term::state(self.sig.system.state_name(s.src)),
                        Term::event(self.sig.system.event_name(s.event)),
                        Term::state(self.sig.system.state_name(s.dst)),
                    );
                    Some((Term::witness(s.witness.clone()), ty))
                }
                // traces: nil or a declared-step chain
                48..=62 => self.gen_trace(ctx, budget),
                // beta redex typed as a let
                63..=77 => {
                    if budget < 4 {
                        None
                    } else {
                        let arg_budget = 1 + self.rng.gen_range(0..(budget - 3));
                        let (arg, arg_ty) = self.gen_inferable(ctx, arg_budget)?;
                        let inner = ctx.extended("_x", arg_ty);
                        let body_budget = budget.saturating_sub(2 + arg.size()).max(1);
                        let (body, body_ty) = self.gen_inferable(&inner, body_budget)?;
                        let app = Term::app(Term::lam(body), arg.clone());
                        let ty = checker.normalize(&subst(&body_ty, &arg)).ok()?.term;
                        Some((app, ty))
                    }
                }
                // application of a product-typed variable
                78..=84 => {
                    let mut candidates = Vec::new();
                    for i in 0..ctx.len() {
                        if let Some(Term::Pi(dom, cod)) = ctx.lookup_ty(i) {
                            candidates.push((i, dom, cod));
                        }
                    }
                    let (i, dom, cod) = self.pick(&candidates)?.clone();
                    let arg = self.gen_checked(ctx, &dom, budget.saturating_sub(2).max(1))?;
                    let ty = checker.normalize(&subst(&cod, &arg)).ok()?.term;
                    Some((Term::app(Term::var(i), arg), ty))
                }
                // trace eliminator with a constant motive
                85..=92 => self.gen_trace_elim(ctx, budget),
                // corecursive reference
                _ => {
                    let names: Vec<String> = self.sig.corecs.keys().cloned().collect();
                    let n = self.pick(&names)?.clone();
                    Some((Term::CorecRef(n), Term::InfTraceTy))
                }
            };
            if let Some((t, ty)) = candidate {
                if t.size() <= budget + 4 {
                    return Some((t, ty));
                }
            }
            if !self.spend() {
                return None;
            }
        }
        None
    }

    /// A trace term built by chaining declared steps, growing from a nil base
    /// or from a constant-endpoint trace variable in the context.
    fn gen_trace(&mut self, ctx: &Context, budget: usize) -> Option<(Term, Term)> {
        let max_links = budget.saturating_sub(2) / 4;
        let links = if max_links == 0 {
            0
        } else {
            self.rng.gen_range(0..=max_links.min(4))
        };
        if self.rng.gen_bool(0.2) {
            for i in 0..ctx.len() {
                if let Some(Term::FinTraceTy(a, b)) = ctx.lookup_ty(i) {
                    if let (Term::StateConst(sa), Term::StateConst(sb)) = (&*a, &*b) {
                        return self.extend_trace(Term::var(i), sa.clone(), sb.clone(), links);
                    }
                }
            }
        }
        let states = self.state_names();
        let start = self.pick(&states)?.clone();
        let nil = Term::nil(Term::state(start.clone()));
        self.extend_trace(nil, start.clone(), start, links)
    }

    fn extend_trace(
        &mut self,
        mut term: Term,
        src: String,
        mut cur: String,
        links: usize,
    ) -> Option<(Term, Term)> {
        for _ in 0..links {
            let options: Vec<_> = self
                .sig
                .system
                .steps()
                .iter()
                .filter(|s| self.sig.system.state_name(s.src) == cur)
                .cloned()
                .collect();
            let Some(step) = self.pick(&options) else { break };
            let step = step.clone();
            term = Term::step(
                term,
                Term::event(self.sig.system.event_name(step.event)),
                Term::witness(step.witness.clone()),
            );
            cur = self.sig.system.state_name(step.dst).to_string();
        }
        Some((
            term,
            Term::fin_trace_ty(Term::state(src), Term::state(cur)),
        ))
    }

    fn gen_trace_elim(&mut self, ctx: &Context, budget: usize) -> Option<(Term, Term)> {
        if budget < 12 {
            return None;
        }
        let motive_codomain = match self.rng.gen_range(0..3) {
            0 => Term::StateTy,
            1 => Term::EventTy,
            _ => Term::NatTy,
        };
        let motive = Term::lam(Term::lam(motive_codomain.clone()));
        let (scrut, _) = self.gen_trace(ctx, (budget / 3).max(2))?;
        let base = self.gen_checked(ctx, &motive_codomain, (budget / 4).max(1))?;
        // step case: six binders over the motive codomain; the inner body may
        // use the induction hypothesis (Var 0 at the matching codomain type)
        let mut inner_ctx = ctx.clone();
        inner_ctx.push("_s1", Term::StateTy);
        // the trace binder's exact type is irrelevant for a constant motive;
        // use a trace type so the context stays well-formed
        let states = self.state_names();
        let s0 = self.pick(&states)?.clone();
        inner_ctx.push(
            "_t",
            Term::fin_trace_ty(Term::state(s0.clone()), Term::var(0)),
        );
        inner_ctx.push("_e", Term::EventTy);
        inner_ctx.push("_s2", Term::StateTy);
        inner_ctx.push("_w", Term::step_ty(Term::var(3), Term::var(1), Term::var(0)));
        inner_ctx.push("_ih", motive_codomain.clone());
        let inner = self.gen_checked(&inner_ctx, &motive_codomain, (budget / 4).max(1))?;
        let step_case = Term::lam(Term::lam(Term::lam(Term::lam(Term::lam(Term::lam(inner))))));
        Some((
            Term::trace_elim(motive, base, step_case, scrut),
            motive_codomain,
        ))
    }

    /// Generate a term checking against `ty` (normalized).
    fn gen_checked(&mut self, ctx: &Context, ty: &Term, budget: usize) -> Option<Term> {
        if !self.spend() {
            return None;
        }
        // lambda against a product
        if let Term::Pi(dom, cod) = ty {
            if self.rng.gen_bool(0.7) {
                let inner = ctx.extended("_x", (**dom).clone());
                let body = self.gen_checked(&inner, cod, budget.saturating_sub(1).max(1))?;
                return Some(Term::lam(body));
            }
            // or a variable of exactly this type
            for i in 0..ctx.len() {
                if let Some(vt) = ctx.lookup_ty(i) {
                    if alpha_eq(&vt, ty) {
                        return Some(Term::var(i));
                    }
                }
            }
            let inner = ctx.extended("_x", (**dom).clone());
            let body = self.gen_checked(&inner, cod, budget.saturating_sub(1).max(1))?;
            return Some(Term::lam(body));
        }
        match ty {
            Term::NatTy => {
                if budget >= 2 && self.rng.gen_bool(0.45) {
                    let n = self.gen_checked(ctx, &Term::NatTy, budget - 1)?;
                    Some(Term::succ(n))
                } else if self.rng.gen_bool(0.3) {
                    self.var_of(ctx, ty).or(Some(Term::Zero))
                } else {
                    Some(Term::Zero)
                }
            }
            Term::StateTy => {
                if self.rng.gen_bool(0.25) {
                    if let Some(v) = self.var_of(ctx, ty) {
                        return Some(v);
                    }
                }
                let states = self.state_names();
                let s = self.pick(&states)?.clone();
                Some(Term::state(s))
            }
            Term::EventTy => {
                if self.rng.gen_bool(0.25) {
                    if let Some(v) = self.var_of(ctx, ty) {
                        return Some(v);
                    }
                }
                let events = self.sig.system.event_names().to_vec();
                let e = self.pick(&events)?.clone();
                Some(Term::event(e))
            }
            Term::StepTy(a, e, b) => {
                if let (Term::StateConst(sa), Term::EventConst(ev), Term::StateConst(sb)) =
                    (&**a, &**e, &**b)
                {
                    let found = self.sig.system.steps().iter().find(|s| {
                        self.sig.system.state_name(s.src) == sa
                            && self.sig.system.event_name(s.event) == ev
                            && self.sig.system.state_name(s.dst) == sb
                    });
                    if let Some(s) = found {
                        return Some(Term::witness(s.witness.clone()));
                    }
                }
                self.var_of(ctx, ty)
            }
            Term::FinTraceTy(a, b) => {
                if let (Term::StateConst(sa), Term::StateConst(sb)) = (&**a, &**b) {
                    if self.rng.gen_bool(0.2) {
                        if let Some(v) = self.var_of(ctx, ty) {
                            return Some(v);
                        }
                    }
                    let path = crate::semantics::witness_path(
                        &self.sig.system,
                        self.sig.system.state(sa)?,
                        self.sig.system.state(sb)?,
                    )
                    .ok()??;
                    return Some(crate::semantics::reify(&self.sig.system, &path));
                }
                self.var_of(ctx, ty)
            }
            Term::InfTraceTy => {
                let names: Vec<String> = self.sig.corecs.keys().cloned().collect();
                let n = self.pick(&names)?.clone();
                Some(Term::CorecRef(n))
            }
            _ => self.var_of(ctx, ty),
        }
    }

    fn var_of(&mut self, ctx: &Context, ty: &Term) -> Option<Term> {
        let mut candidates = Vec::new();
        for i in 0..ctx.len() {
            if let Some(vt) = ctx.lookup_ty(i) {
                if alpha_eq(&vt, ty) {
                    candidates.push(Term::var(i));
                }
            }
        }
        self.pick(&candidates).cloned()
    }

    fn gen_triple(&mut self, ctx: &Context, budget: usize) -> Option<(Term, Term)> {
        // mostly synthesize; sometimes produce a checked lambda at a product
        if self.rng.gen_bool(0.18) {
            let dom = self.gen_simple_type()?;
            let cod = match self.rng.gen_range(0..3) {
                0 => Term::NatTy,
                1 => Term::StateTy,
                _ => Term::EventTy,
            };
            let ty = Term::pi(dom, weaken(&cod, 0));
            let t = self.gen_checked(ctx, &ty, budget)?;
            return Some((t, ty));
        }
        self.gen_inferable(ctx, budget)
    }
}

// ---- structural suites -------------------------------------------------------

fn counterexample(ctx: &Context, term: &Term, ty: &Term, note: &str) -> String {
    format!(
        "{note}: ctx={} |- {} : {}",
        ctx.entries()
            .iter()
            .map(|(n, t)| format!("{n}:{}", pretty_print(t, &Context::empty())))
            .collect::<Vec<_>>()
            .join(", "),
        pretty_print(term, ctx),
        pretty_print(ty, ctx)
    )
}

/// Run the four structural suites: weakening, substitution, subject reduction
/// over full reduction chains, and canonicity of closed normal forms.
pub fn run_structural_suite(sig: &Signature, cfg: &GenConfig) -> Vec<PropertyReport> {
    let checker = Checker::new(sig);
    let mut weakening = Vec::new();
    let mut substitution = Vec::new();
    let mut subject_reduction = Vec::new();
    let mut canonicity = Vec::new();

    for i in 0..cfg.iterations as u64 {
        match generate_well_typed(sig, cfg, i) {
            Ok(g) => {
                // weakening: append a fresh assumption
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x57EA);
                rng.set_stream(i);
                let mut aux = Gen {
                    sig,
                    rng: &mut rng,
                    attempts: 0,
                };
                if let Some(b) = aux.gen_simple_type() {
                    let wide = g.ctx.extended("_w", b);
                    let wt = weaken(&g.term, 0);
                    let wty = weaken(&g.ty, 0);
                    if let Err(e) = checker.check(&wide, &wt, &wty) {
                        weakening.push((i, counterexample(&g.ctx, &g.term, &g.ty, &e.to_string())));
                    }
                }

                // substitution: when the context is nonempty, substitute for
                // the innermost assumption. The substituend must be inferable:
                // a bare lambda has no principal type here, so substituting it
                // into an inference position is outside the algorithmic
                // substitution property.
                if !g.ctx.is_empty() {
                    let entries = g.ctx.entries().to_vec();
                    let (_, last_ty) = entries.last().expect("nonempty").clone();
                    let outer = Context::from_entries(entries[..entries.len() - 1].to_vec());
                    if let Some(s) = aux.gen_checked(&outer, &last_ty, 6) {
                        if checker.infer(&outer, &s).is_ok()
                            && checker.check(&outer, &s, &last_ty).is_ok()
                        {
                            let st = subst(&g.term, &s);
                            let sty = subst(&g.ty, &s);
                            if let Err(e) = checker.check(&outer, &st, &sty) {
                                substitution.push((
                                    i,
                                    counterexample(&g.ctx, &g.term, &g.ty, &e.to_string()),
                                ));
                            }
                        }
                    }
                }

                // subject reduction along the full leftmost-outermost chain
                let mut cur = g.term.clone();
                let mut steps = 0;
                while let Some(next) = checker.reduce_step(&cur) {
                    if let Err(e) = checker.check(&g.ctx, &next, &g.ty) {
                        subject_reduction.push((
                            i,
                            counterexample(&g.ctx, &next, &g.ty, &e.to_string()),
                        ));
                        break;
                    }
                    cur = next;
                    steps += 1;
                    if steps > 50_000 {
                        subject_reduction
                            .push((i, counterexample(&g.ctx, &g.term, &g.ty, "no normal form")));
                        break;
                    }
                }

                // canonicity: closed terms at Nat / FinTrace normalize to
                // constructor-headed forms
                if g.ctx.is_empty() {
                    let base_nat = matches!(g.ty, Term::NatTy);
                    let base_trace = matches!(g.ty, Term::FinTraceTy(..));
                    if base_nat || base_trace {
                        match checker.normalize(&g.term) {
                            Ok(nf) => {
                                let ok = if base_nat {
                                    matches!(nf.term, Term::Zero | Term::Succ(_))
                                } else {
                                    matches!(nf.term, Term::Nil(_) | Term::Step(..))
                                };
                                if !ok || !nf.is_canonical {
                                    canonicity.push((
                                        i,
                                        counterexample(&g.ctx, &nf.term, &g.ty, "not canonical"),
                                    ));
                                }
                            }
                            Err(e) => canonicity.push((
                                i,
                                counterexample(&g.ctx, &g.term, &g.ty, &e.to_string()),
                            )),
                        }
                    }
                }
            }
            Err(e) => {
                // generation failure is a finding, not a skip
                weakening.push((i, e.to_string()));
            }
        }
    }

    vec![
        PropertyReport {
            property: "weakening".into(),
            iterations: cfg.iterations,
            failures: weakening,
        },
        PropertyReport {
            property: "substitution".into(),
            iterations: cfg.iterations,
            failures: substitution,
        },
        PropertyReport {
            property: "subject-reduction".into(),
            iterations: cfg.iterations,
            failures: subject_reduction,
        },
        PropertyReport {
            property: "canonicity".into(),
            iterations: cfg.iterations,
            failures: canonicity,
        },
    ]
}

// ---- bounded consistency search ----------------------------------------------

/// Enumerates all closed inferable terms up to a node-count bound and checks
/// their types against a target. Universe indices in enumerated atoms are
/// bounded at 1.
type TypedTerms = Rc<Vec<(Term, Term)>>;

pub struct TermEnumerator<'a> {
    sig: &'a Signature,
    memo: BTreeMap<(usize, Vec<Term>), TypedTerms>,
}

impl<'a> TermEnumerator<'a> {
    pub fn new(sig: &'a Signature) -> TermEnumerator<'a> {
        TermEnumerator {
            sig,
            memo: BTreeMap::new(),
        }
    }

    fn atoms(&self, ctx: &[Term]) -> Vec<Term> {
        let mut out = vec![Term::Zero];
        for s in self.sig.system.state_names() {
            out.push(Term::state(s.clone()));
        }
        for e in self.sig.system.event_names() {
            out.push(Term::event(e.clone()));
        }
        for s in self.sig.system.steps() {
            out.push(Term::witness(s.witness.clone()));
        }
        for c in self.sig.corecs.keys() {
            out.push(Term::CorecRef(c.clone()));
        }
        out.extend([
            Term::StateTy,
            Term::EventTy,
            Term::NatTy,
            Term::InfTraceTy,
            Term::Bottom,
            Term::Universe(Layer::Prop),
            Term::Universe(Layer::Uc(0)),
            Term::Universe(Layer::Uc(1)),
            Term::Universe(Layer::TypeL(0)),
            Term::Universe(Layer::TypeL(1)),
        ]);
        for i in 0..ctx.len() {
            out.push(Term::var(i));
        }
        out
    }

    /// All inferable terms of exactly `size` nodes under a context given as
    /// innermost-first types.
    pub fn inferable(&mut self, size: usize, ctx: &[Term]) -> TypedTerms {
        let key = (size, ctx.to_vec());
        if let Some(hit) = self.memo.get(&key) {
            return Rc::clone(hit);
        }
        let context = ctx_of(ctx);
        let checker = Checker::new(self.sig);
        let mut out: Vec<(Term, Term)> = Vec::new();
        if size == 1 {
            for atom in self.atoms(ctx) {
                if let Ok(ty) = checker.infer(&context, &atom) {
                    out.push((atom, ty));
                }
            }
        } else {
            // unary constructors
            for (t, ty) in self.inferable(size - 1, ctx).iter() {
                if *ty == Term::NatTy {
                    out.push((Term::succ(t.clone()), Term::NatTy));
                }
                if *ty == Term::StateTy {
                    out.push((
                        Term::nil(t.clone()),
                        Term::fin_trace_ty(t.clone(), t.clone()),
                    ));
                }
            }
            // binary constructors
            for left in 1..(size - 1) {
                let right = size - 1 - left;
                // FinTrace(a, b)
                for (a, aty) in self.inferable(left, ctx).iter() {
                    if *aty != Term::StateTy {
                        continue;
                    }
                    for (b, bty) in self.inferable(right, ctx).iter() {
                        if *bty == Term::StateTy {
                            out.push((
                                Term::fin_trace_ty(a.clone(), b.clone()),
                                Term::Universe(Layer::Uc(0)),
                            ));
                        }
                    }
                }
                // Pi(A, B): A a type, B a type under (x : A)
                for (a, aty) in self.inferable(left, ctx).iter() {
                    if !matches!(aty, Term::Universe(_)) {
                        continue;
                    }
                    let mut inner: Vec<Term> = vec![a.clone()];
                    inner.extend(ctx.iter().cloned());
                    for (b, bty) in self.inferable(right, &inner).iter() {
                        if matches!(bty, Term::Universe(_)) {
                            let pi = Term::pi(a.clone(), b.clone());
                            if let Ok(ty) = checker.infer(&context, &pi) {
                                out.push((pi, ty));
                            }
                        }
                    }
                }
                // App(f, a) with a product-typed inferable head
                for (f, fty) in self.inferable(left, ctx).iter() {
                    if let Term::Pi(dom, cod) = fty {
                        for arg in self.checked(right, ctx, dom).iter() {
                            let ty = checker.normalize(&subst(cod, arg));
                            if let Ok(nf) = ty {
                                out.push((Term::app(f.clone(), arg.clone()), nf.term));
                            }
                        }
                    }
                }
            }
            // beta redex App(Lam(body), arg): arg and body both inferable
            for arg_size in 1..size.saturating_sub(2) {
                let body_size = size - 2 - arg_size;
                if body_size == 0 {
                    continue;
                }
                for (arg, arg_ty) in self.inferable(arg_size, ctx).iter() {
                    let mut inner: Vec<Term> = vec![arg_ty.clone()];
                    inner.extend(ctx.iter().cloned());
                    for (body, body_ty) in self.inferable(body_size, &inner).iter() {
                        let t = Term::app(Term::lam(body.clone()), arg.clone());
                        if let Ok(nf) = checker.normalize(&subst(body_ty, arg)) {
                            out.push((t, nf.term));
                        }
                    }
                }
            }
            // ternary constructors
            for a_size in 1..size.saturating_sub(2) {
                for b_size in 1..(size - 1 - a_size) {
                    let c_size = size - 1 - a_size - b_size;
                    // step(tau, e, w) and Step(a, e, b)
                    let asets = self.inferable(a_size, ctx);
                    let bsets = self.inferable(b_size, ctx);
                    let csets = self.inferable(c_size, ctx);
                    for (a, aty) in asets.iter() {
                        for (b, bty) in bsets.iter() {
                            for (c, cty) in csets.iter() {
                                // Step type former
                                if *aty == Term::StateTy
                                    && *bty == Term::EventTy
                                    && *cty == Term::StateTy
                                {
                                    out.push((
                                        Term::step_ty(a.clone(), b.clone(), c.clone()),
                                        Term::Universe(Layer::Uc(0)),
                                    ));
                                }
                                // step constructor
                                if let (Term::FinTraceTy(_, _), Term::EventTy, Term::StepTy(..)) =
                                    (aty, bty, cty)
                                {
                                    let t = Term::step(a.clone(), b.clone(), c.clone());
                                    if let Ok(ty) = checker.infer(&context, &t) {
                                        out.push((t, ty));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            // trace eliminator (large; only reachable at generous bounds)
            if size >= 8 {
                out.extend(self.enumerate_elims(size, ctx));
            }
        }
        let rc = Rc::new(out);
        self.memo.insert(key, Rc::clone(&rc));
        rc
    }

    fn enumerate_elims(&mut self, size: usize, ctx: &[Term]) -> Vec<(Term, Term)> {
        let checker = Checker::new(self.sig);
        let context = ctx_of(ctx);
        let mut out = Vec::new();
        // sizes: 1 + motive + base + step + scrut
        for m_size in 3..size.saturating_sub(4) {
            for b_size in 1..(size - m_size - 3) {
                for s_size in 1..(size - m_size - b_size - 2) {
                    let t_size = size - 1 - m_size - b_size - s_size;
                    if t_size == 0 {
                        continue;
                    }
                    let motives = self.motives(m_size, ctx);
                    for motive in motives.iter() {
                        let bases = self.inferable(b_size, ctx);
                        let steps = self.inferable(s_size, ctx);
                        let scruts = self.inferable(t_size, ctx);
                        for (b, _) in bases.iter() {
                            for (s, _) in steps.iter() {
                                for (tr, trty) in scruts.iter() {
                                    if !matches!(trty, Term::FinTraceTy(..)) {
                                        continue;
                                    }
                                    let t = Term::trace_elim(
                                        motive.clone(),
                                        b.clone(),
                                        s.clone(),
                                        tr.clone(),
                                    );
                                    if let Ok(ty) = checker.infer(&context, &t) {
                                        out.push((t, ty));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Candidate motives: double lambdas over inferable bodies.
    fn motives(&mut self, size: usize, ctx: &[Term]) -> Vec<Term> {
        if size < 3 {
            return Vec::new();
        }
        let mut out = Vec::new();
        // body is enumerated in an approximating context; the kernel re-checks
        let mut inner: Vec<Term> = vec![
            Term::fin_trace_ty(Term::StateTy, Term::var(0)),
            Term::StateTy,
        ];
        inner.extend(ctx.iter().cloned());
        for (body, bty) in self.inferable(size - 2, &inner).iter() {
            if matches!(bty, Term::Universe(_)) {
                out.push(Term::lam(Term::lam(body.clone())));
            }
        }
        out
    }

    /// Terms of exactly `size` nodes checking against `ty`.
    fn checked(&mut self, size: usize, ctx: &[Term], ty: &Term) -> Vec<Term> {
        let checker = Checker::new(self.sig);
        let mut out: Vec<Term> = self
            .inferable(size, ctx)
            .iter()
            .filter(|(_, t)| alpha_eq(t, ty))
            .map(|(t, _)| t.clone())
            .collect();
        if let Term::Pi(dom, cod) = ty {
            if size >= 2 {
                let mut inner: Vec<Term> = vec![(**dom).clone()];
                inner.extend(ctx.iter().cloned());
                for body in self.checked(size - 1, &inner, cod) {
                    let lam = Term::lam(body);
                    if checker.check(&ctx_of(ctx), &lam, ty).is_ok() {
                        out.push(lam);
                    }
                }
            }
        }
        out
    }

    /// Count all closed inferable terms of each size in `1..=max`.
    pub fn census(&mut self, max: usize) -> Vec<usize> {
        (1..=max).map(|n| self.inferable(n, &[]).len()).collect()
    }
}

fn ctx_of(types_innermost_first: &[Term]) -> Context {
    let mut ctx = Context::empty();
    for (i, ty) in types_innermost_first.iter().enumerate().rev() {
        ctx.push(format!("e{i}"), ty.clone());
    }
    ctx
}

/// Search for a closed inhabitant of `target` by exhaustive enumeration of
/// inferable closed terms up to `max_size` nodes.
pub fn search_inhabitant(sig: &Signature, max_size: usize, target: &Term) -> Option<Term> {
    let checker = Checker::new(sig);
    let goal = checker.normalize(target).ok()?.term;
    let mut enumerator = TermEnumerator::new(sig);
    for size in 1..=max_size {
        for (t, ty) in enumerator.inferable(size, &[]).iter() {
            if alpha_eq(ty, &goal) {
                return Some(t.clone());
            }
        }
    }
    None
}

/// `None` is the expected outcome: no closed term inhabits the empty
/// proposition up to the size bound.
pub fn consistency_search(sig: &Signature, max_size: usize) -> Option<Term> {
    assert!(max_size <= 12, "consistency search is desk-scale only");
    search_inhabitant(sig, max_size, &Term::Bottom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::check_module;
    use crate::parser::parse_module;

    pub(crate) fn credential_signature() -> Signature {
        let src = "state Init. state Valid. state Revoked.\n\
                   event Issue. event Use. event Revoke.\n\
                   step Init -[Issue]-> Valid as w_issue.\n\
                   step Valid -[Use]-> Valid as w_use.\n\
                   step Valid -[Revoke]-> Revoked as w_revoke.\n\
                   corec service := head Valid; tail (Use, service).";
        let ast = parse_module("credential.dekl", src).unwrap();
        check_module(&ast).unwrap().signature
    }

    #[test]
    fn size_one_generation_yields_base_constants() {
        let sig = credential_signature();
        let cfg = GenConfig {
            max_term_size: 1,
            iterations: 50,
            ..GenConfig::default()
        };
        let checker = Checker::new(&sig);
        for i in 0..50 {
            let g = generate_well_typed(&sig, &cfg, i).unwrap();
            assert!(g.term.size() <= 5);
            checker.check(&g.ctx, &g.term, &g.ty).unwrap();
        }
    }

    #[test]
    fn generated_triples_recheck() {
        let sig = credential_signature();
        let cfg = GenConfig::default();
        let checker = Checker::new(&sig);
        for i in 0..1000 {
            let g = generate_well_typed(&sig, &cfg, i).unwrap();
            checker
                .check(&g.ctx, &g.term, &g.ty)
                .unwrap_or_else(|e| panic!("iteration {i}: {e}"));
        }
    }

    #[test]
    fn iterated_reduce_step_agrees_with_normalize_on_generated_terms() {
        let sig = credential_signature();
        let cfg = GenConfig::default();
        let checker = Checker::new(&sig);
        for i in 0..1000 {
            let g = generate_well_typed(&sig, &cfg, i).unwrap();
            let expected = checker.normalize(&g.term).unwrap().term;
            let mut cur = g.term.clone();
            let mut steps = 0;
            while let Some(next) = checker.reduce_step(&cur) {
                cur = next;
                steps += 1;
                assert!(steps < 100_000, "iteration {i}: reduction diverges");
            }
            assert!(alpha_eq(&cur, &expected), "iteration {i}");
        }
    }

    #[test]
    fn conversion_is_a_congruence_for_checking() {
        // conv(A, B) implies check(ctx, t, A) and check(ctx, t, B) agree
        let sig = credential_signature();
        let cfg = GenConfig::default();
        let checker = Checker::new(&sig);
        for i in 0..200 {
            let g = generate_well_typed(&sig, &cfg, i).unwrap();
            // a beta-expanded alias of the type
            let alias = Term::app(Term::lam(Term::var(0)), g.ty.clone());
            assert!(checker.conv(&g.ctx, &g.ty, &alias).unwrap());
            let direct = checker.check(&g.ctx, &g.term, &g.ty).is_ok();
            let aliased = checker.check(&g.ctx, &g.term, &alias).is_ok();
            assert_eq!(direct, aliased, "iteration {i}");
            assert!(direct);
            // and for a type the term does not have
            let wrong = Term::Bottom;
            let wrong_alias = Term::app(Term::lam(Term::var(0)), Term::Bottom);
            assert_eq!(
                checker.check(&g.ctx, &g.term, &wrong).is_ok(),
                checker.check(&g.ctx, &g.term, &wrong_alias).is_ok(),
                "iteration {i}"
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let sig = credential_signature();
        let cfg = GenConfig::default();
        for i in [0, 1, 17, 999] {
            let a = generate_well_typed(&sig, &cfg, i).unwrap();
            let b = generate_well_typed(&sig, &cfg, i).unwrap();
            assert_eq!(format!("{:?}", (a.ctx, a.term, a.ty)), format!("{:?}", (b.ctx, b.term, b.ty)));
        }
    }

    #[test]
    fn constructor_coverage() {
        let sig = credential_signature();
        let cfg = GenConfig::default();
        let (mut lam, mut app, mut step, mut elim) = (0, 0, 0, 0);
        let n = 1000;
        for i in 0..n {
            let g = generate_well_typed(&sig, &cfg, i).unwrap();
            let mut stack = vec![&g.term];
            let (mut has_lam, mut has_app, mut has_step, mut has_elim) =
                (false, false, false, false);
            while let Some(t) = stack.pop() {
                match t {
                    Term::Lam(b) => {
                        has_lam = true;
                        stack.push(b);
                    }
                    Term::App(f, a) => {
                        has_app = true;
                        stack.push(f);
                        stack.push(a);
                    }
                    Term::Step(a, b, c) => {
                        has_step = true;
                        stack.extend([a.as_ref(), b.as_ref(), c.as_ref()]);
                    }
                    Term::TraceElim(a, b, c, d) => {
                        has_elim = true;
                        stack.extend([a.as_ref(), b.as_ref(), c.as_ref(), d.as_ref()]);
                    }
                    Term::Pi(a, b) => stack.extend([a.as_ref(), b.as_ref()]),
                    Term::Succ(x) | Term::Nil(x) => stack.push(x),
                    Term::StepTy(a, b, c) => stack.extend([a.as_ref(), b.as_ref(), c.as_ref()]),
                    Term::FinTraceTy(a, b) => stack.extend([a.as_ref(), b.as_ref()]),
                    _ => {}
                }
            }
            lam += has_lam as usize;
            app += has_app as usize;
            step += has_step as usize;
            elim += has_elim as usize;
        }
        let floor = n as usize / 100; // 1%
        assert!(lam >= floor, "Lam coverage {lam}/{n}");
        assert!(app >= floor, "App coverage {app}/{n}");
        assert!(step >= floor, "Step coverage {step}/{n}");
        assert!(elim >= floor, "TraceElim coverage {elim}/{n}");
    }

    #[test]
    fn structural_suites_pass_smoke() {
        let sig = credential_signature();
        let cfg = GenConfig {
            iterations: 120,
            ..GenConfig::default()
        };
        for report in run_structural_suite(&sig, &cfg) {
            assert!(
                report.passed(),
                "{}: {:?}",
                report.property,
                report.failures.first()
            );
        }
    }

    #[test]
    fn suite_reports_are_deterministic() {
        let sig = credential_signature();
        let cfg = GenConfig {
            iterations: 40,
            ..GenConfig::default()
        };
        let a = run_structural_suite(&sig, &cfg);
        let b = run_structural_suite(&sig, &cfg);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn consistency_small_sizes_find_nothing() {
        let sig = credential_signature();
        assert_eq!(consistency_search(&sig, 3), None);
    }

    #[test]
    fn sanity_control_finds_zero() {
        let sig = credential_signature();
        let found = search_inhabitant(&sig, 3, &Term::NatTy).unwrap();
        assert_eq!(found, Term::Zero);
    }

    #[test]
    fn enumerator_is_sound() {
        let sig = credential_signature();
        let checker = Checker::new(&sig);
        let mut e = TermEnumerator::new(&sig);
        for size in 1..=4 {
            for (t, ty) in e.inferable(size, &[]).iter() {
                assert!(t.is_closed());
                assert_eq!(t.size(), size);
                let inferred = checker.infer(&Context::empty(), t).unwrap();
                assert!(alpha_eq(&inferred, ty), "{t:?}");
            }
        }
    }

    /// Census oracle: enumerate raw syntax trees over the same atom set and
    /// count the ones the kernel can infer. Sizes beyond 4 are too large for
    /// the raw oracle.
    #[test]
    fn enumerator_complete_against_raw_census() {
        let sig = credential_signature();
        let checker = Checker::new(&sig);
        let mut e = TermEnumerator::new(&sig);

        fn raw_terms(atoms: &[Term], size: usize, depth: usize) -> Vec<Term> {
            let mut out = Vec::new();
            if size == 1 {
                out.extend(atoms.iter().cloned());
                for i in 0..depth {
                    out.push(Term::var(i));
                }
                return out;
            }
            for t in raw_terms(atoms, size - 1, depth) {
                out.push(Term::succ(t.clone()));
                out.push(Term::nil(t.clone()));
            }
            for t in raw_terms(atoms, size - 1, depth + 1) {
                out.push(Term::lam(t));
            }
            for left in 1..(size - 1) {
                let right = size - 1 - left;
                for a in raw_terms(atoms, left, depth) {
                    for b in raw_terms(atoms, right, depth) {
                        out.push(Term::app(a.clone(), b.clone()));
                        out.push(Term::fin_trace_ty(a.clone(), b.clone()));
                    }
                    for b in raw_terms(atoms, right, depth + 1) {
                        out.push(Term::pi(a.clone(), b));
                    }
                }
            }
            for x in 1..size.saturating_sub(2) {
                for y in 1..(size - 1 - x) {
                    let z = size - 1 - x - y;
                    for a in raw_terms(atoms, x, depth) {
                        for b in raw_terms(atoms, y, depth) {
                            for c in raw_terms(atoms, z, depth) {
                                out.push(Term::step(a.clone(), b.clone(), c.clone()));
                                out.push(Term::step_ty(a.clone(), b.clone(), c.clone()));
                            }
                        }
                    }
                }
            }
            // TraceElim needs >= 5 nodes; size <= 4 census never reaches it
            out
        }

        let mut atoms = vec![Term::Zero];
        for s in sig.system.state_names() {
            atoms.push(Term::state(s.clone()));
        }
        for ev in sig.system.event_names() {
            atoms.push(Term::event(ev.clone()));
        }
        for st in sig.system.steps() {
            atoms.push(Term::witness(st.witness.clone()));
        }
        for c in sig.corecs.keys() {
            atoms.push(Term::CorecRef(c.clone()));
        }
        atoms.extend([
            Term::StateTy,
            Term::EventTy,
            Term::NatTy,
            Term::InfTraceTy,
            Term::Bottom,
            Term::Universe(Layer::Prop),
            Term::Universe(Layer::Uc(0)),
            Term::Universe(Layer::Uc(1)),
            Term::Universe(Layer::TypeL(0)),
            Term::Universe(Layer::TypeL(1)),
        ]);

        for size in 1..=4 {
            let raw_count = raw_terms(&atoms, size, 0)
                .into_iter()
                .filter(|t| checker.infer(&Context::empty(), t).is_ok())
                .count();
            let enum_count = e.inferable(size, &[]).len();
            assert_eq!(enum_count, raw_count, "size {size}");
        }
    }
}

