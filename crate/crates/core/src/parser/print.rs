//! Pretty printer producing parser-compatible text.
//!
//! Binder names are invented fresh (`x`, `x1`, ...) and never collide with
//! constant names appearing in the term or with context names, so printed
//! terms re-parse to alpha-equal terms.

use std::collections::BTreeSet;

use crate::syntax::{Context, Term};

const PREC_TERM: u8 = 0;
const PREC_APP: u8 = 1;
const PREC_ATOM: u8 = 2;

/// Render `t` using `names` for free variables.
pub fn pretty_print(t: &Term, names: &Context) -> String {
    let mut avoid = BTreeSet::new();
    collect_consts(t, &mut avoid);
    for (n, _) in names.entries() {
        avoid.insert(n.clone());
    }
    let mut stack: Vec<String> = names.entries().iter().map(|(n, _)| n.clone()).collect();
    let mut printer = Printer {
        avoid,
        next_fresh: 0,
    };
    printer.print(t, &mut stack, PREC_TERM)
}

fn collect_consts(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::StateConst(n) | Term::EventConst(n) | Term::StepWitness(n) | Term::CorecRef(n) => {
            out.insert(n.clone());
        }
        Term::Var(_)
        | Term::Universe(_)
        | Term::StateTy
        | Term::EventTy
        | Term::NatTy
        | Term::Zero
        | Term::InfTraceTy
        | Term::Bottom => {}
        Term::Lam(b) | Term::Nil(b) | Term::Succ(b) => collect_consts(b, out),
        Term::Pi(a, b) | Term::App(a, b) | Term::FinTraceTy(a, b) => {
            collect_consts(a, out);
            collect_consts(b, out);
        }
        Term::Step(a, b, c) | Term::StepTy(a, b, c) => {
            collect_consts(a, out);
            collect_consts(b, out);
            collect_consts(c, out);
        }
        Term::TraceElim(a, b, c, d) => {
            collect_consts(a, out);
            collect_consts(b, out);
            collect_consts(c, out);
            collect_consts(d, out);
        }
    }
}

struct Printer {
    avoid: BTreeSet<String>,
    next_fresh: usize,
}

impl Printer {
    fn fresh(&mut self, stack: &[String]) -> String {
        loop {
            let candidate = if self.next_fresh == 0 {
                "x".to_string()
            } else {
                format!("x{}", self.next_fresh)
            };
            self.next_fresh += 1;
            if !self.avoid.contains(&candidate) && !stack.contains(&candidate) {
                return candidate;
            }
        }
    }

    fn print(&mut self, t: &Term, stack: &mut Vec<String>, prec: u8) -> String {
        match t {
            Term::Var(i) => stack
                .get(stack.len().wrapping_sub(1 + i))
                .cloned()
                .unwrap_or_else(|| format!("_free{i}")),
            Term::Universe(l) => l.to_string(),
            Term::StateTy => "State".into(),
            Term::EventTy => "Event".into(),
            Term::NatTy => "Nat".into(),
            Term::InfTraceTy => "InfTrace".into(),
            Term::Bottom => "bot".into(),
            Term::Zero => "0".into(),
            Term::StateConst(n) | Term::EventConst(n) | Term::StepWitness(n)
            | Term::CorecRef(n) => n.clone(),
            Term::Succ(n) => match numeral(t) {
                Some(k) => k.to_string(),
                None => format!("succ({})", self.print(n, stack, PREC_TERM)),
            },
            Term::Nil(s) => format!("nil({})", self.print(s, stack, PREC_TERM)),
            Term::Step(a, b, c) => format!(
                "step({}, {}, {})",
                self.print(a, stack, PREC_TERM),
                self.print(b, stack, PREC_TERM),
                self.print(c, stack, PREC_TERM)
            ),
            Term::StepTy(a, b, c) => format!(
                "Step({}, {}, {})",
                self.print(a, stack, PREC_TERM),
                self.print(b, stack, PREC_TERM),
                self.print(c, stack, PREC_TERM)
            ),
            Term::FinTraceTy(a, b) => format!(
                "FinTrace({}, {})",
                self.print(a, stack, PREC_TERM),
                self.print(b, stack, PREC_TERM)
            ),
            Term::TraceElim(p, b, s, tr) => format!(
                "trace_elim({}, {}, {}, {})",
                self.print(p, stack, PREC_TERM),
                self.print(b, stack, PREC_TERM),
                self.print(s, stack, PREC_TERM),
                self.print(tr, stack, PREC_TERM)
            ),
            Term::Lam(body) => {
                let name = self.fresh(stack);
                stack.push(name.clone());
                let b = self.print(body, stack, PREC_TERM);
                stack.pop();
                wrap(prec > PREC_TERM, format!("fun {name} => {b}"))
            }
            Term::Pi(dom, cod) => {
                let d_uses_binder = uses_binder(cod, 0);
                if d_uses_binder {
                    let d = self.print(dom, stack, PREC_TERM);
                    let name = self.fresh(stack);
                    stack.push(name.clone());
                    let c = self.print(cod, stack, PREC_TERM);
                    stack.pop();
                    wrap(prec > PREC_TERM, format!("({name} : {d}) -> {c}"))
                } else {
                    let d = self.print(dom, stack, PREC_APP);
                    // binder is unused but still shifts indices underneath
                    stack.push("_".into());
                    let c = self.print(cod, stack, PREC_TERM);
                    stack.pop();
                    wrap(prec > PREC_TERM, format!("{d} -> {c}"))
                }
            }
            Term::App(f, a) => {
                let fs = self.print(f, stack, PREC_APP);
                let as_ = self.print(a, stack, PREC_ATOM);
                wrap(prec > PREC_APP, format!("{fs} {as_}"))
            }
        }
    }
}

fn wrap(needed: bool, s: String) -> String {
    if needed {
        format!("({s})")
    } else {
        s
    }
}

/// `Some(k)` iff the term is `Succ^k(Zero)`.
fn numeral(t: &Term) -> Option<u64> {
    let mut k = 0u64;
    let mut cur = t;
    loop {
        match cur {
            Term::Zero => return Some(k),
            Term::Succ(n) => {
                k += 1;
                cur = n;
            }
            _ => return None,
        }
    }
}

fn uses_binder(t: &Term, depth: usize) -> bool {
    match t {
        Term::Var(i) => *i == depth,
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
        | Term::Bottom => false,
        Term::Lam(b) => uses_binder(b, depth + 1),
        Term::Pi(a, b) => uses_binder(a, depth) || uses_binder(b, depth + 1),
        Term::Nil(s) => uses_binder(s, depth),
        Term::Succ(n) => uses_binder(n, depth),
        Term::App(f, a) => uses_binder(f, depth) || uses_binder(a, depth),
        Term::FinTraceTy(a, b) => uses_binder(a, depth) || uses_binder(b, depth),
        Term::Step(a, b, c) | Term::StepTy(a, b, c) => {
            uses_binder(a, depth) || uses_binder(b, depth) || uses_binder(c, depth)
        }
        Term::TraceElim(a, b, c, d) => {
            uses_binder(a, depth)
                || uses_binder(b, depth)
                || uses_binder(c, depth)
                || uses_binder(d, depth)
        }
    }
}
