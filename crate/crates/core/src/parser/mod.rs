//! Recursive-descent parser for `.dekl` modules and the matching pretty
//! printer.
//!
//! Definition references are inlined at parse time, so every `Term` leaving
//! the parser is closed up to its binders and free of name lookups. Unknown
//! identifiers at use sites are parse errors, as is shadowing a declared name
//! or an enclosing binder.

mod lexer;
mod print;

pub use print::pretty_print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::syntax::{
    CorecBody, CorecDecl, Decl, Layer, ModuleAst, PolicyExpr, PresheafDecl, PresheafSurface,
    SourceSpan, Term,
};
use lexer::{lex, Kw, Lexed, Tok};

/// First-failure parse error with the token descriptions that would have been
/// accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}", self.span, self.expected.join(" or "))?;
        if !self.found.is_empty() {
            write!(f, ", found {}", self.found)?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Names visible to term parsing, without definition bodies. Used to parse
/// standalone terms (round-trip tests, tooling).
#[derive(Debug, Clone, Default)]
pub struct SymbolScope {
    pub states: BTreeSet<String>,
    pub events: BTreeSet<String>,
    pub witnesses: BTreeSet<String>,
    pub corecs: BTreeSet<String>,
}

impl SymbolScope {
    pub fn from_module(m: &ModuleAst) -> SymbolScope {
        let mut s = SymbolScope::default();
        for (d, _) in &m.decls {
            match d {
                Decl::State(n) => {
                    s.states.insert(n.clone());
                }
                Decl::Event(n) => {
                    s.events.insert(n.clone());
                }
                Decl::Step { witness, .. } => {
                    s.witnesses.insert(witness.clone());
                }
                Decl::Corec(c) => {
                    s.corecs.insert(c.name.clone());
                }
                _ => {}
            }
        }
        s
    }
}

/// Parse a whole module. Declaration order is preserved and every term in
/// the result is scope-valid.
pub fn parse_module(file: &str, text: &str) -> Result<ModuleAst, ParseError> {
    let toks = lex(file, text).map_err(|e| ParseError {
        span: e.span,
        expected: vec![e.message],
        found: String::new(),
    })?;
    let mut p = Parser::new(file, toks);
    let mut decls = Vec::new();
    while !p.at_eof() {
        decls.push(p.decl()?);
    }
    Ok(ModuleAst {
        file: file.to_string(),
        decls,
    })
}

/// Parse a single term against a fixed symbol scope.
pub fn parse_term(scope: &SymbolScope, text: &str) -> Result<Term, ParseError> {
    let toks = lex("<term>", text).map_err(|e| ParseError {
        span: e.span,
        expected: vec![e.message],
        found: String::new(),
    })?;
    let mut p = Parser::new("<term>", toks);
    p.states = scope.states.clone();
    p.events = scope.events.clone();
    p.witnesses = scope.witnesses.clone();
    p.corecs = scope.corecs.clone();
    let t = p.term()?;
    p.expect(&Tok::Eof, "end of input")?;
    Ok(t)
}

struct Parser {
    file: String,
    toks: Vec<Lexed>,
    pos: usize,
    states: BTreeSet<String>,
    events: BTreeSet<String>,
    witnesses: BTreeSet<String>,
    corecs: BTreeSet<String>,
    defs: BTreeMap<String, Term>,
    binders: Vec<String>,
}

impl Parser {
    fn new(file: &str, toks: Vec<Lexed>) -> Parser {
        Parser {
            file: file.to_string(),
            toks,
            pos: 0,
            states: BTreeSet::new(),
            events: BTreeSet::new(),
            witnesses: BTreeSet::new(),
            corecs: BTreeSet::new(),
            defs: BTreeMap::new(),
            binders: Vec::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    fn found(&self) -> String {
        self.toks[self.pos].tok.describe()
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Lexed {
        let l = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        l
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        Err(ParseError {
            span: self.here(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.found(),
        })
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<Lexed, ParseError> {
        if self.peek() == tok {
            Ok(self.bump())
        } else {
            self.error(&[what])
        }
    }

    fn expect_kw(&mut self, kw: Kw) -> Result<Lexed, ParseError> {
        if self.peek() == &Tok::Keyword(kw) {
            Ok(self.bump())
        } else {
            self.error(&[&format!("`{}`", kw.text())])
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, SourceSpan), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let l = self.bump();
                Ok((name, l.span))
            }
            _ => self.error(&[what]),
        }
    }

    fn nat(&mut self, what: &str) -> Result<u64, ParseError> {
        match *self.peek() {
            Tok::Nat(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.error(&[what]),
        }
    }

    fn name_in_use(&self, name: &str) -> bool {
        self.states.contains(name)
            || self.events.contains(name)
            || self.witnesses.contains(name)
            || self.corecs.contains(name)
            || self.defs.contains_key(name)
    }

    fn fresh_decl_name(&mut self, what: &str) -> Result<(String, SourceSpan), ParseError> {
        let (name, span) = self.ident(what)?;
        if self.name_in_use(&name) {
            return Err(ParseError {
                span,
                expected: vec![format!("a fresh name (`{name}` is already declared)")],
                found: format!("identifier `{name}`"),
            });
        }
        Ok((name, span))
    }

    fn declared_state(&mut self) -> Result<String, ParseError> {
        let (name, span) = self.ident("a declared state name")?;
        if !self.states.contains(&name) {
            return Err(ParseError {
                span,
                expected: vec![format!("a declared state name (`{name}` is unknown)")],
                found: format!("identifier `{name}`"),
            });
        }
        Ok(name)
    }

    fn declared_event(&mut self) -> Result<String, ParseError> {
        let (name, span) = self.ident("a declared event name")?;
        if !self.events.contains(&name) {
            return Err(ParseError {
                span,
                expected: vec![format!("a declared event name (`{name}` is unknown)")],
                found: format!("identifier `{name}`"),
            });
        }
        Ok(name)
    }

    fn decl(&mut self) -> Result<(Decl, SourceSpan), ParseError> {
        let start = self.here();
        let decl = match self.peek() {
            Tok::Keyword(Kw::State) => {
                self.bump();
                let (name, _) = self.fresh_decl_name("a state name")?;
                self.states.insert(name.clone());
                Decl::State(name)
            }
            Tok::Keyword(Kw::Event) => {
                self.bump();
                let (name, _) = self.fresh_decl_name("an event name")?;
                self.events.insert(name.clone());
                Decl::Event(name)
            }
            Tok::Keyword(Kw::Step) => {
                self.bump();
                let src = self.declared_state()?;
                self.expect(&Tok::StepOpen, "`-[`")?;
                let event = self.declared_event()?;
                self.expect(&Tok::StepClose, "`]->`")?;
                let dst = self.declared_state()?;
                self.expect_kw(Kw::As)?;
                let (witness, _) = self.fresh_decl_name("a witness name")?;
                self.witnesses.insert(witness.clone());
                Decl::Step {
                    src,
                    event,
                    dst,
                    witness,
                }
            }
            Tok::Keyword(Kw::Def) => {
                self.bump();
                let (name, _) = self.fresh_decl_name("a definition name")?;
                self.expect(&Tok::Colon, "`:`")?;
                let ty = self.term()?;
                self.expect(&Tok::ColonEq, "`:=`")?;
                let body = self.term()?;
                self.defs.insert(name.clone(), body.clone());
                Decl::Def { name, ty, body }
            }
            Tok::Keyword(Kw::Presheaf) => {
                self.bump();
                let (name, _) = self.fresh_decl_name("a presheaf name")?;
                self.expect(&Tok::ColonEq, "`:=`")?;
                let spec = self.presheaf_spec()?;
                Decl::Presheaf(PresheafDecl { name, spec })
            }
            Tok::Keyword(Kw::Corec) => {
                self.bump();
                let (name, _) = self.fresh_decl_name("a corecursive name")?;
                self.expect(&Tok::ColonEq, "`:=`")?;
                let body = self.corec_body()?;
                self.corecs.insert(name.clone());
                Decl::Corec(CorecDecl { name, body })
            }
            _ => {
                return self.error(&[
                    "`state`",
                    "`event`",
                    "`step`",
                    "`def`",
                    "`presheaf`",
                    "`corec`",
                ])
            }
        };
        let end = self.expect(&Tok::Dot, "`.`")?;
        let span = SourceSpan {
            file: self.file.clone(),
            start_line: start.start_line,
            start_col: start.start_col,
            end_line: end.span.end_line,
            end_col: end.span.end_col,
        };
        Ok((decl, span))
    }

    fn presheaf_spec(&mut self) -> Result<PresheafSurface, ParseError> {
        match self.peek() {
            Tok::Keyword(Kw::Predicate) => {
                self.bump();
                let expr = self.policy_or()?;
                self.expect_kw(Kw::From)?;
                let root = self.declared_state()?;
                self.expect_kw(Kw::Depth)?;
                let depth = self.nat("a depth numeral")? as u32;
                Ok(PresheafSurface::Predicate { expr, root, depth })
            }
            Tok::Keyword(Kw::Evidence) => {
                self.bump();
                self.expect_kw(Kw::Issue)?;
                let issue = self.declared_event()?;
                self.expect_kw(Kw::Revoke)?;
                let revoke = self.declared_event()?;
                self.expect_kw(Kw::From)?;
                let root = self.declared_state()?;
                self.expect_kw(Kw::Depth)?;
                let depth = self.nat("a depth numeral")? as u32;
                Ok(PresheafSurface::Evidence {
                    issue,
                    revoke,
                    root,
                    depth,
                })
            }
            _ => self.error(&["`predicate`", "`evidence`"]),
        }
    }

    fn policy_or(&mut self) -> Result<PolicyExpr, ParseError> {
        let mut lhs = self.policy_and()?;
        while self.peek() == &Tok::Keyword(Kw::Or) {
            self.bump();
            let rhs = self.policy_and()?;
            lhs = PolicyExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn policy_and(&mut self) -> Result<PolicyExpr, ParseError> {
        let mut lhs = self.policy_not()?;
        while self.peek() == &Tok::Keyword(Kw::And) {
            self.bump();
            let rhs = self.policy_not()?;
            lhs = PolicyExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn policy_not(&mut self) -> Result<PolicyExpr, ParseError> {
        if self.peek() == &Tok::Keyword(Kw::Not) {
            self.bump();
            Ok(PolicyExpr::not(self.policy_not()?))
        } else {
            self.policy_atom()
        }
    }

    fn policy_atom(&mut self) -> Result<PolicyExpr, ParseError> {
        match self.peek() {
            Tok::Keyword(Kw::Occurs) => {
                self.bump();
                self.expect(&Tok::LParen, "`(`")?;
                let ev = self.declared_event()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(PolicyExpr::Occurs(ev))
            }
            Tok::Keyword(Kw::Atleast) => {
                self.bump();
                self.expect(&Tok::LParen, "`(`")?;
                let ev = self.declared_event()?;
                self.expect(&Tok::Comma, "`,`")?;
                let n = self.nat("a count numeral")? as u32;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(PolicyExpr::CountAtLeast(ev, n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.policy_or()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.error(&["`occurs`", "`atleast`", "`not`", "`(`"]),
        }
    }

    fn corec_body(&mut self) -> Result<CorecBody, ParseError> {
        match self.peek() {
            Tok::Keyword(Kw::Head) => {
                self.bump();
                let head = self.term()?;
                self.expect(&Tok::Semicolon, "`;`")?;
                self.expect_kw(Kw::Tail)?;
                self.expect(&Tok::LParen, "`(`")?;
                let event = self.term()?;
                self.expect(&Tok::Comma, "`,`")?;
                // tail references may be forward or mutual; resolved by the kernel
                let (tail, _) = self.ident("a corecursive name")?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(CorecBody::Cons { head, event, tail })
            }
            Tok::Ident(_) => {
                let (name, _) = self.ident("a corecursive name")?;
                Ok(CorecBody::Ref(name))
            }
            _ => self.error(&["`head`", "a corecursive name"]),
        }
    }

    fn push_binder(&mut self, name: String, span: SourceSpan) -> Result<(), ParseError> {
        if self.binders.iter().any(|b| b == &name) || self.name_in_use(&name) {
            return Err(ParseError {
                span,
                expected: vec![format!(
                    "a fresh binder name (`{name}` shadows a declared name or binder)"
                )],
                found: format!("identifier `{name}`"),
            });
        }
        self.binders.push(name);
        Ok(())
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if self.peek() == &Tok::Keyword(Kw::Fun) {
            self.bump();
            let (name, span) = self.ident("a binder name")?;
            self.push_binder(name, span)?;
            self.expect(&Tok::FatArrow, "`=>`")?;
            let body = self.term();
            self.binders.pop();
            return Ok(Term::lam(body?));
        }
        self.arrow()
    }

    fn arrow(&mut self) -> Result<Term, ParseError> {
        // dependent product: "(x : A) -> B"
        if self.peek() == &Tok::LParen
            && matches!(self.peek_at(1), Tok::Ident(_))
            && self.peek_at(2) == &Tok::Colon
        {
            self.bump();
            let (name, span) = self.ident("a binder name")?;
            self.expect(&Tok::Colon, "`:`")?;
            let dom = self.term()?;
            self.expect(&Tok::RParen, "`)`")?;
            self.expect(&Tok::Arrow, "`->`")?;
            self.push_binder(name, span)?;
            let cod = self.arrow();
            self.binders.pop();
            return Ok(Term::pi(dom, cod?));
        }
        let head = self.app()?;
        if self.peek() == &Tok::Arrow {
            self.bump();
            let cod = self.arrow()?;
            // non-dependent arrow: codomain does not use the binder
            return Ok(Term::pi(head, crate::syntax::weaken(&cod, 0)));
        }
        Ok(head)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Ident(_)
                | Tok::Nat(_)
                | Tok::Universe(..)
                | Tok::LParen
                | Tok::Keyword(
                    Kw::Prop
                        | Kw::StateTy
                        | Kw::EventTy
                        | Kw::NatTy
                        | Kw::InfTrace
                        | Kw::Bot
                        | Kw::FinTrace
                        | Kw::StepTy
                        | Kw::Nil
                        | Kw::Step
                        | Kw::Succ
                        | Kw::TraceElim
                )
        )
    }

    fn app(&mut self) -> Result<Term, ParseError> {
        let mut head = self.atom()?;
        while self.starts_atom() {
            // "(x : A) -> ..." is never an argument; leave it to callers
            if self.peek() == &Tok::LParen
                && matches!(self.peek_at(1), Tok::Ident(_))
                && self.peek_at(2) == &Tok::Colon
            {
                break;
            }
            let arg = self.atom()?;
            head = Term::app(head, arg);
        }
        Ok(head)
    }

    fn paren_args<const N: usize>(&mut self) -> Result<[Term; N], ParseError> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut out = Vec::with_capacity(N);
        for i in 0..N {
            if i > 0 {
                self.expect(&Tok::Comma, "`,`")?;
            }
            out.push(self.term()?);
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(out.try_into().expect("arity"))
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.here();
                self.bump();
                if let Some(pos) = self.binders.iter().rposition(|b| b == &name) {
                    return Ok(Term::var(self.binders.len() - 1 - pos));
                }
                if self.states.contains(&name) {
                    return Ok(Term::state(name));
                }
                if self.events.contains(&name) {
                    return Ok(Term::event(name));
                }
                if self.witnesses.contains(&name) {
                    return Ok(Term::witness(name));
                }
                if self.corecs.contains(&name) {
                    return Ok(Term::CorecRef(name));
                }
                if let Some(body) = self.defs.get(&name) {
                    return Ok(body.clone());
                }
                Err(ParseError {
                    span,
                    expected: vec![format!("a declared name (`{name}` is unknown)")],
                    found: format!("identifier `{name}`"),
                })
            }
            Tok::Nat(n) => {
                self.bump();
                Ok(Term::nat(n))
            }
            Tok::Universe(true, i) => {
                self.bump();
                Ok(Term::Universe(Layer::Uc(i)))
            }
            Tok::Universe(false, i) => {
                self.bump();
                Ok(Term::Universe(Layer::TypeL(i)))
            }
            Tok::Keyword(Kw::Prop) => {
                self.bump();
                Ok(Term::Universe(Layer::Prop))
            }
            Tok::Keyword(Kw::StateTy) => {
                self.bump();
                Ok(Term::StateTy)
            }
            Tok::Keyword(Kw::EventTy) => {
                self.bump();
                Ok(Term::EventTy)
            }
            Tok::Keyword(Kw::NatTy) => {
                self.bump();
                Ok(Term::NatTy)
            }
            Tok::Keyword(Kw::InfTrace) => {
                self.bump();
                Ok(Term::InfTraceTy)
            }
            Tok::Keyword(Kw::Bot) => {
                self.bump();
                Ok(Term::Bottom)
            }
            Tok::Keyword(Kw::FinTrace) => {
                self.bump();
                let [a, b] = self.paren_args::<2>()?;
                Ok(Term::fin_trace_ty(a, b))
            }
            Tok::Keyword(Kw::StepTy) => {
                self.bump();
                let [a, b, c] = self.paren_args::<3>()?;
                Ok(Term::step_ty(a, b, c))
            }
            Tok::Keyword(Kw::Nil) => {
                self.bump();
                let [s] = self.paren_args::<1>()?;
                Ok(Term::nil(s))
            }
            Tok::Keyword(Kw::Step) => {
                self.bump();
                let [a, b, c] = self.paren_args::<3>()?;
                Ok(Term::step(a, b, c))
            }
            Tok::Keyword(Kw::Succ) => {
                self.bump();
                let [n] = self.paren_args::<1>()?;
                Ok(Term::succ(n))
            }
            Tok::Keyword(Kw::TraceElim) => {
                self.bump();
                let [p, b, s, t] = self.paren_args::<4>()?;
                Ok(Term::trace_elim(p, b, s, t))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Keyword(Kw::UcBare) | Tok::Keyword(Kw::TypeBare) => {
                self.error(&["a universe literal with an index (e.g. `Uc0`, `Type1`)"])
            }
            _ => self.error(&["a term"]),
        }
    }
}
