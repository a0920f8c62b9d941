//! Lexer for the `.dekl` module language. ASCII identifiers only; line
//! comments start with `--`.

use crate::syntax::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Nat(u64),
    /// Universe literal `Uc<k>` or `Type<k>`; true = Uc hierarchy.
    Universe(bool, u32),
    Keyword(Kw),
    Dot,
    Colon,
    ColonEq,
    Comma,
    Semicolon,
    LParen,
    RParen,
    Arrow,
    FatArrow,
    /// `-[`
    StepOpen,
    /// `]->`
    StepClose,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    State,
    Event,
    Step,
    As,
    Def,
    Presheaf,
    Policy,
    Corec,
    Prop,
    TypeBare,
    UcBare,
    FinTrace,
    InfTrace,
    StepTy,
    StateTy,
    EventTy,
    NatTy,
    Nil,
    TraceElim,
    Bot,
    Fun,
    Succ,
    Head,
    Tail,
    Predicate,
    Evidence,
    Issue,
    Revoke,
    From,
    Depth,
    Not,
    And,
    Or,
    Occurs,
    Atleast,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Nat(n) => format!("numeral `{n}`"),
            Tok::Universe(true, i) => format!("`Uc{i}`"),
            Tok::Universe(false, i) => format!("`Type{i}`"),
            Tok::Keyword(k) => format!("`{}`", k.text()),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::ColonEq => "`:=`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semicolon => "`;`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::StepOpen => "`-[`".into(),
            Tok::StepClose => "`]->`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

impl Kw {
    pub fn text(&self) -> &'static str {
        match self {
            Kw::State => "state",
            Kw::Event => "event",
            Kw::Step => "step",
            Kw::As => "as",
            Kw::Def => "def",
            Kw::Presheaf => "presheaf",
            Kw::Policy => "policy",
            Kw::Corec => "corec",
            Kw::Prop => "Prop",
            Kw::TypeBare => "Type",
            Kw::UcBare => "Uc",
            Kw::FinTrace => "FinTrace",
            Kw::InfTrace => "InfTrace",
            Kw::StepTy => "Step",
            Kw::StateTy => "State",
            Kw::EventTy => "Event",
            Kw::NatTy => "Nat",
            Kw::Nil => "nil",
            Kw::TraceElim => "trace_elim",
            Kw::Bot => "bot",
            Kw::Fun => "fun",
            Kw::Succ => "succ",
            Kw::Head => "head",
            Kw::Tail => "tail",
            Kw::Predicate => "predicate",
            Kw::Evidence => "evidence",
            Kw::Issue => "issue",
            Kw::Revoke => "revoke",
            Kw::From => "from",
            Kw::Depth => "depth",
            Kw::Not => "not",
            Kw::And => "and",
            Kw::Or => "or",
            Kw::Occurs => "occurs",
            Kw::Atleast => "atleast",
        }
    }
}

fn keyword_of(word: &str) -> Option<Kw> {
    Some(match word {
        "state" => Kw::State,
        "event" => Kw::Event,
        "step" => Kw::Step,
        "as" => Kw::As,
        "def" => Kw::Def,
        "presheaf" => Kw::Presheaf,
        "policy" => Kw::Policy,
        "corec" => Kw::Corec,
        "Prop" => Kw::Prop,
        "Type" => Kw::TypeBare,
        "Uc" => Kw::UcBare,
        "FinTrace" => Kw::FinTrace,
        "InfTrace" => Kw::InfTrace,
        "Step" => Kw::StepTy,
        "State" => Kw::StateTy,
        "Event" => Kw::EventTy,
        "Nat" => Kw::NatTy,
        "nil" => Kw::Nil,
        "trace_elim" => Kw::TraceElim,
        "bot" => Kw::Bot,
        "fun" => Kw::Fun,
        "succ" => Kw::Succ,
        "head" => Kw::Head,
        "tail" => Kw::Tail,
        "predicate" => Kw::Predicate,
        "evidence" => Kw::Evidence,
        "issue" => Kw::Issue,
        "revoke" => Kw::Revoke,
        "from" => Kw::From,
        "depth" => Kw::Depth,
        "not" => Kw::Not,
        "and" => Kw::And,
        "or" => Kw::Or,
        "occurs" => Kw::Occurs,
        "atleast" => Kw::Atleast,
        _ => return None,
    })
}

/// Identifiers shaped `Uc<digits>` / `Type<digits>` are universe literals.
fn universe_of(word: &str) -> Option<(bool, u32)> {
    let (uc, rest) = match (word.strip_prefix("Uc"), word.strip_prefix("Type")) {
        (Some(r), _) => (true, r),
        (_, Some(r)) => (false, r),
        _ => return None,
    };
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok().map(|i| (uc, i))
}

#[derive(Debug, Clone)]
pub struct Lexed {
    pub tok: Tok,
    pub span: SourceSpan,
}

#[derive(Debug)]
pub struct LexError {
    pub span: SourceSpan,
    pub message: String,
}

pub fn lex(file: &str, src: &str) -> Result<Vec<Lexed>, LexError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! span_here {
        () => {
            SourceSpan::point(file, line, col)
        };
    }
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            b' ' | b'\t' | b'\r' => {
                i += 1;
                col += 1;
            }
            b'-' if i + 1 < bytes.len() && bytes[i + 1] == b'-' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'-' => {
                let start = span_here!();
                if i + 1 < bytes.len() && bytes[i + 1] == b'[' {
                    out.push(Lexed {
                        tok: Tok::StepOpen,
                        span: start,
                    });
                    i += 2;
                    col += 2;
                } else if i + 1 < bytes.len() && bytes[i + 1] == b'>' {
                    out.push(Lexed {
                        tok: Tok::Arrow,
                        span: start,
                    });
                    i += 2;
                    col += 2;
                } else {
                    return Err(LexError {
                        span: start,
                        message: "stray `-` (expected `->`, `-[`, or `--` comment)".into(),
                    });
                }
            }
            b']' => {
                let start = span_here!();
                if i + 2 < bytes.len() && bytes[i + 1] == b'-' && bytes[i + 2] == b'>' {
                    out.push(Lexed {
                        tok: Tok::StepClose,
                        span: start,
                    });
                    i += 3;
                    col += 3;
                } else {
                    return Err(LexError {
                        span: start,
                        message: "stray `]` (expected `]->`)".into(),
                    });
                }
            }
            b':' => {
                let start = span_here!();
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    out.push(Lexed {
                        tok: Tok::ColonEq,
                        span: start,
                    });
                    i += 2;
                    col += 2;
                } else {
                    out.push(Lexed {
                        tok: Tok::Colon,
                        span: start,
                    });
                    i += 1;
                    col += 1;
                }
            }
            b'=' => {
                let start = span_here!();
                if i + 1 < bytes.len() && bytes[i + 1] == b'>' {
                    out.push(Lexed {
                        tok: Tok::FatArrow,
                        span: start,
                    });
                    i += 2;
                    col += 2;
                } else {
                    return Err(LexError {
                        span: start,
                        message: "stray `=` (expected `=>` or `:=`)".into(),
                    });
                }
            }
            b'.' => {
                out.push(Lexed {
                    tok: Tok::Dot,
                    span: span_here!(),
                });
                i += 1;
                col += 1;
            }
            b',' => {
                out.push(Lexed {
                    tok: Tok::Comma,
                    span: span_here!(),
                });
                i += 1;
                col += 1;
            }
            b';' => {
                out.push(Lexed {
                    tok: Tok::Semicolon,
                    span: span_here!(),
                });
                i += 1;
                col += 1;
            }
            b'(' => {
                out.push(Lexed {
                    tok: Tok::LParen,
                    span: span_here!(),
                });
                i += 1;
                col += 1;
            }
            b')' => {
                out.push(Lexed {
                    tok: Tok::RParen,
                    span: span_here!(),
                });
                i += 1;
                col += 1;
            }
            b'0'..=b'9' => {
                let start = span_here!();
                let begin = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let text = &src[begin..i];
                let n: u64 = text.parse().map_err(|_| LexError {
                    span: start.clone(),
                    message: format!("numeral `{text}` out of range"),
                })?;
                out.push(Lexed {
                    tok: Tok::Nat(n),
                    span: start,
                });
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = span_here!();
                let begin = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
                {
                    i += 1;
                    col += 1;
                }
                let word = &src[begin..i];
                let tok = if let Some((uc, idx)) = universe_of(word) {
                    Tok::Universe(uc, idx)
                } else if let Some(kw) = keyword_of(word) {
                    Tok::Keyword(kw)
                } else {
                    Tok::Ident(word.to_string())
                };
                out.push(Lexed {
                    tok,
                    span: start,
                });
            }
            _ => {
                return Err(LexError {
                    span: span_here!(),
                    message: if b.is_ascii() {
                        format!("unexpected character `{}`", b as char)
                    } else {
                        "non-ASCII input (identifiers are ASCII only)".into()
                    },
                });
            }
        }
    }
    out.push(Lexed {
        tok: Tok::Eof,
        span: SourceSpan::point(file, line, col),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_step_decl_symbols() {
        let toks = lex("t.dekl", "step S0 -[E]-> S1 as w01.").unwrap();
        let kinds: Vec<&Tok> = toks.iter().map(|l| &l.tok).collect();
        assert!(matches!(kinds[0], Tok::Keyword(Kw::Step)));
        assert!(matches!(kinds[2], Tok::StepOpen));
        assert!(matches!(kinds[4], Tok::StepClose));
        assert!(matches!(kinds[6], Tok::Keyword(Kw::As)));
        assert!(matches!(kinds[8], Tok::Dot));
    }

    #[test]
    fn universe_literals() {
        let toks = lex("t.dekl", "Uc0 Type12 Ucx Type_a").unwrap();
        assert_eq!(toks[0].tok, Tok::Universe(true, 0));
        assert_eq!(toks[1].tok, Tok::Universe(false, 12));
        // Ucx / Type_a are plain identifiers
        assert_eq!(toks[2].tok, Tok::Ident("Ucx".into()));
        assert_eq!(toks[3].tok, Tok::Ident("Type_a".into()));
    }

    #[test]
    fn comments_skipped_and_positions_tracked() {
        let toks = lex("t.dekl", "-- hello\nstate S0.").unwrap();
        assert_eq!(toks[0].span.start_line, 2);
        assert_eq!(toks[0].span.start_col, 1);
    }

    #[test]
    fn rejects_non_ascii() {
        let err = lex("t.dekl", "state Ω.").unwrap_err();
        assert!(err.message.contains("non-ASCII"));
    }
}
