//! Checker and semantic analyzer for the DEKL module language.
//!
//! A `.dekl` module declares a transition system (states, events, named
//! steps), definitions in a small dependent calculus with first-class finite
//! traces, corecursive infinite traces, and trace-indexed presheaf
//! specifications. This crate provides:
//!
//! - [`syntax`]: terms, contexts, declarations, de Bruijn operations;
//! - [`parser`]: the `.dekl` parser and pretty printer;
//! - [`kernel`]: typing judgments, definitional equality, normalization;
//! - [`semantics`]: the free trace category over a transition system, BFS
//!   reachability, and the interp/reify adequacy pair;
//! - [`presheaf`]: finite trace-indexed presheaves, functor-law validation,
//!   and non-monotonicity analysis by restriction-map surjectivity;
//! - [`meta`]: a well-typed term generator, structural metatheory suites, and
//!   a bounded consistency search.

pub mod kernel;
pub mod meta;
pub mod parser;
pub mod presheaf;
pub mod semantics;
pub mod syntax;

pub use kernel::{
    check_guardedness, check_module, observe_inftrace, CheckFailure, CheckedDef, CheckedModule,
    Checker, NormalForm, Observation, Signature, TypeError, TypeErrorKind,
};
pub use parser::{parse_module, parse_term, pretty_print, ParseError, SymbolScope};
pub use presheaf::{
    analyze_nonmonotonicity, build_presheaf, check_surjective, eval_policy, localize_index_shift,
    restrict, validate_presheaf, FinitePresheaf, NonMonotonicityReport, PresheafError,
    PresheafSpec, Verdict, Witness,
};
pub use semantics::{
    concat, enumerate_traces, identity_path, interp, reachable, reify, validate_system,
    witness_path, ExtensionMorphism, Path, SemanticsError, StateId, StepId, SystemError,
    TransitionSystem,
};
pub use syntax::{
    alpha_eq, shift, subst, subst_at, weaken, Context, CorecBody, CorecDecl, Decl, Layer,
    ModuleAst, PolicyExpr, PresheafDecl, PresheafSurface, SourceSpan, Term,
};
