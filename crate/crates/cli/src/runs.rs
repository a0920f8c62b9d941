//! Implementations of the CLI subcommands. Each returns the command name,
//! the worst status seen, the JSON report items, and the human-readable
//! lines, in deterministic order.

use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use dekl_core::kernel::TypeErrorKind;
use dekl_core::meta::{consistency_search, run_structural_suite, search_inhabitant, GenConfig};
use dekl_core::presheaf::PresheafSpec;
use dekl_core::{
    analyze_nonmonotonicity, build_presheaf, check_module, enumerate_traces, interp,
    localize_index_shift, observe_inftrace, parse_module, pretty_print, reify, validate_presheaf,
    CheckFailure, CheckedModule, Checker, Context, ModuleAst, NonMonotonicityReport, PresheafDecl,
    PresheafSurface, StateId, Term, Witness,
};

use crate::report::{check_failure_json, parse_error_json};
use crate::Status;

type RunOutcome = (String, Status, Vec<Value>, Vec<String>);

fn color_enabled() -> bool {
    std::io::stdout().is_terminal() && std::env::var("DEKL_COLOR").ok().is_none_or(|v| v != "0")
}

fn paint(ok: bool, text: &str) -> String {
    if color_enabled() {
        if ok {
            format!("\u{1b}[32m{text}\u{1b}[0m")
        } else {
            format!("\u{1b}[31m{text}\u{1b}[0m")
        }
    } else {
        text.to_string()
    }
}

enum LoadError {
    Io(String),
    Parse(Value, String),
    Check(Status, Value, String),
}

fn load_checked(path: &Path) -> Result<(ModuleAst, CheckedModule), LoadError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| LoadError::Io(format!("{name}: cannot read: {e}")))?;
    let ast = parse_module(&name, &text)
        .map_err(|e| LoadError::Parse(parse_error_json(&e), format!("{name}: {e}")))?;
    let checked = check_module(&ast).map_err(|e| {
        let status = match &e {
            CheckFailure::Type(t) if matches!(t.kind, TypeErrorKind::Internal(_)) => {
                Status::Internal
            }
            _ => Status::Failure,
        };
        LoadError::Check(status, check_failure_json(&e), format!("{name}: {e}"))
    })?;
    Ok((ast, checked))
}

// ---- check --------------------------------------------------------------------

pub fn check(files: &[PathBuf]) -> RunOutcome {
    // independent files check in parallel; output preserves input order
    let mut slots: Vec<Option<(Status, Value, String)>> = Vec::new();
    slots.resize_with(files.len(), || None);
    std::thread::scope(|scope| {
        for (slot, file) in slots.iter_mut().zip(files) {
            scope.spawn(move || {
                let name = file.display().to_string();
                *slot = Some(match load_checked(file) {
                    Ok((ast, _)) => (
                        Status::Ok,
                        json!({"file": name, "status": "ok", "declarations": ast.decls.len(), "errors": []}),
                        format!("{name}: {}", paint(true, "ok")),
                    ),
                    Err(LoadError::Io(msg)) => (
                        Status::ParseOrIo,
                        json!({"file": name, "status": "io-error", "errors": [{"kind": "Io", "message": msg}]}),
                        paint(false, &msg),
                    ),
                    Err(LoadError::Parse(err, msg)) => (
                        Status::ParseOrIo,
                        json!({"file": name, "status": "parse-error", "errors": [err]}),
                        paint(false, &msg),
                    ),
                    Err(LoadError::Check(status, err, msg)) => (
                        status,
                        json!({"file": name, "status": "type-error", "errors": [err]}),
                        paint(false, &msg),
                    ),
                });
            });
        }
    });
    let mut status = Status::Ok;
    let mut items = Vec::new();
    let mut lines = Vec::new();
    for slot in slots {
        let (s, item, line) = slot.expect("checked");
        status = status.max(s);
        items.push(item);
        lines.push(line);
    }
    ("check".into(), status, items, lines)
}

// ---- analyze ------------------------------------------------------------------

fn resolve_spec(decl: &PresheafDecl) -> (PresheafSpec, String, u32) {
    match &decl.spec {
        PresheafSurface::Predicate { expr, root, depth } => (
            PresheafSpec::Predicate {
                name: decl.name.clone(),
                expr: expr.clone(),
            },
            root.clone(),
            *depth,
        ),
        PresheafSurface::Evidence {
            issue,
            revoke,
            root,
            depth,
        } => (
            PresheafSpec::Evidence {
                name: decl.name.clone(),
                issue: issue.clone(),
                revoke: revoke.clone(),
            },
            root.clone(),
            *depth,
        ),
    }
}

fn run_analysis(
    checked: &CheckedModule,
    decl: &PresheafDecl,
    depth_override: Option<u32>,
) -> Result<NonMonotonicityReport, String> {
    let ts = &checked.signature.system;
    let (spec, root, declared_depth) = resolve_spec(decl);
    let depth = depth_override.unwrap_or(declared_depth);
    let root_id: StateId = ts
        .state(&root)
        .ok_or_else(|| format!("unknown root state `{root}`"))?;
    let presheaf =
        build_presheaf(&spec, ts, &[root_id], depth).map_err(|e| format!("build: {e}"))?;
    validate_presheaf(&presheaf, ts).map_err(|e| format!("validate: {e}"))?;
    Ok(analyze_nonmonotonicity(&presheaf, ts))
}

pub fn analyze(file: &Path, only: Option<&str>, depth: Option<u32>) -> RunOutcome {
    let name = "analyze".to_string();
    let (_, checked) = match load_checked(file) {
        Ok(ok) => ok,
        Err(LoadError::Io(msg)) => {
            return (name, Status::ParseOrIo, vec![json!({"error": msg})], vec![paint(false, &msg)])
        }
        Err(LoadError::Parse(err, msg)) => {
            return (name, Status::ParseOrIo, vec![err], vec![paint(false, &msg)])
        }
        Err(LoadError::Check(status, err, msg)) => {
            return (name, status, vec![err], vec![paint(false, &msg)])
        }
    };
    let selected: Vec<&PresheafDecl> = checked
        .presheafs
        .iter()
        .filter(|p| only.is_none_or(|n| p.name == n))
        .collect();
    if selected.is_empty() {
        let msg = match only {
            Some(n) => format!("no presheaf named `{n}` in {}", file.display()),
            None => format!("no presheaf declarations in {}", file.display()),
        };
        return (
            name,
            Status::Failure,
            vec![json!({"error": msg})],
            vec![paint(false, &msg)],
        );
    }
    let ts = &checked.signature.system;
    let mut status = Status::Ok;
    let mut items = Vec::new();
    let mut lines = Vec::new();
    for decl in selected {
        match run_analysis(&checked, decl, depth) {
            Ok(report) => {
                let rendered = report.render(ts);
                lines.push(format!(
                    "{}: {} (orphans: {}), prefixStable={}, depth {}",
                    rendered.presheaf,
                    rendered.verdict,
                    rendered.witnesses.len(),
                    rendered.prefix_stable,
                    rendered.depth
                ));
                for w in rendered.witnesses.iter().take(5) {
                    lines.push(format!("  orphan {} at {} -> {}", w.orphan, w.prefix, w.whole));
                }
                items.push(serde_json::to_value(&rendered).expect("report serializes"));
            }
            Err(msg) => {
                status = status.max(Status::Failure);
                let full = format!("{}: {msg}", decl.name);
                items.push(json!({"presheaf": decl.name, "error": msg}));
                lines.push(paint(false, &full));
            }
        }
    }
    (name, status, items, lines)
}

// ---- adequacy -----------------------------------------------------------------

pub fn adequacy(file: &Path, max_len: u32) -> RunOutcome {
    let name = "adequacy".to_string();
    let (_, checked) = match load_checked(file) {
        Ok(ok) => ok,
        Err(LoadError::Io(msg)) => {
            return (name, Status::ParseOrIo, vec![json!({"error": msg})], vec![paint(false, &msg)])
        }
        Err(LoadError::Parse(err, msg)) => {
            return (name, Status::ParseOrIo, vec![err], vec![paint(false, &msg)])
        }
        Err(LoadError::Check(status, err, msg)) => {
            return (name, status, vec![err], vec![paint(false, &msg)])
        }
    };
    let ts = &checked.signature.system;
    let roots: Vec<StateId> = ts.states().collect();
    let paths = enumerate_traces(ts, &roots, max_len as usize);
    let mut failures = Vec::new();
    for p in &paths {
        let term = reify(ts, p);
        match interp(ts, &term) {
            Ok(back) if &back == p => {}
            Ok(back) => failures.push(format!(
                "{} round-tripped to {}",
                p.display(ts),
                back.display(ts)
            )),
            Err(e) => failures.push(format!("{}: {e}", p.display(ts))),
        }
    }
    let ok = failures.is_empty();
    let line = if ok {
        format!("round-trip OK, {} paths", paths.len())
    } else {
        format!("round-trip FAILED on {} of {} paths", failures.len(), paths.len())
    };
    let item = json!({
        "file": file.display().to_string(),
        "maxLen": max_len,
        "paths": paths.len(),
        "status": if ok { "ok" } else { "failed" },
        "failures": failures,
    });
    (
        name,
        if ok { Status::Ok } else { Status::Failure },
        vec![item],
        vec![paint(ok, &line)],
    )
}

// ---- meta ---------------------------------------------------------------------

pub const CREDENTIAL_DEKL: &str = include_str!("../../../corpus/credential.dekl");
pub const MONITORING_DEKL: &str = include_str!("../../../corpus/monitoring.dekl");
pub const DEFAULTS_DEKL: &str = include_str!("../../../corpus/defaults.dekl");
pub const UNGUARDED_DEKL: &str = include_str!("../../../corpus/unguarded.dekl");
pub const PARSE_ERROR_DEKL: &str = include_str!("../../../corpus/parse_error.dekl");

fn credential_module() -> CheckedModule {
    let ast = parse_module("credential.dekl", CREDENTIAL_DEKL).expect("bundled corpus parses");
    check_module(&ast).expect("bundled corpus checks")
}

const CONSISTENCY_SIZE: usize = 8;

pub fn meta(seed: u64, iters: usize) -> RunOutcome {
    let name = "meta".to_string();
    let checked = credential_module();
    let sig = &checked.signature;
    let cfg = GenConfig {
        seed,
        iterations: iters,
        ..GenConfig::default()
    };
    let mut status = Status::Ok;
    let mut items = Vec::new();
    let mut lines = Vec::new();
    lines.push(format!("{:<22}{:>12}{:>10}", "property", "iterations", "failures"));
    for report in run_structural_suite(sig, &cfg) {
        if !report.passed() {
            status = status.max(Status::Failure);
        }
        lines.push(format!(
            "{:<22}{:>12}{:>10}",
            report.property,
            report.iterations,
            report.failures.len()
        ));
        for (i, failure) in report.failures.iter().take(3) {
            lines.push(format!("  [{i}] {failure}"));
        }
        items.push(json!({
            "type": "suite",
            "property": report.property,
            "iterations": report.iterations,
            "failures": report.failures,
        }));
    }
    let inhabitant = consistency_search(sig, CONSISTENCY_SIZE);
    let sanity = search_inhabitant(sig, 3, &Term::NatTy);
    let consistency_ok = inhabitant.is_none() && sanity == Some(Term::Zero);
    if !consistency_ok {
        status = status.max(Status::Failure);
    }
    let printed = inhabitant
        .as_ref()
        .map(|t| pretty_print(t, &Context::empty()));
    lines.push(format!(
        "consistency(<= {CONSISTENCY_SIZE}): {}",
        match &printed {
            None => paint(true, "no closed inhabitant of bot"),
            Some(t) => paint(false, &format!("INHABITED by {t}")),
        }
    ));
    lines.push(format!(
        "sanity control: Nat inhabited by {}",
        sanity
            .as_ref()
            .map(|t| pretty_print(t, &Context::empty()))
            .unwrap_or_else(|| "<nothing>".into())
    ));
    items.push(json!({
        "type": "consistency",
        "maxSize": CONSISTENCY_SIZE,
        "inhabitant": printed,
        "sanityNat": sanity.map(|t| pretty_print(&t, &Context::empty())),
    }));
    (name, status, items, lines)
}

// ---- corpus-run ---------------------------------------------------------------

struct Case {
    name: &'static str,
    expected: String,
    actual: String,
    ok: bool,
}

impl Case {
    fn new(name: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Case {
        let expected = expected.into();
        let actual = actual.into();
        let ok = expected == actual;
        Case {
            name,
            expected,
            actual,
            ok,
        }
    }
}

fn analyze_bundled(src: &'static str, file: &str, presheaf: &str) -> Result<(CheckedModule, NonMonotonicityReport), String> {
    let ast = parse_module(file, src).map_err(|e| e.to_string())?;
    let checked = check_module(&ast).map_err(|e| e.to_string())?;
    let decl = checked
        .presheafs
        .iter()
        .find(|p| p.name == presheaf)
        .ok_or_else(|| format!("missing presheaf {presheaf}"))?
        .clone();
    let report = run_analysis(&checked, &decl, None)?;
    Ok((checked, report))
}

fn verdict_with_edge(
    checked: &CheckedModule,
    report: &NonMonotonicityReport,
) -> String {
    let ts = &checked.signature.system;
    let mut edge_events: Vec<String> = report
        .witnesses
        .iter()
        .map(|(ext, _)| {
            let last = *ext.whole.edges.last().expect("non-identity extension");
            ts.event_name(ts.step(last).event).to_string()
        })
        .collect();
    edge_events.sort();
    edge_events.dedup();
    format!(
        "{} at [{}], prefixStable={}",
        report.verdict,
        edge_events.join(","),
        report.prefix_stable
    )
}

pub fn corpus_run() -> RunOutcome {
    let name = "corpus-run".to_string();
    let mut cases: Vec<Case> = Vec::new();

    // credential: checks, computes, and its presheaves behave as documented
    match parse_module("credential.dekl", CREDENTIAL_DEKL)
        .map_err(|e| e.to_string())
        .and_then(|ast| check_module(&ast).map_err(|e| e.to_string()))
    {
        Ok(checked) => {
            cases.push(Case::new("credential checks", "ok", "ok"));

            let checker = Checker::new(&checked.signature);
            let len4 = checked
                .defs
                .iter()
                .find(|d| d.name == "len4")
                .expect("len4 def");
            let value = checker
                .normalize(&len4.body)
                .map(|nf| pretty_print(&nf.term, &Context::empty()))
                .unwrap_or_else(|e| e.to_string());
            cases.push(Case::new("credential len4 normalizes", "4", value));

            match analyze_bundled(CREDENTIAL_DEKL, "credential.dekl", "Auth") {
                Ok((checked, report)) => cases.push(Case::new(
                    "credential Auth",
                    "non-monotone at [Revoke], prefixStable=false",
                    verdict_with_edge(&checked, &report),
                )),
                Err(e) => cases.push(Case::new("credential Auth", "non-monotone at [Revoke], prefixStable=false", e)),
            }
            match analyze_bundled(CREDENTIAL_DEKL, "credential.dekl", "NeverAudited") {
                Ok((_, report)) => cases.push(Case::new(
                    "credential NeverAudited",
                    "monotone-on-base, prefixStable=true",
                    format!("{}, prefixStable={}", report.verdict, report.prefix_stable),
                )),
                Err(e) => cases.push(Case::new(
                    "credential NeverAudited",
                    "monotone-on-base, prefixStable=true",
                    e,
                )),
            }
            let obs = observe_inftrace(&checked, "service", 50)
                .map(|o| format!("{} pairs ending at {}", o.steps.len(), o.last))
                .unwrap_or_else(|e| e.to_string());
            cases.push(Case::new(
                "credential service observes to depth 50",
                "50 pairs ending at Valid",
                obs,
            ));
        }
        Err(e) => cases.push(Case::new("credential checks", "ok", e)),
    }

    // monitoring: Safe loses its witness exactly at the violation edge
    match analyze_bundled(MONITORING_DEKL, "monitoring.dekl", "Safe") {
        Ok((checked, report)) => {
            cases.push(Case::new(
                "monitoring Safe",
                "non-monotone at [Viol], prefixStable=false",
                verdict_with_edge(&checked, &report),
            ));
            // localization on the bundled breached trace: edge 2 is Viol
            let ts = &checked.signature.system;
            let checker = Checker::new(&checked.signature);
            let breached = checked
                .defs
                .iter()
                .find(|d| d.name == "breached")
                .expect("breached def");
            let localized = checker
                .normalize(&breached.body)
                .map_err(|e| e.to_string())
                .and_then(|nf| interp(ts, &nf.term).map_err(|e| e.to_string()))
                .and_then(|path| {
                    let (spec, root, depth) = resolve_spec(
                        checked
                            .presheafs
                            .iter()
                            .find(|p| p.name == "Safe")
                            .expect("Safe decl"),
                    );
                    let root = ts.state(&root).expect("root state");
                    let presheaf =
                        build_presheaf(&spec, ts, &[root], depth).map_err(|e| e.to_string())?;
                    localize_index_shift(&presheaf, ts, &path, 0, &Witness::star())
                        .map_err(|e| e.to_string())
                })
                .map(|idx| format!("{idx:?}"))
                .unwrap_or_else(|e| e);
            cases.push(Case::new(
                "monitoring breached localizes",
                "Some(2)",
                localized,
            ));
        }
        Err(e) => cases.push(Case::new(
            "monitoring Safe",
            "non-monotone at [Viol], prefixStable=false",
            e,
        )),
    }

    // defaults: risk events invalidate the default; throttling flips at the
    // second grant
    match analyze_bundled(DEFAULTS_DEKL, "defaults.dekl", "CanAccess") {
        Ok((checked, report)) => cases.push(Case::new(
            "defaults CanAccess",
            "non-monotone at [Risk], prefixStable=false",
            verdict_with_edge(&checked, &report),
        )),
        Err(e) => cases.push(Case::new(
            "defaults CanAccess",
            "non-monotone at [Risk], prefixStable=false",
            e,
        )),
    }
    match analyze_bundled(DEFAULTS_DEKL, "defaults.dekl", "Throttle") {
        Ok((checked, report)) => {
            let two_grants = report.witnesses.iter().all(|(ext, _)| {
                let ts = &checked.signature.system;
                ext.whole
                    .edges
                    .iter()
                    .filter(|&&e| ts.event_name(ts.step(e).event) == "Grant")
                    .count()
                    == 2
            });
            cases.push(Case::new(
                "defaults Throttle",
                "non-monotone at second Grant",
                if report.verdict == dekl_core::Verdict::NonMonotone && two_grants {
                    "non-monotone at second Grant".to_string()
                } else {
                    format!("{}, secondGrant={two_grants}", report.verdict)
                },
            ));
        }
        Err(e) => cases.push(Case::new(
            "defaults Throttle",
            "non-monotone at second Grant",
            e,
        )),
    }

    // negative fixtures
    let unguarded = parse_module("unguarded.dekl", UNGUARDED_DEKL)
        .map_err(|e| e.to_string())
        .map(|ast| match check_module(&ast) {
            Ok(_) => "accepted".to_string(),
            Err(CheckFailure::Type(t)) => t.kind.code().to_string(),
            Err(other) => other.to_string(),
        })
        .unwrap_or_else(|e| e);
    cases.push(Case::new(
        "unguarded corec rejected",
        "UnguardedCorecursion",
        unguarded,
    ));

    let parse_failure = match parse_module("parse_error.dekl", PARSE_ERROR_DEKL) {
        Ok(_) => "accepted".to_string(),
        Err(e) => format!("{}:{}", e.span.start_line, e.span.start_col),
    };
    cases.push(Case::new("parse_error rejected", "1:11", parse_failure));

    let mut status = Status::Ok;
    let mut items = Vec::new();
    let mut lines = Vec::new();
    for case in &cases {
        if !case.ok {
            status = status.max(Status::Failure);
        }
        lines.push(format!(
            "{} {}: expected `{}`, got `{}`",
            paint(case.ok, if case.ok { "PASS" } else { "FAIL" }),
            case.name,
            case.expected,
            case.actual
        ));
        items.push(json!({
            "name": case.name,
            "expected": case.expected,
            "actual": case.actual,
            "ok": case.ok,
        }));
    }
    (name, status, items, lines)
}
