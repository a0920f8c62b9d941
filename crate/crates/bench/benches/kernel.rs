use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use dekl_core::meta::{generate_well_typed, GenConfig};
use dekl_core::presheaf::PresheafSpec;
use dekl_core::{
    analyze_nonmonotonicity, build_presheaf, check_module, parse_module, reify, witness_path,
    Checker, StateId, Term, TransitionSystem,
};

const CREDENTIAL: &str = include_str!("../../../corpus/credential.dekl");

/// A chain of `n` states with a skip edge every third state.
fn chain_system(n: u32) -> TransitionSystem {
    let mut ts = TransitionSystem::new();
    for i in 0..n {
        ts.add_state(format!("S{i}"));
    }
    ts.add_event("Next");
    ts.add_event("Skip");
    for i in 0..n - 1 {
        ts.add_step(&format!("S{i}"), "Next", &format!("S{}", i + 1), format!("n{i}"))
            .unwrap();
    }
    for i in (0..n.saturating_sub(3)).step_by(3) {
        ts.add_step(&format!("S{i}"), "Skip", &format!("S{}", i + 3), format!("k{i}"))
            .unwrap();
    }
    ts
}

fn bench_check_module(c: &mut Criterion) {
    let ast = parse_module("credential.dekl", CREDENTIAL).unwrap();
    c.bench_function("check_module/credential", |b| {
        b.iter(|| check_module(black_box(&ast)).unwrap())
    });
}

fn bench_normalize_length(c: &mut Criterion) {
    let ast = parse_module("credential.dekl", CREDENTIAL).unwrap();
    let checked = check_module(&ast).unwrap();
    let checker = Checker::new(&checked.signature);
    // length of a 64-step trace through the use self-loop
    let mut trace = Term::step(
        Term::nil(Term::state("Init")),
        Term::event("Issue"),
        Term::witness("w_issue"),
    );
    for _ in 0..63 {
        trace = Term::step(trace, Term::event("Use"), Term::witness("w_use"));
    }
    let motive = Term::lam(Term::lam(Term::NatTy));
    let step_case = Term::lam(Term::lam(Term::lam(Term::lam(Term::lam(Term::lam(
        Term::succ(Term::var(0)),
    ))))));
    let elim = Term::trace_elim(motive, Term::Zero, step_case, trace);
    c.bench_function("normalize/trace_length_64", |b| {
        b.iter(|| checker.normalize(black_box(&elim)).unwrap())
    });
}

fn bench_witness_path(c: &mut Criterion) {
    let ts = chain_system(64);
    let s0 = ts.state("S0").unwrap();
    let last = ts.state("S63").unwrap();
    c.bench_function("witness_path/chain64", |b| {
        b.iter(|| witness_path(black_box(&ts), s0, last).unwrap().unwrap())
    });
    c.bench_function("reify/chain64", |b| {
        let p = witness_path(&ts, s0, last).unwrap().unwrap();
        b.iter(|| reify(black_box(&ts), black_box(&p)))
    });
}

fn bench_presheaf_analysis(c: &mut Criterion) {
    let ast = parse_module("credential.dekl", CREDENTIAL).unwrap();
    let checked = check_module(&ast).unwrap();
    let ts = &checked.signature.system;
    let root: Vec<StateId> = vec![ts.state("Init").unwrap()];
    let spec = PresheafSpec::Evidence {
        name: "Auth".into(),
        issue: "Issue".into(),
        revoke: "Revoke".into(),
    };
    c.bench_function("presheaf/build_analyze_auth_depth5", |b| {
        b.iter(|| {
            let p = build_presheaf(black_box(&spec), ts, &root, 5).unwrap();
            analyze_nonmonotonicity(&p, ts)
        })
    });
}

fn bench_generator(c: &mut Criterion) {
    let ast = parse_module("credential.dekl", CREDENTIAL).unwrap();
    let checked = check_module(&ast).unwrap();
    let cfg = GenConfig::default();
    c.bench_function("meta/generate_well_typed", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i = i.wrapping_add(1);
            generate_well_typed(black_box(&checked.signature), &cfg, i % 10_000).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_check_module,
    bench_normalize_length,
    bench_witness_path,
    bench_presheaf_analysis,
    bench_generator
);
criterion_main!(benches);
