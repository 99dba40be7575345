use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use probsum_core::circuits::{decode_etr, encode_etr, etr_corpus, min_width, parse_sexpr, EtrTree};
use probsum_core::grounding::{unfold_sums, universal_closure, GroundingContext};
use probsum_core::proofs::{check_script, corpus_entry, System, DEFAULT_N_MAX};
use probsum_core::sat::{sat_bounded, SatConfig};
use probsum_core::scenarios::{frontdoor_signature, FRONTDOOR_CONCLUSION};
use probsum_core::scm::parse_scm;
use probsum_core::semantics::valid_in_model;
use probsum_core::syntax::{parse_formula, parse_sequent, Signature};

const FRONTDOOR_MODEL: &str = include_str!("../../../corpus/models/frontdoor.scm");

fn parsing(c: &mut Criterion) {
    let sig = frontdoor_signature();
    c.bench_function("parse frontdoor conclusion", |b| {
        b.iter(|| parse_formula(black_box(FRONTDOOR_CONCLUSION), &sig).unwrap())
    });
}

fn evaluation(c: &mut Criterion) {
    let m = parse_scm(FRONTDOOR_MODEL).unwrap();
    let f = parse_formula(FRONTDOOR_CONCLUSION, &frontdoor_signature()).unwrap();
    c.bench_function("eval frontdoor conclusion", |b| b.iter(|| valid_in_model(black_box(&m), &f).unwrap()));
}

fn grounding(c: &mut Criterion) {
    let sig = Signature::bounded(&["X", "Y"], 4).unwrap();
    let f = parse_formula("sum x1 . sum y1 . P(X=x1 & Y=y1) == 1", &sig).unwrap();
    let mut group = c.benchmark_group("ground nested sum");
    for n in [2u32, 3, 4] {
        let ctx = GroundingContext::new(n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &ctx, |b, ctx| {
            b.iter(|| unfold_sums(&universal_closure(black_box(&f), ctx).unwrap(), ctx).unwrap())
        });
    }
    group.finish();
}

fn satisfiability(c: &mut Criterion) {
    let sig = Signature::bounded(&["X", "Y"], 2).unwrap();
    let s = parse_sequent("|- P(X=c1) == 1/2 & P(Y=c1 | X=c1) > P(Y=c1)", &sig).unwrap();
    let cfg = SatConfig::new(2, 4);
    let mut group = c.benchmark_group("sat");
    group.sample_size(10);
    group.bench_function("dependence at n=2, D=4", |b| b.iter(|| sat_bounded(black_box(&s), &cfg).unwrap()));
    group.finish();
}

fn proofs(c: &mut Criterion) {
    let e = corpus_entry("sum_eq_2").unwrap();
    let sys = System::parse(e.system, e.n).unwrap();
    c.bench_function("check sum_eq_2", |b| b.iter(|| check_script(black_box(e.text), &sys, DEFAULT_N_MAX).unwrap()));
}

fn circuits(c: &mut Criterion) {
    let mut group = c.benchmark_group("etr decode");
    for (name, text) in etr_corpus() {
        let t = EtrTree::from_expr(&parse_sexpr(text).unwrap());
        let w = min_width(&t);
        let ckt = encode_etr(&t, w).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(name), &ckt, |b, ckt| {
            b.iter(|| decode_etr(black_box(ckt), w).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, parsing, evaluation, grounding, satisfiability, proofs, circuits);
criterion_main!(benches);
