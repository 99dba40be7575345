use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use probsum_core::scm::parse_scm;
use probsum_core::semantics::satisfies_sequent;
use probsum_core::syntax::{parse_sequent, Signature};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn probsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probsum")).current_dir(root()).args(args).output().expect("runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn eval_prints_both_sides_and_validity() {
    let o = probsum(&["eval", "--model", "corpus/models/frontdoor.scm", "--formula", "corpus/formulas/concl.fml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("lhs = ") && out.contains("rhs = "));
    assert!(out.contains("valid in model: true"));
}

#[test]
fn eval_trace_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let o = probsum(&[
        "-q",
        "eval",
        "--model",
        "corpus/models/frontdoor.scm",
        "--formula",
        "corpus/formulas/concl.fml",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).expect("each trace line is JSON");
    }
}

#[test]
fn sat_witness_reloads_and_satisfies() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("s.seq");
    let text = "|- P(X=c1) == 1/2 & P(Y=c1 | X=c1) > P(Y=c1)";
    std::fs::write(&seq, format!("# small instance\n{}\n", text)).unwrap();
    let model = dir.path().join("w.scm");
    let o = probsum(&["sat", seq.to_str().unwrap(), "--n", "2", "--denom", "4", "--out", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("SAT"));
    let m = parse_scm(&std::fs::read_to_string(&model).unwrap()).unwrap();
    m.validate().unwrap();
    let s = parse_sequent(text, &Signature::unbounded(&["X", "Y"]).unwrap()).unwrap();
    assert!(satisfies_sequent(&m, &s).unwrap());

    let o = probsum(&["entail-check", "--model", model.to_str().unwrap(), seq.to_str().unwrap()]);
    assert!(stdout(&o).contains("satisfied: true"), "{}", stdout(&o));
}

#[test]
fn unsat_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("u.seq");
    std::fs::write(&seq, "|- P(X=c1) > 1/2 & P(X=c1) < 1/2\n").unwrap();
    let o = probsum(&["sat", seq.to_str().unwrap(), "--n", "2", "--denom", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("UNSAT"));
}

#[test]
fn prove_sum_eq_2_verifies() {
    let o = probsum(&["prove", "--system", "AX_2", "corpus/sum_eq_2.prf"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("verified"), "{}", stdout(&o));
}

#[test]
fn prove_rejection_still_exits_zero() {
    let o = probsum(&["prove", "--system", "AX", "corpus/sum_eq_2.prf"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).starts_with("verified"));
}

#[test]
fn corpus_only_runs_one_scenario() {
    let o = probsum(&["corpus", "--only", "proofs"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("[PASS] 8."), "{}", out);
    assert_eq!(out.matches("[PASS]").count() + out.matches("[FAIL]").count(), 1);
}

#[test]
fn corrupted_corpus_names_the_failure() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(root().join("corpus")).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) == Some("prf") {
            std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    let target = dir.path().join("sum_eq_2.prf");
    let text = std::fs::read_to_string(&target).unwrap().replace("P(T) == 2 BY axiom Fin_N", "P(T) == 3 BY axiom Fin_N");
    std::fs::write(&target, text).unwrap();
    let o = probsum(&["corpus", "--only", "proofs", "--corpus-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("[FAIL] 8."), "{}", stdout(&o));
    assert!(stderr(&o).contains("corpus proofs"), "{}", stderr(&o));
}

#[test]
fn exit_codes() {
    assert_eq!(probsum(&["--help"]).status.code(), Some(0));
    assert_eq!(probsum(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(probsum(&["eval", "--model", "missing.scm", "--formula", "missing.fml"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("valid.seq");
    std::fs::write(&seq, "|- P(X=c1) >= 0\n").unwrap();
    let o = probsum(&["find-countermodel", seq.to_str().unwrap(), "--trials", "20"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn countermodel_is_found_for_an_invalid_sequent() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("bad.seq");
    std::fs::write(&seq, "|- P(X=c1) >= 1/2\n").unwrap();
    let o = probsum(&["find-countermodel", seq.to_str().unwrap(), "--trials", "200", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("countermodel found"));
}

#[test]
fn json_summary_is_deterministic() {
    let run = || {
        let o = probsum(&["--json", "-", "fuzz-soundness", "--trials", "50", "--seed", "9"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        stdout(&o)
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "fuzz-soundness");
}

#[test]
fn circuit_encode_then_decode() {
    let dir = tempfile::tempdir().unwrap();
    let ckt = dir.path().join("t.ckt");
    let o = probsum(&["-q", "--json", ckt.with_extension("json").to_str().unwrap(), "circuit", "encode", "corpus/etr/sum_product.sexp"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ckt.with_extension("json")).unwrap()).unwrap();
    std::fs::write(&ckt, v["netlist"].as_str().unwrap()).unwrap();
    let w = v["width"].as_u64().unwrap().to_string();
    let o = probsum(&["circuit", "decode", ckt.to_str().unwrap(), "--width", &w]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let original = probsum(&["print", "corpus/etr/sum_product.sexp"]);
    assert!(stdout(&o).starts_with(stdout(&original).trim_end()));
}

#[test]
fn print_round_trips_a_model() {
    let a = stdout(&probsum(&["print", "corpus/models/frontdoor.scm"]));
    let b = std::fs::read_to_string(root().join("corpus/models/frontdoor.scm")).unwrap();
    assert_eq!(a, b);
}
