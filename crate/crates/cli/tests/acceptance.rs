//! Acceptance run: every criterion at its stated tolerance, one PASS/FAIL line each.
//! Criteria 1-9 run in process; criterion 10 runs `verify all` through the binary at
//! several worker counts and compares the bytes with the in-process report.

use std::process::Command;
use std::time::{Duration, Instant};

use quasiradial::verify::{
    closed_forms, density_pipeline, exact_identities, extension_checks, lipschitz_bounds, obstruction_witness,
    oracle_agreement, schur_blocks, shift_moduli, Check, SuiteReport, VerifyConfig,
};

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    note: String,
}

fn timed(
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    f: impl FnOnce() -> quasiradial::Result<Check>,
) -> (Outcome, Option<Check>) {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let within = limit.is_none_or(|l| elapsed <= l);
    let budget = limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
    match result {
        Ok(check) => {
            let note = format!("{:.1}s{budget}", elapsed.as_secs_f64());
            (Outcome { id, name, passed: check.passed && within, note }, Some(check))
        }
        Err(e) => (Outcome { id, name, passed: false, note: format!("error: {e}") }, None),
    }
}

fn verify_all(workers: usize) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_quasiradial"))
        .args(["verify", "all", "--seed", "1"])
        .env("WORKERS", workers.to_string())
        .output()
        .expect("binary runs");
    (out.status.code(), out.stdout)
}

#[test]
fn acceptance_criteria() {
    let cfg = VerifyConfig::default();
    let min = |m: u64| Some(Duration::from_secs(60 * m));
    let mut outcomes = Vec::new();
    let mut checks = Vec::new();
    let runs: Vec<(u32, &'static str, Option<Duration>, fn(&VerifyConfig) -> quasiradial::Result<Check>)> = vec![
        (1, "schur diagonalization", min(5), schur_blocks),
        (2, "oracle equivalence", None, oracle_agreement),
        (3, "exact identities", None, exact_identities),
        (4, "closed-form targets", None, closed_forms),
        (5, "lipschitz bound", None, lipschitz_bounds),
        (6, "extension suite", min(10), extension_checks),
        (7, "shift lemmas", None, shift_moduli),
        (8, "density pipeline", min(15), density_pipeline),
        (9, "obstruction suite", min(2), obstruction_witness),
    ];
    for (id, name, limit, f) in runs {
        let (outcome, check) = timed(id, name, limit, || f(&cfg));
        println!("criterion {:>2} {:<24} {}  {}", outcome.id, outcome.name, if outcome.passed { "PASS" } else { "FAIL" }, outcome.note);
        if !outcome.passed {
            if let Some(c) = &check {
                println!("{}", serde_json::to_string_pretty(&c.details).unwrap());
            }
        }
        outcomes.push(outcome);
        checks.extend(check);
    }

    // the in-process checks, in suite order, are what `verify all` must print
    let order = ["schur_diagonalization", "oracle_agreement", "closed_forms", "lipschitz_bounds", "exact_identities",
        "shift_moduli", "extension", "density", "obstruction"];
    let mut ordered: Vec<Check> = Vec::new();
    for name in order {
        ordered.extend(checks.iter().filter(|c| c.name == name).cloned());
    }
    let expected = SuiteReport {
        suite: "all".into(),
        seed: cfg.seed,
        passed: ordered.iter().all(|c| c.passed),
        checks: ordered,
    };
    let mut expected_bytes = expected.to_json().into_bytes();
    expected_bytes.push(b'\n');

    let reports: Vec<(usize, Option<i32>, Vec<u8>)> =
        [1, 4, 16].into_iter().map(|w| { let (code, out) = verify_all(w); (w, code, out) }).collect();
    let identical = reports.iter().all(|r| r.2 == reports[0].2);
    let matches_in_process = reports[0].2 == expected_bytes;
    let codes: Vec<String> = reports.iter().map(|r| format!("{}:{:?}", r.0, r.1)).collect();
    let determinism = identical && matches_in_process && !reports[0].2.is_empty();
    println!(
        "criterion 10 {:<24} {}  workers {} identical={identical} in_process={matches_in_process}",
        "determinism",
        if determinism { "PASS" } else { "FAIL" },
        codes.join(" "),
    );
    outcomes.push(Outcome { id: 10, name: "determinism", passed: determinism, note: String::new() });

    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| format!("{} ({})", o.id, o.name)).collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
