// SPDX-License-Identifier: Apache-2.0

mod common;

use std::fs;
use std::process::{Command, Output};

fn drohs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drohs")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn check_model_passes_on_case14() {
    let o = drohs(&["check-model", "--case", common::case_path("case14").to_str().unwrap()]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{out}");
    assert!(out.contains("all rank checks pass"));
    assert_eq!(out.lines().filter(|l| l.ends_with(" ok")).count(), 14);
}

#[test]
fn compare_reference_with_itself() {
    let r = common::reference_path("case9");
    let r = r.to_str().unwrap();
    let o = drohs(&["compare", "--result", r, "--reference", r]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("distance        0.000e0"));
}

#[test]
fn compare_distant_solution_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = common::reference("case9");
    s.v_re.iter_mut().for_each(|v| *v *= 0.9);
    let p = dir.path().join("far.json");
    drohs::io::save_solution(&p, &s).unwrap();
    let o = drohs(&["compare", "--result", p.to_str().unwrap(), "--reference", common::reference_path("case9").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn compare_schema_mismatch_exits_1() {
    let o = drohs(&[
        "compare",
        "--result",
        common::reference_path("case9").to_str().unwrap(),
        "--reference",
        common::reference_path("case14").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema mismatch"));
}

#[test]
fn bad_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"name\": 3}").unwrap();
    assert_eq!(code(&drohs(&["run", "--case", bad.to_str().unwrap()])), 1);
    assert_eq!(code(&drohs(&["run", "--case", "/nonexistent/case.json"])), 1);
    let case9 = common::case_path("case9");
    assert_eq!(code(&drohs(&["run", "--case", case9.to_str().unwrap(), "--start", "lukewarm"])), 1);
    assert_eq!(code(&drohs(&["run", "--case", case9.to_str().unwrap(), "--a", "1.5"])), 1);
    assert_eq!(code(&drohs(&["frobnicate"])), 1);
}

#[test]
fn bench_with_no_cases_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let pat = format!("{}/*.json", dir.path().display());
    let o = drohs(&["bench", "--cases", &pat]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no case matches"));
}

#[test]
fn bench_prints_one_row_per_run() {
    let pat = common::root().join("fixtures/cases/case[34].json");
    let o = drohs(&["bench", "--cases", pat.to_str().unwrap(), "--max-iter", "2", "--repeat", "2"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], drohs::driver::BENCH_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("case3,3,"));
}

#[test]
fn unconverged_run_exits_2_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let trace = dir.path().join("t.csv");
    let o = drohs(&[
        "run",
        "--case",
        common::case_path("case9").to_str().unwrap(),
        "--max-iter",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("status      max_iter"));
    let s = drohs::io::load_solution(&out).unwrap();
    assert_eq!(s.iterations, Some(3));
    let t = fs::read_to_string(&trace).unwrap();
    assert_eq!(t.lines().next().unwrap(), drohs::io::TRACE_HEADER);
    assert_eq!(t.lines().count(), 4);
}

#[test]
fn traces_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let case = common::case_path("case14");
    let mut traces = Vec::new();
    for workers in ["1", "8"] {
        let t = dir.path().join(format!("t{workers}.csv"));
        let r = dir.path().join(format!("r{workers}.json"));
        let o = drohs(&[
            "run",
            "--case",
            case.to_str().unwrap(),
            "--start",
            "cold",
            "--seed",
            "5",
            "--max-iter",
            "8",
            "--workers",
            workers,
            "--trace",
            t.to_str().unwrap(),
            "--out",
            r.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 2);
        traces.push((fs::read(&t).unwrap(), fs::read(&r).unwrap()));
    }
    assert_eq!(traces[0], traces[1]);
}
