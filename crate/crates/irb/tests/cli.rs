//! Integration tests that drive the compiled binary end to end.

use irb::cli::scenario::{builtin, parse_config, BUILTIN_NAMES};
use std::path::Path;
use std::process::{Command, Output};

fn irb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irb"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited with a code")
}

const FAST_EXA: &str = "\
[domain]
a = 0
b = 1
nx = 65

[time]
n = 2
nt = 32

[maps]
base1 = x/2
base2 = x/2 + 1/2

[q]
expr = ge(x, 2 - t)

[s]
expr = 1/2*x*(t - 1)

[run]
tol = 1e-5
kmax = 30
";

#[test]
fn scenario_list_prints_all_builtins() {
    let out = irb().args(["scenario", "list"]).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), BUILTIN_NAMES.len());
    for name in BUILTIN_NAMES {
        assert!(lines.contains(&name), "missing {name} in {lines:?}");
    }
}

#[test]
fn scenario_dump_reparses_to_the_builtin() {
    let out = irb().args(["scenario", "dump", "parabola"]).output().unwrap();
    assert_eq!(code(&out), 0);
    let sc = parse_config(&stdout(&out), "parabola").unwrap();
    assert_eq!(sc, builtin("parabola").unwrap());

    let out = irb().args(["scenario", "dump", "nope"]).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("error:"));
}

#[test]
fn run_builtin_with_overrides_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = irb()
        .args(["run", "exa1", "--nt", "128", "--nx", "257", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("certificate: bounded"), "stdout: {text}");
    assert!(text.contains("(converged)"), "stdout: {text}");

    let csv = std::fs::read_to_string(dir.path().join("exa1.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("x,f0,f1"), "csv header: {header}");

    let svg = std::fs::read_to_string(dir.path().join("exa1.svg")).unwrap();
    assert!(svg.contains("viewBox=\"0 0 800 600\""));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("exa1-report.json")).unwrap())
            .unwrap();
    assert_eq!(report["certificate"]["s"], 0.5);
    assert_eq!(report["scenario"]["nx"], 257);
    assert_eq!(report["scenario"]["nt"], 128);
    assert_eq!(report["converged"], true);
}

#[test]
fn run_config_file_uses_stem_for_default_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("custom.ini");
    std::fs::write(&cfg, FAST_EXA).unwrap();
    let out_dir = dir.path().join("out");
    let out = irb()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(out_dir.join("custom.csv").exists());
    assert!(out_dir.join("custom-report.json").exists());
    // no [output] svg key, so none is written
    assert!(!out_dir.join("custom.svg").exists());
}

#[test]
fn certify_pass_and_fail_exit_codes() {
    let out = irb().args(["certify", "parabola"]).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let cert: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cert["type"], "bounded");
    assert_eq!(cert["pass"], true);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("identity.ini");
    std::fs::write(
        &cfg,
        "[domain]\na = 0\nb = 1\nnx = 65\n\n[time]\nn = 2\nnt = 32\n\n\
         [maps]\nexpr = x\n\n[q]\nexpr = 0\n\n[s]\nexpr = 1\n\n[run]\nkmax = 3\n",
    )
    .unwrap();
    let out = irb().arg("certify").arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    let cert: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cert["pass"], false);
    assert_eq!(cert["criterion"], 1.0);

    // run on the same config solves anyway but signals the failed certificate
    let out = irb()
        .arg("run")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn run_exits_1_when_out_of_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("slow.ini");
    std::fs::write(&cfg, FAST_EXA.replace("kmax = 30", "kmax = 2")).unwrap();
    let out = irb()
        .arg("run")
        .arg(&cfg)
        .arg("--tol")
        .arg("1e-12")
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("not converged"));
}

#[test]
fn usage_errors_exit_1_with_messages() {
    let out = irb().args(["run", "no-such-thing"]).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no such config file or builtin"));

    let out = irb().args(["run", "exa1", "--nt", "7"]).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("multiple of 2 (n-1)"));

    let out = irb().args(["run", "exa1", "--tol=-1"]).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("must be positive"));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    std::fs::write(&cfg, "[domain]\na = 0\nb = 1\nbadkey = 1\nnx = 65\n").unwrap();
    let out = irb().arg("certify").arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(
        err.contains("line 4") && err.contains("badkey"),
        "stderr: {err}"
    );
}

#[test]
fn embed_and_approx_subcommands() {
    let out = irb()
        .args(["embed-rb", "parabola", "--nt", "64", "--functions", "3"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("max discrepancy"), "stdout: {text}");
    assert_eq!(text.lines().filter(|l| l.starts_with('f')).count(), 3);

    let out = irb()
        .args(["approx-rb", "parabola", "--k", "4,8", "--nt", "64"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("non-uniformity probe"), "stdout: {text}");

    // formula-based q/s cannot form a finite-sum triple
    let out = irb().args(["embed-rb", "exa1"]).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("base-list"));

    let out = irb().args(["approx-rb", "parabola", "--k", "1"]).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains(">= 2"));
}

fn run_exa1_csv(dir: &Path, threads: &str) -> Vec<u8> {
    let out_dir = dir.join(format!("t{threads}"));
    let out = irb()
        .args(["run", "exa1", "--nt", "128", "--nx", "257", "--out-dir"])
        .arg(&out_dir)
        .env("IRB_THREADS", threads)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    std::fs::read(out_dir.join("exa1.csv")).unwrap()
}

#[test]
fn results_are_bitwise_stable_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let single = run_exa1_csv(dir.path(), "1");
    let quad = run_exa1_csv(dir.path(), "4");
    assert_eq!(single, quad, "CSV output depends on the thread count");

    let out = irb()
        .args(["scenario", "list"])
        .env("IRB_THREADS", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("IRB_THREADS"));
}
