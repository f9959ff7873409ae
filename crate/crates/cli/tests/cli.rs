use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CORPUS: &str = "\
EU B-ORG\nrejects O\nGerman B-MISC\ncall O\n\n\
Peter B-PER\nBlackburn I-PER\n\n\
BRUSSELS B-LOC\n1996-08-22 O\n\n\
Germany B-LOC\nbeat O\nEngland B-LOC\n";

fn dsner(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsner"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn setup() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.conll");
    std::fs::write(&path, CORPUS).unwrap();
    let p = path.display().to_string();
    (dir, p)
}

#[test]
fn identical_files_audit_to_identity() {
    let (dir, corpus) = setup();
    let out = dir.path().join("audit");
    let r = dsner(&out, &["audit", "--noisy", &corpus, "--gold", &corpus]);
    assert!(r.status.success());
    let report = json(&out.join("audit.json"));
    assert_eq!(report["direct"]["f1"], 1.0);
    assert_eq!(report["areas"]["uep"], 0);
    assert_eq!(report["areas"]["nep"], 0);
    let csv = std::fs::read_to_string(out.join("matrix.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    // O has no span-level units; every entity row is 100 on the diagonal.
    assert!(rows[0].ends_with(",1"));
    for (i, row) in rows.iter().enumerate().skip(1) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[i + 1], "100.00", "{row}");
    }
}

#[test]
fn mask_extremes() {
    let (dir, corpus) = setup();
    let zero = dir.path().join("p0");
    assert!(dsner(&zero, &["mask", "--input", &corpus, "--prob", "0", "--seed", "1"]).status.success());
    let text = std::fs::read_to_string(zero.join("masked.conll")).unwrap();
    assert!(text.lines().filter(|l| !l.is_empty()).all(|l| {
        let c: Vec<&str> = l.split(' ').collect();
        c[1] == c[2]
    }));
    let one = dir.path().join("p1");
    assert!(dsner(&one, &["mask", "--input", &corpus, "--prob", "1", "--seed", "1"]).status.success());
    let text = std::fs::read_to_string(one.join("masked.conll")).unwrap();
    assert!(text.lines().filter(|l| !l.is_empty()).all(|l| l.split(' ').nth(1) == Some("O")));
}

#[test]
fn eval_extremes() {
    let (dir, corpus) = setup();
    let same = dir.path().join("same");
    assert!(dsner(&same, &["eval", "--gold", &corpus, "--pred", &corpus]).status.success());
    assert_eq!(json(&same.join("eval.json"))["f1"], 1.0);

    let all_o: String = CORPUS
        .lines()
        .map(|l| l.split(' ').next().filter(|w| !w.is_empty()).map_or(String::from("\n"), |w| format!("{w} O\n")))
        .collect();
    let pred = dir.path().join("o.conll");
    std::fs::write(&pred, all_o).unwrap();
    let none = dir.path().join("none");
    assert!(dsner(&none, &["eval", "--gold", &corpus, "--pred", &pred.display().to_string()]).status.success());
    let report = json(&none.join("eval.json"));
    assert_eq!(report["f1"], 0.0);
    assert_eq!(report["tp"], 0);
}

#[test]
fn every_select_combination_runs() {
    let (dir, corpus) = setup();
    for strategy in ["rbc", "rbnr", "both"] {
        for level in ["span", "sentence"] {
            let out = dir.path().join(format!("{strategy}-{level}"));
            let r = dsner(
                &out,
                &[
                    "select", "--train", &corpus, "--strategy", strategy, "--level", level, "--k", "2", "--seed", "3",
                    "--set", "epochs=1", "--set", "hidden_dim=8", "--set", "embed_dim=4",
                ],
            );
            assert!(r.status.success(), "{strategy}/{level}: {}", String::from_utf8_lossy(&r.stderr));
            assert!(out.join("prune.jsonl").exists() && out.join("joint.json").exists());
        }
    }
}

#[test]
fn error_exit_codes() {
    let (dir, corpus) = setup();
    let out = dir.path().join("err");
    let missing = dsner(&out, &["eval", "--gold", "/nonexistent/gold.conll", "--pred", &corpus]);
    assert_eq!(missing.status.code(), Some(2));
    let err: Value = serde_json::from_slice(missing.stderr.trim_ascii()).unwrap();
    assert_eq!(err["exit_code"], 2);

    let ragged = dir.path().join("ragged.conll");
    std::fs::write(&ragged, "a B-PER\nb O extra junk\n").unwrap();
    let r = dsner(&out, &["mask", "--input", &ragged.display().to_string(), "--prob", "0.5", "--seed", "1"]);
    assert_eq!(r.status.code(), Some(2));

    let no_seed = dsner(&out, &["mask", "--input", &corpus, "--prob", "0.5"]);
    assert_eq!(no_seed.status.code(), Some(2));

    let bad_key = dsner(&out, &["--set", "colour=red", "mask", "--input", &corpus, "--prob", "0.5"]);
    assert_eq!(bad_key.status.code(), Some(2));
}

#[test]
fn training_abort_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("same.conll");
    std::fs::write(&corpus, "x B-A\ny O\n\n".repeat(6)).unwrap();
    let r = dsner(
        &dir.path().join("out"),
        &[
            "train", "--train", &corpus.display().to_string(), "--seed", "1",
            "--set", "epochs=2", "--set", "context_window=0", "--set", "npe_min_support=1",
            "--set", "hidden_dim=8", "--set", "embed_dim=4",
        ],
    );
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn dump_config_reflects_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 5\nepochs = 3\nlambda = 0.5\n").unwrap();
    let r = Command::new(env!("CARGO_BIN_EXE_dsner"))
        .args(["--config", &cfg.display().to_string(), "--set", "epochs=4", "--seed", "9", "--dump-config", "train", "--no-npe"])
        .output()
        .unwrap();
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    for line in ["seed = 9", "epochs = 4", "lambda = 0.5", "npe = false", "ues = true"] {
        assert!(text.lines().any(|l| l == line), "missing {line:?} in\n{text}");
    }
}
