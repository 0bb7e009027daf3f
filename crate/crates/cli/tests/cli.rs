use std::path::Path;
use std::process::{Command, Output};

fn arena(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_arena"))
        .args(args)
        .output()
        .expect("spawn arena");
    assert!(
        out.status.success(),
        "arena {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_eval_and_replay_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ran = stdout(&arena(&[
        "run",
        "--policy",
        "random",
        "--seeds",
        "0..4",
        "--horizon",
        "24",
        "--out",
        out,
    ]));
    let transcripts = dir.path().join("transcripts");
    assert_eq!(std::fs::read_dir(&transcripts).unwrap().count(), 5);
    assert!(dir.path().join("random-metrics.csv").exists());

    let csv = dir.path().join("eval.csv");
    let evaluated = stdout(&arena(&[
        "eval",
        "--transcripts",
        transcripts.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(ran, evaluated);
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        std::fs::read_to_string(dir.path().join("random-metrics.csv")).unwrap()
    );

    let one = transcripts.join("random-seed0003.jsonl");
    let replayed = stdout(&arena(&["replay", "--transcript", one.to_str().unwrap()]));
    assert!(replayed.starts_with("replay ok"), "{replayed}");
}

#[test]
fn tampered_transcript_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    arena(&[
        "run",
        "--policy",
        "steward",
        "--seeds",
        "1",
        "--horizon",
        "12",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let path = dir.path().join("transcripts/steward-seed0001.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let victim = lines.iter().rposition(|l| l.contains("\"cash\"")).unwrap();
    lines[victim] = lines[victim].replacen("\"cash\":", "\"cash\":9", 1);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_arena"))
        .args(["replay", "--transcript", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn generated_scenario_is_runnable() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("short");
    arena(&[
        "gen-scenario",
        "--seed",
        "11",
        "--profile",
        "50,20,62",
        "--out",
        bundle.to_str().unwrap(),
    ]);
    for file in ["macro.csv", "industry.csv"] {
        assert!(Path::new(&bundle).join(file).exists(), "missing {file}");
    }
    let results = dir.path().join("results");
    arena(&[
        "run",
        "--scenario",
        bundle.to_str().unwrap(),
        "--policy",
        "pass_only",
        "--seeds",
        "0",
        "--out",
        results.to_str().unwrap(),
    ]);
    let t = std::fs::read_to_string(results.join("transcripts/pass_only-seed0000.jsonl")).unwrap();
    assert!(t.contains("\"scenario_id\":\"short\""));
}

#[test]
fn unknown_policy_is_an_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_arena"))
        .args(["run", "--policy", "oracle", "--seeds", "0"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown policy"));
}
