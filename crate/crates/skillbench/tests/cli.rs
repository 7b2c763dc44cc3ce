mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use skillbench_core::{SkillSpan, VacancyId, VacancyRecord};
use support::*;

fn run(args: &[&str]) -> Output {
    Command::new(cli_bin()).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> String {
    path_arg(path)
}

#[test]
fn validate_clean_duplicate_and_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let clean = write_corpus(dir.path(), &synthetic_corpus(5, 1));
    let o = run(&["validate", "--dataset", &p(&clean)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 warning(s)"));

    let dup = dir.path().join("dup.json");
    fs::write(&dup, r#"[{"id": 7, "desc": "a"}, {"id": 7, "desc": "b"}]"#).unwrap();
    let o = run(&["validate", "--dataset", &p(&dup)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("duplicate vacancy id 7"),
        "{}",
        stderr(&o)
    );

    let mut recs = synthetic_corpus(3, 2);
    for r in recs.iter_mut().take(2) {
        r.values[0].skill.push_str(" (edited)");
    }
    let mism = dir.path().join("mism.json");
    skillbench::dataset::save_dataset(&mism, &recs).unwrap();
    let o = run(&["validate", "--dataset", &p(&mism)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stderr(&o).matches("warning:").count(), 2, "{}", stderr(&o));

    let oob = dir.path().join("oob.json");
    let bad = VacancyRecord {
        id: VacancyId::Int(1),
        title: String::new(),
        desc: "short".into(),
        values: vec![SkillSpan::new(2, 40, "x")],
    };
    skillbench::dataset::save_dataset(&oob, &[bad]).unwrap();
    assert_eq!(
        run(&["validate", "--dataset", &p(&oob)]).status.code(),
        Some(1)
    );
}

#[test]
fn score_gold_unknown_and_missing() {
    let dir = tempfile::tempdir().unwrap();
    let recs = synthetic_corpus(6, 3);
    let data = write_corpus(dir.path(), &recs);
    let gold: Vec<(VacancyId, Vec<String>)> = recs
        .iter()
        .map(|r| {
            (
                r.id.clone(),
                r.values.iter().map(|v| v.skill.clone()).collect(),
            )
        })
        .collect();
    let preds = dir.path().join("gold.jsonl");
    write_prediction_file(&preds, &gold);
    let out = dir.path().join("out");
    let o = run(&[
        "score",
        "--dataset",
        &p(&data),
        "--predictions",
        &p(&preds),
        "--out",
        &p(&out),
        "--details",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let board = fs::read_to_string(out.join("leaderboard.csv")).unwrap();
    assert_eq!(
        board.lines().nth(2).unwrap(),
        "predictions,1.00,1.00,1.00,1.00,1.00"
    );
    assert_eq!(
        fs::read_to_string(out.join("details_predictions.jsonl"))
            .unwrap()
            .lines()
            .count(),
        6
    );

    let unknown = dir.path().join("unknown.jsonl");
    let mut with_unknown = gold.clone();
    with_unknown.push((VacancyId::Text("ghost-42".into()), vec!["x".into()]));
    write_prediction_file(&unknown, &with_unknown);
    let o = run(&[
        "score",
        "--dataset",
        &p(&data),
        "--predictions",
        &p(&unknown),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ghost-42"), "{}", stderr(&o));

    let partial = dir.path().join("partial.jsonl");
    write_prediction_file(&partial, &gold[1..]);
    let o = run(&[
        "score",
        "--dataset",
        &p(&data),
        "--predictions",
        &p(&partial),
        "--aggregation",
        "micro",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stderr(&o).contains(&format!("no prediction for vacancy {}", recs[0].id)),
        "{}",
        stderr(&o)
    );
    assert!(stdout(&o).contains("precision=1 "), "{}", stdout(&o));
}

#[test]
fn flags_are_validated() {
    let o = run(&[
        "score",
        "--dataset",
        "x.json",
        "--predictions",
        "y.jsonl",
        "--matcher",
        "fuzzy",
    ]);
    assert_eq!(o.status.code(), Some(2), "clap usage errors exit 2");
    let o = run(&[
        "score",
        "--dataset",
        "x.json",
        "--predictions",
        "y.jsonl",
        "--threshold",
        "1.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--threshold"), "{}", stderr(&o));
}

#[test]
fn evaluate_with_config_and_adapter_files() {
    let dir = tempfile::tempdir().unwrap();
    let recs = synthetic_corpus(8, 4);
    let data = write_corpus(dir.path(), &recs);
    let oracle = mock_manifest("oracle", &["--mode", "oracle", "--dataset", &p(&data)]);
    let empty = mock_manifest("empty", &["--mode", "empty"]);
    let oracle_file = dir.path().join("oracle.json");
    fs::write(&oracle_file, serde_json::to_string(&oracle).unwrap()).unwrap();
    let empty_file = dir.path().join("empty.toml");
    fs::write(&empty_file, toml::to_string(&empty).unwrap()).unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "dataset = \"dataset.json\"\naggregation = \"micro\"\nseed = 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let adapters = format!("{},{}", p(&oracle_file), p(&empty_file));
    let o = run(&[
        "evaluate",
        "--config",
        &p(&config),
        "--adapters",
        &adapters,
        "--out",
        &p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let board = fs::read_to_string(out.join("leaderboard.csv")).unwrap();
    let lines: Vec<&str> = board.lines().collect();
    assert!(
        lines[0].starts_with("# threshold=0.85 matcher=exact aggregation=micro accuracy=jaccard")
    );
    assert!(lines[0].contains("seed=3"));
    assert_eq!(lines[2], "oracle,1.00,1.00,1.00,1.00,1.00");
    assert_eq!(lines[3], "empty,0.00,0.00,0.00,0.00,0.50");
    for f in [
        "leaderboard.md",
        "leaderboard_raw.csv",
        "efficiency.csv",
        "efficiency.md",
        "costs.csv",
        "scatter_time.csv",
        "scatter_time.svg",
        "run_manifest.json",
        "predictions_oracle.jsonl",
        "predictions_empty.jsonl",
    ] {
        let body = fs::read_to_string(out.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        assert!(
            f.starts_with("predictions_") || body.contains("threshold"),
            "{f} lacks the fingerprint"
        );
    }
    assert!(
        !out.join("scatter_size.csv").exists(),
        "no model has a size"
    );
    assert!(stderr(&o).contains("scatter size"), "{}", stderr(&o));
}
