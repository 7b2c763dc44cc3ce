//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod support;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skillbench::adapter::{run_adapter, RecordOutcome};
use skillbench::config::RunConfig;
use skillbench::pipeline::{cmd_evaluate, score_records, EvaluateOptions, EXIT_OK};
use skillbench_core::{
    accuracy, aggregate, compute_cost, detection_auc, gold_skills, match_exact, match_greedy,
    precision_recall_f1, score_vacancy, AccuracyMode, Aggregation, ConfusionCounts, EmbedError,
    Embedder, EmbedderDescriptor, EmbeddingVector, ExtractionResponse, MockEmbedder, Pricing,
    ScoringConfig, SimilarityMatrix, Threshold, UsageRecord, VacancyId,
};
use support::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn oracle_identity() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let records = synthetic_corpus(200, 7);
    let data = write_corpus(dir.path(), &records);
    let mut notes = Vec::new();
    for aggregation in [Aggregation::Micro, Aggregation::Macro] {
        let cfg = RunConfig {
            dataset: Some(data.clone()),
            adapters: vec![mock_manifest(
                "oracle",
                &["--mode", "oracle", "--dataset", &path_arg(&data)],
            )],
            aggregation,
            out: dir.path().join(format!("out-{}", aggregation.as_str())),
            ..RunConfig::default()
        };
        let start = Instant::now();
        let run = cmd_evaluate(&cfg, EvaluateOptions::default());
        let elapsed = start.elapsed().as_secs_f64();
        ensure(
            run.report.code == EXIT_OK,
            format!("exit {}: {:?}", run.report.code, run.report.messages),
        )?;
        let m = &run.results[0].metrics;
        ensure(
            (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0),
            format!(
                "{}: P={} R={} F1={}",
                aggregation.as_str(),
                m.precision,
                m.recall,
                m.f1
            ),
        )?;
        ensure(
            run.results[0].evaluated == 200,
            "not every record was scored",
        )?;
        ensure(
            elapsed < 5.0,
            format!("{}: {elapsed:.2}s", aggregation.as_str()),
        )?;
        notes.push(format!("{} {elapsed:.2}s", aggregation.as_str()));
    }
    Ok(format!(
        "200 records, P=R=F1=1 exactly; {}",
        notes.join(", ")
    ))
}

fn planted_confusion() -> Check {
    let cfg_for = |aggregation, accuracy_mode| ScoringConfig {
        aggregation,
        accuracy_mode,
        ..ScoringConfig::default()
    };
    let mut worst: f64 = 0.0;
    let fixtures = 60;
    for seed in 0..fixtures {
        let fx = planted_fixture(1000 + seed, 12, 0.85);
        for (aggregation, oracle) in [
            (Aggregation::Micro, reference::micro(&fx.planted)),
            (Aggregation::Macro, reference::macro_(&fx.planted)),
        ] {
            for (mode, acc_idx) in [(AccuracyMode::Jaccard, 0), (AccuracyMode::RecallCompat, 1)] {
                let s = score_records(
                    &fx.records,
                    &fx.predictions,
                    &MockEmbedder::new(),
                    &cfg_for(aggregation, mode),
                )
                .map_err(|e| e.to_string())?;
                let got = [
                    s.scores.accuracy,
                    s.scores.f1,
                    s.scores.precision,
                    s.scores.recall,
                ];
                let want = [oracle[acc_idx], oracle[2], oracle[3], oracle[4]];
                for (g, w) in got.iter().zip(want) {
                    worst = worst.max((g - w).abs());
                }
                for (v, p) in s.per_vacancy.iter().zip(&fx.planted) {
                    ensure(
                        v.counts == ConfusionCounts::new(p.tp, p.fp, p.fn_),
                        format!(
                            "seed {seed} vacancy {}: {:?} vs planted {:?}",
                            v.vacancy_id, v.counts, p
                        ),
                    )?;
                }
            }
        }
    }
    ensure(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!(
        "{fixtures} fixtures, micro+macro, max deviation {worst:e}"
    ))
}

fn brute_max_cardinality(m: &SimilarityMatrix, t: Threshold) -> usize {
    fn go(m: &SimilarityMatrix, t: Threshold, i: usize, used: &mut Vec<bool>) -> usize {
        if i == m.rows() {
            return 0;
        }
        let mut best = go(m, t, i + 1, used);
        for j in 0..m.cols() {
            if !used[j] && t.admits(m.get(i, j)) {
                used[j] = true;
                best = best.max(1 + go(m, t, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(m, t, 0, &mut vec![false; m.cols()])
}

fn matching_oracle() -> Check {
    let t = Threshold::default();
    let mut rng = StdRng::seed_from_u64(42);
    let mut strict = 0;
    for case in 0..1000 {
        let (p, g) = (rng.random_range(0..=6), rng.random_range(0..=6));
        let rows: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                (0..g)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            rng.random_range(0.8..1.0)
                        } else {
                            rng.random_range(0.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let m = SimilarityMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
        let exact = match_exact(&m, t).cardinality();
        let greedy = match_greedy(&m, t).cardinality();
        let brute = brute_max_cardinality(&m, t);
        ensure(
            exact == brute,
            format!("case {case}: exact {exact} vs brute force {brute}: {rows:?}"),
        )?;
        ensure(
            greedy <= exact,
            format!("case {case}: greedy {greedy} > exact {exact}"),
        )?;
        if greedy < exact {
            strict += 1;
        }
    }
    let w = SimilarityMatrix::from_rows(&[vec![0.9, 0.86], vec![0.87, 0.2]]).unwrap();
    let (wg, we) = (
        match_greedy(&w, t).cardinality(),
        match_exact(&w, t).cardinality(),
    );
    ensure(
        (wg, we) == (1, 2),
        format!("witness gave greedy {wg}, exact {we}"),
    )?;
    Ok(format!(
        "1000 matrices agree with brute force; greedy < exact in {strict}; witness 1 vs 2"
    ))
}

/// Fixed vectors for named strings.
struct Table {
    desc: EmbedderDescriptor,
    vectors: HashMap<&'static str, Vec<f64>>,
}

impl Embedder for Table {
    fn descriptor(&self) -> &EmbedderDescriptor {
        &self.desc
    }
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .map(|t| EmbeddingVector::new(self.vectors[t].clone()))
            .collect()
    }
}

fn threshold_boundary() -> Check {
    let below = 0.8499999f64;
    let table = Table {
        desc: EmbedderDescriptor {
            name: "table".into(),
            dim: 5,
            normalized: false,
            version: "1".into(),
        },
        vectors: HashMap::from([
            ("gold", vec![1.0, 0.0, 0.0, 0.0, 0.0]),
            // |(17, 9, 5, 2, 1)| = 20, so the cosine with `gold` is 17/20.
            ("at", vec![17.0, 9.0, 5.0, 2.0, 1.0]),
            (
                "below",
                vec![below, (1.0 - below * below).sqrt(), 0.0, 0.0, 0.0],
            ),
        ]),
    };
    let gold = gold_skills(
        &record_with_skills(VacancyId::Int(1), &["gold".into()]),
        Default::default(),
    );
    let cfg = ScoringConfig::default();
    let at = score_vacancy(&gold, &["at".into()], &table, &cfg).map_err(|e| e.to_string())?;
    let no = score_vacancy(&gold, &["below".into()], &table, &cfg).map_err(|e| e.to_string())?;
    let s_at = at.outcome.pairs.first().map(|p| p.similarity);
    ensure(
        at.counts == ConfusionCounts::new(1, 0, 0),
        format!("0.85 gave {:?}", at.counts),
    )?;
    ensure(
        s_at == Some(0.85),
        format!("constructed similarity {s_at:?}"),
    )?;
    ensure(
        no.counts == ConfusionCounts::new(0, 1, 1),
        format!("0.8499999 gave {:?}", no.counts),
    )?;
    Ok("sim 0.85 (exact) matches, 0.8499999 does not".into())
}

fn metric_identities() -> Check {
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let c = ConfusionCounts::new(
            rng.random_range(0..1000),
            rng.random_range(0..1000),
            rng.random_range(0..1000),
        );
        let prf = precision_recall_f1(c);
        // Reciprocal form, so this is not the implementation's expression.
        let hm = if prf.precision == 0.0 || prf.recall == 0.0 {
            0.0
        } else {
            2.0 / (1.0 / prf.precision + 1.0 / prf.recall)
        };
        worst = worst.max((prf.f1 - hm).abs());
        ensure(
            accuracy(c, AccuracyMode::RecallCompat) == prf.recall,
            format!("recall-compat differs from recall for {c:?}"),
        )?;
        let single = aggregate(&[c], Aggregation::Macro, AccuracyMode::RecallCompat).unwrap();
        ensure(
            single.accuracy == single.recall,
            format!("aggregated recall-compat differs for {c:?}"),
        )?;
    }
    ensure(worst <= 1e-12, format!("F1 vs harmonic mean {worst:e}"))?;
    let perfect: Vec<(f64, bool)> = (0..20)
        .map(|i| (if i < 10 { 0.9 + i as f64 / 100.0 } else { 0.1 }, i < 10))
        .collect();
    let tied: Vec<(f64, bool)> = (0..20).map(|i| (0.5, i % 2 == 0)).collect();
    let (a1, a2) = (
        detection_auc(&perfect).unwrap(),
        detection_auc(&tied).unwrap(),
    );
    ensure(
        (a1, a2) == (1.0, 0.5),
        format!("AUC perfect {a1}, degenerate {a2}"),
    )?;
    Ok(format!(
        "10000 fuzzed counts, F1 deviation {worst:e}, recall-compat == recall; AUC 1.0 / 0.5"
    ))
}

fn metric_bits(run: &skillbench::pipeline::EvaluateRun) -> Vec<u64> {
    run.results
        .iter()
        .flat_map(|r| {
            let m = &r.metrics;
            [
                m.accuracy,
                m.f1,
                m.precision,
                m.recall,
                m.auc.unwrap_or(f64::NAN),
            ]
            .map(f64::to_bits)
        })
        .collect()
}

fn cache_transparency() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let fx = planted_fixture(77, 200, 0.85);
    let data = write_corpus(dir.path(), &fx.records);
    let preds: Vec<(VacancyId, Vec<String>)> = fx
        .records
        .iter()
        .map(|r| (r.id.clone(), fx.predictions[&r.id.key()].clone()))
        .collect();
    let pred_file = dir.path().join("preds.jsonl");
    write_prediction_file(&pred_file, &preds);
    let cache = dir.path().join("cache");
    let run = |label: &str, cache: Option<std::path::PathBuf>| {
        let cfg = RunConfig {
            dataset: Some(data.clone()),
            adapters: vec![mock_manifest(
                "scripted",
                &["--mode", "scripted", "--predictions", &path_arg(&pred_file)],
            )],
            out: dir.path().join(label),
            cache,
            ..RunConfig::default()
        };
        cmd_evaluate(&cfg, EvaluateOptions::default())
    };
    let disabled = run("disabled", None);
    let cold = run("cold", Some(cache.clone()));
    let warm = run("warm", Some(cache.clone()));
    for r in [&disabled, &cold, &warm] {
        ensure(r.report.code == EXIT_OK, format!("{:?}", r.report.messages))?;
    }
    ensure(
        fs::metadata(cache.join("embeddings/vectors.log"))
            .map(|m| m.len() > 0)
            .unwrap_or(false),
        "cache not populated",
    )?;
    let (a, b, c) = (
        metric_bits(&disabled),
        metric_bits(&cold),
        metric_bits(&warm),
    );
    ensure(
        a == b && b == c,
        format!("bits differ: {a:x?} {b:x?} {c:x?}"),
    )?;
    let raw = |l: &str| fs::read(dir.path().join(l).join("leaderboard_raw.csv")).unwrap();
    ensure(
        raw("disabled") == raw("cold") && raw("cold") == raw("warm"),
        "raw leaderboards differ",
    )?;
    Ok("disabled / cold / warm metrics bit-identical on 200 vacancies".into())
}

fn timing_harness() -> Check {
    let records = synthetic_corpus(100, 3);
    let m = mock_manifest("sleepy", &["--mode", "empty", "--sleep-ms", "50"]);
    let run = run_adapter(&m, &records, 1).map_err(|e| e.to_string())?;
    let lat: Vec<f64> = run
        .outcomes
        .iter()
        .filter_map(|o| match o {
            RecordOutcome::Done { usage, .. } => Some(usage.wall_latency_sec),
            RecordOutcome::Failed { .. } => None,
        })
        .collect();
    ensure(lat.len() == 100, format!("{} of 100 succeeded", lat.len()))?;
    let mean = lat.iter().sum::<f64>() / lat.len() as f64;
    ensure((0.050..=0.065).contains(&mean), format!("mean {mean:.5}s"))?;
    Ok(format!("mean wall latency {mean:.5}s over 100 requests"))
}

fn usage(tin: u64, tout: u64, p: Pricing) -> UsageRecord {
    let mut r = ExtractionResponse::with_skills(VacancyId::Int(0), Vec::new());
    r.tokens_in = Some(tin);
    r.tokens_out = Some(tout);
    UsageRecord::account(VacancyId::Int(0), 0.0, &r, Some(p))
}

fn cost_arithmetic() -> Check {
    let p = Pricing {
        input_per_million: 5.0,
        output_per_million: 15.0,
    };
    let total = compute_cost(&[usage(1000, 500, p)]).total_usd;
    ensure(total == 0.0125, format!("got {total}"))?;
    let mut rng = StdRng::seed_from_u64(5);
    for case in 0..1000 {
        let p = Pricing {
            input_per_million: rng.random_range(0.0..100.0),
            output_per_million: rng.random_range(0.0..100.0),
        };
        let tokens: Vec<(u64, u64)> = (0..rng.random_range(0..20))
            .map(|_| (rng.random_range(0..1 << 24), rng.random_range(0..1 << 24)))
            .collect();
        let once = compute_cost(
            &tokens
                .iter()
                .map(|&(i, o)| usage(i, o, p))
                .collect::<Vec<_>>(),
        )
        .total_usd;
        let twice = compute_cost(
            &tokens
                .iter()
                .map(|&(i, o)| usage(2 * i, 2 * o, p))
                .collect::<Vec<_>>(),
        )
        .total_usd;
        ensure(
            twice == 2.0 * once,
            format!("case {case}: {twice} != 2 x {once}"),
        )?;
    }
    Ok("$0.0125 exactly; doubling tokens doubles cost exactly in 1000 sets".into())
}

fn report_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let fx = planted_fixture(11, 60, 0.85);
    let data = write_corpus(dir.path(), &fx.records);
    let preds: Vec<(VacancyId, Vec<String>)> = fx
        .records
        .iter()
        .map(|r| (r.id.clone(), fx.predictions[&r.id.key()].clone()))
        .collect();
    let pred_file = dir.path().join("preds.jsonl");
    write_prediction_file(&pred_file, &preds);
    let adapters = vec![
        mock_manifest(
            "b-scripted",
            &["--mode", "scripted", "--predictions", &path_arg(&pred_file)],
        ),
        mock_manifest(
            "z-oracle",
            &["--mode", "oracle", "--dataset", &path_arg(&data)],
        ),
        mock_manifest("a-empty", &["--mode", "empty"]),
        mock_manifest("c-empty", &["--mode", "empty"]),
    ];
    let run = |label: &str| {
        let cfg = RunConfig {
            dataset: Some(data.clone()),
            adapters: adapters.clone(),
            out: dir.path().join(label),
            ..RunConfig::default()
        };
        let r = cmd_evaluate(&cfg, EvaluateOptions::default());
        (
            r.report.code,
            fs::read_to_string(dir.path().join(label).join("leaderboard.csv")).unwrap_or_default(),
        )
    };
    let (c1, first) = run("one");
    let (c2, second) = run("two");
    ensure(
        c1 == EXIT_OK && c2 == EXIT_OK,
        format!("exit codes {c1} {c2}"),
    )?;
    ensure(first == second, "leaderboard.csv differs between runs")?;
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(first.as_bytes());
    let rows: Vec<(String, f64)> = rd
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[2].parse().unwrap())
        })
        .collect();
    let names: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    ensure(
        names == ["z-oracle", "b-scripted", "a-empty", "c-empty"],
        format!("order {names:?}"),
    )?;
    ensure(
        rows.windows(2).all(|w| w[0].1 >= w[1].1),
        "F1 not descending",
    )?;
    Ok(format!("byte-identical, order {}", names.join(" > ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle adapter identity", oracle_identity),
        ("planted-confusion reproduction", planted_confusion),
        ("matching oracle", matching_oracle),
        ("threshold boundary", threshold_boundary),
        ("metric identities", metric_identities),
        ("cache transparency", cache_transparency),
        ("timing harness", timing_harness),
        ("cost arithmetic", cost_arithmetic),
        ("report determinism", report_determinism),
    ];
    let mut failed = BTreeMap::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.insert(name, why);
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed",
        criteria.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
