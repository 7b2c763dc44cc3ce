//! Scriptable extraction adapter speaking the line protocol on stdio.
//!
//! Modes:
//! * `oracle`: gold skills from `--dataset`.
//! * `empty`: no skills.
//! * `echo`: the description parsed as a `;`-separated skill list.
//! * `scripted`: skills from a `--predictions` JSONL file.
//!
//! Fault flags take comma-separated vacancy ids. With `--once-dir`, each
//! fault fires only on the first request for an id.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Parser, ValueEnum};
use skillbench::dataset::{load_dataset, load_predictions};
use skillbench_core::{
    gold_skills, parse_skill_list, AdapterKind, Dedupe, ExtractionRequest, ExtractionResponse,
    Handshake, Strictness, PROTOCOL_VERSION,
};

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Oracle,
    Empty,
    Echo,
    Scripted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ner,
    Llm,
}

#[derive(Parser)]
struct Opts {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, default_value = "mock")]
    name: String,
    /// `llm` replies with `raw_output` and token counts instead of `skills`.
    #[arg(long, value_enum, default_value = "ner")]
    kind: Kind,
    #[arg(long, default_value_t = 1000)]
    tokens_in: u64,
    #[arg(long, default_value_t = 500)]
    tokens_out: u64,
    /// Busy time per request, measured from when the request was read.
    #[arg(long, default_value_t = 0)]
    sleep_ms: u64,
    /// Reply with a retryable error.
    #[arg(long, value_delimiter = ',')]
    fail_ids: Vec<String>,
    /// Reply with a non-retryable error.
    #[arg(long, value_delimiter = ',')]
    fatal_ids: Vec<String>,
    /// Never reply.
    #[arg(long, value_delimiter = ',')]
    hang_ids: Vec<String>,
    /// Exit without replying.
    #[arg(long, value_delimiter = ',')]
    crash_ids: Vec<String>,
    /// Reply with a different id.
    #[arg(long, value_delimiter = ',')]
    wrong_id_ids: Vec<String>,
    /// Reply with a line that is not JSON.
    #[arg(long, value_delimiter = ',')]
    garbage_ids: Vec<String>,
    #[arg(long)]
    once_dir: Option<PathBuf>,
    /// Send a handshake with the wrong protocol string.
    #[arg(long)]
    bad_handshake: bool,
}

fn skills_table(opts: &Opts) -> HashMap<String, Vec<String>> {
    match opts.mode {
        Mode::Oracle => {
            let path = opts
                .dataset
                .as_ref()
                .expect("--dataset is required for oracle mode");
            let d = load_dataset(path, Strictness::Lenient).expect("dataset loads");
            d.records
                .iter()
                .map(|r| (r.id.key(), gold_skills(r, Dedupe::CaseFold).skills))
                .collect()
        }
        Mode::Scripted => {
            let path = opts
                .predictions
                .as_ref()
                .expect("--predictions is required for scripted mode");
            load_predictions(path)
                .expect("predictions load")
                .into_iter()
                .map(|p| (p.id.key(), p.skills))
                .collect()
        }
        Mode::Empty | Mode::Echo => HashMap::new(),
    }
}

fn main() {
    let opts = Opts::parse();
    let table = skills_table(&opts);
    let set = |v: &[String]| v.iter().cloned().collect::<HashSet<_>>();
    let (fail, fatal, hang, crash, wrong, garbage) = (
        set(&opts.fail_ids),
        set(&opts.fatal_ids),
        set(&opts.hang_ids),
        set(&opts.crash_ids),
        set(&opts.wrong_id_ids),
        set(&opts.garbage_ids),
    );
    let kind = match opts.kind {
        Kind::Ner => AdapterKind::Ner,
        Kind::Llm => AdapterKind::Llm,
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let handshake = Handshake {
        protocol: if opts.bad_handshake {
            "other/0".into()
        } else {
            PROTOCOL_VERSION.into()
        },
        name: opts.name.clone(),
        kind,
    };
    serde_json::to_writer(&mut out, &handshake).unwrap();
    out.write_all(b"\n").unwrap();
    out.flush().unwrap();

    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let start = Instant::now();
        let req: ExtractionRequest = serde_json::from_str(&line).expect("request parses");
        let id = req.id.key();
        let first_time = match &opts.once_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).unwrap();
                std::fs::OpenOptions::new()
                    .write(true)
                    .create_new(true)
                    .open(dir.join(&id))
                    .is_ok()
            }
            None => true,
        };
        let faulty = |s: &HashSet<String>| first_time && s.contains(&id);

        if faulty(&crash) {
            std::process::exit(3);
        }
        if faulty(&hang) {
            std::thread::sleep(Duration::from_secs(3600));
        }
        let skills = match opts.mode {
            Mode::Echo => parse_skill_list(&req.desc),
            _ => table.get(&id).cloned().unwrap_or_default(),
        };
        let mut resp = match kind {
            AdapterKind::Ner => ExtractionResponse::with_skills(req.id.clone(), skills),
            AdapterKind::Llm => {
                let mut r = ExtractionResponse::with_skills(req.id.clone(), Vec::new());
                r.raw_output = Some(skills.join("; "));
                r.tokens_in = Some(opts.tokens_in);
                r.tokens_out = Some(opts.tokens_out);
                r
            }
        };
        if faulty(&fail) || faulty(&fatal) {
            resp = ExtractionResponse::with_skills(req.id.clone(), Vec::new());
            resp.error = Some("injected failure".into());
            resp.retryable = Some(!fatal.contains(&id));
        }
        if faulty(&wrong) {
            resp.id = format!("{id}-wrong").as_str().into();
        }
        let busy = Duration::from_millis(opts.sleep_ms);
        if let Some(rest) = busy.checked_sub(start.elapsed()) {
            std::thread::sleep(rest);
        }
        resp.latency_sec = Some(start.elapsed().as_secs_f64());
        if faulty(&garbage) {
            out.write_all(b"this is not json\n").unwrap();
        } else {
            serde_json::to_writer(&mut out, &resp).unwrap();
            out.write_all(b"\n").unwrap();
        }
        if out.flush().is_err() {
            break;
        }
    }
}
