//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use calltriage::evalkit::{bleu, confusion_and_scores, rouge_l, rouge_n, PrfScore};
use calltriage::knowledge::{read_corpus_file, KnowledgeBase};
use calltriage::netsim::{transmit, ChannelConfig, PacketFrame};
use calltriage::prioritizer::{IncidentSignature, PriorityQueue, PriorityUpdate, PriorityWeights};
use calltriage::service::{http, runtime, ServiceConfig};
use calltriage::triage::{keyword_level, severity_score, KeywordRules, Severity, SeverityFeatures, SeverityWeights};

// Tolerances and budgets.
const RANDOM_LOSS_BAND: (f64, f64) = (0.045, 0.055);
const BURSTY_LOSS_BAND: (f64, f64) = (0.19, 0.21);
const BURST_LENGTH_BAND: (f64, f64) = (2.375, 2.625);
const BLEU_EXAMPLE_TOL: f64 = 1e-4;
const F_RELATION_TOL: f64 = 1e-9;
const RECALL_TOL: f64 = 1e-3;
const CHANNEL_FRAMES: usize = 1_000_000;

type Outcome = Result<String, String>;

fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn in_band(x: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&x)
}

/// Expected keyword level per partial transcript, worked out by hand from the
/// severe list {gun, stabbing, shooting, fire, accident, emergency, death,
/// killed} and mild list {noise, neighbor, pet, minor}.
const TABLE2_EXPECTED: [(&str, u8); 18] = [
    ("t01", 2), // acid attack: no listed term
    ("t02", 2),
    ("t03", 4), // fire
    ("t04", 1), // neighbor
    ("t05", 2),
    ("t06", 2),
    ("t07", 1), // noise
    ("t08", 4), // gun
    ("t09", 2),
    ("t10", 2),
    ("t11", 2),
    ("t12", 2),
    ("t13", 2),
    ("t14", 2),
    ("t15", 2),
    ("t16", 4), // gun outranks neighbor
    ("t17", 2),
    ("t18", 2),
];

fn keyword_fidelity() -> Outcome {
    let path = manifest().join("fixtures/table2/transcripts.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
    let rules = KeywordRules::default();
    let mut checked = 0;
    for (row, (id, want)) in rdr.records().zip(TABLE2_EXPECTED) {
        let row = row.map_err(|e| e.to_string())?;
        ensure(&row[0] == id, || format!("fixture row {} is {}, expected {id}", checked + 1, &row[0]))?;
        let got = keyword_level(&row[1], &rules);
        ensure(got.value() == want as f64, || format!("{id} {:?}: got {}, want {want}", &row[1], got.value()))?;
        let upper = keyword_level(&row[1].to_uppercase(), &rules);
        ensure(upper == got, || format!("{id}: level changes with case"))?;
        ensure(Severity::parse(&row[2]) == Some(got), || format!("{id}: fixture level column says {}", &row[2]))?;
        checked += 1;
    }
    ensure(checked == TABLE2_EXPECTED.len(), || format!("only {checked} fixture rows"))?;
    Ok(format!("{checked}/{} transcripts at the expected level", TABLE2_EXPECTED.len()))
}

fn channel_model() -> Outcome {
    let frames = PacketFrame::stream(CHANNEL_FRAMES, |_| Vec::new());
    let random = ChannelConfig { p_random: 0.05, ..ChannelConfig::lossless(2024) };
    let t = transmit(&frames, &random).map_err(|e| e.to_string())?;
    ensure(in_band(t.empirical_loss_rate, RANDOM_LOSS_BAND), || format!("random loss {}", t.empirical_loss_rate))?;

    let bursty = ChannelConfig { burst_enter: 0.1, burst_exit: 0.4, burst_loss: 1.0, ..ChannelConfig::lossless(2024) };
    let b = transmit(&frames, &bursty).map_err(|e| e.to_string())?;
    ensure(in_band(b.empirical_loss_rate, BURSTY_LOSS_BAND), || format!("bursty loss {}", b.empirical_loss_rate))?;
    let mean_burst = b.mean_burst_length();
    ensure(in_band(mean_burst, BURST_LENGTH_BAND), || format!("mean burst length {mean_burst}"))?;
    Ok(format!(
        "random loss {:.4}, bursty loss {:.4}, mean burst {:.3} over {CHANNEL_FRAMES} frames",
        t.empirical_loss_rate, b.empirical_loss_rate, mean_burst
    ))
}

fn retrieval_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let vocab: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
    let docs: Vec<String> = (0..100)
        .map(|_| {
            let n = rng.random_range(4..20);
            (0..n).map(|_| vocab.choose(&mut rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
        })
        .collect();
    let kb = KnowledgeBase::from_texts(&docs).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<f64>> = docs.iter().map(|d| kb.model().transform(d)).collect();
    let k = 5;
    let mut boundary_ties = 0;
    for qi in 0..50 {
        let n = rng.random_range(2..8);
        let query: String = (0..n)
            .map(|_| if rng.random_bool(0.15) { "unseen".to_string() } else { vocab.choose(&mut rng).unwrap().clone() })
            .collect::<Vec<_>>()
            .join(" ");
        let q = kb.model().transform(&query);
        let mut brute: Vec<(f64, usize)> =
            rows.iter().enumerate().map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i)).collect();
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got = kb.neighbors(&query, k).map_err(|e| e.to_string())?;
        ensure(got.len() == k, || format!("query {qi}: {} results", got.len()))?;
        for (rank, nb) in got.iter().enumerate() {
            let want = brute[rank].0;
            ensure((nb.distance - want).abs() < 1e-9, || format!("query {qi} rank {rank}: distance {} vs {want}", nb.distance))?;
            // Any row at the same distance is an acceptable answer for this rank.
            let own = brute.iter().find(|(_, i)| *i == nb.row).unwrap().0;
            ensure((own - want).abs() < 1e-9, || format!("query {qi} rank {rank}: row {} is not at distance {want}", nb.row))?;
        }
        let rows_back: BTreeSet<usize> = got.iter().map(|n| n.row).collect();
        ensure(rows_back.len() == k, || format!("query {qi}: duplicate rows"))?;
        if (brute[k - 1].0 - brute[k].0).abs() < 1e-9 {
            boundary_ties += 1;
        }
    }
    Ok(format!("50 queries over 100 documents agree with brute force ({boundary_ties} with ties at rank {k})"))
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words = ["fire", "help", "smoke", "the", "house", "is", "on", "gun", "my", "dog", "please", "hurry"];
    for i in 0..100 {
        let n = rng.random_range(4..25);
        let x: String = (0..n).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ");
        let s = bleu(&x, &[&x], 4).map_err(|e| e.to_string())?;
        ensure(s == 1.0, || format!("bleu(x,[x]) = {s} for sample {i}: {x:?}"))?;
        let y: String = (0..rng.random_range(1..25)).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ");
        for prf in [rouge_n(&x, &y, 1), rouge_n(&x, &y, 2), rouge_l(&x, &y)] {
            let expect = if prf.precision + prf.recall == 0.0 {
                0.0
            } else {
                2.0 * prf.precision * prf.recall / (prf.precision + prf.recall)
            };
            ensure((prf.f - expect).abs() < F_RELATION_TOL, || format!("f relation broken for {x:?} / {y:?}: {prf:?}"))?;
        }
    }

    let hand = bleu("the cat sat", &["the cat sat on the mat"], 3).map_err(|e| e.to_string())?;
    let e_inv = (-1.0f64).exp();
    ensure((hand - e_inv).abs() < BLEU_EXAMPLE_TOL && (hand - 0.3679).abs() < BLEU_EXAMPLE_TOL, || format!("bleu example {hand}"))?;

    let r = rouge_n("a b c", "a c", 1);
    let want = PrfScore { precision: 2.0 / 3.0, recall: 1.0, f: 0.8 };
    ensure(
        (r.precision - want.precision).abs() < 1e-12 && (r.recall - 1.0).abs() < 1e-12 && (r.f - 0.8).abs() < 1e-12,
        || format!("rouge example {r:?}"),
    )?;

    // Reported triple: precision=0.5 recall=1.0 fmeasure=0.6667.
    let (p, rc) = (0.5, 1.0);
    let f = 2.0 * p * rc / (p + rc);
    ensure(format!("{f:.4}") == "0.6667", || format!("consistency relation gives {f}"))?;
    // Realized by a prediction with every reference word plus as many extras.
    let t = rouge_n("someone came into my house today help me", "someone came into my", 1);
    ensure(t.precision == 0.5 && t.recall == 1.0 && format!("{:.4}", t.f) == "0.6667", || format!("realized triple {t:?}"))?;
    Ok(format!("identity, f relation on 300 triples, bleu example {hand:.4}, rouge example (2/3, 1, 0.8), f(0.5, 1.0) = {f:.4}"))
}

fn severity_composition() -> Outcome {
    use Severity::*;
    let w = SeverityWeights::default();
    let high = severity_score(SeverityFeatures { keyword: Severe, emotion: Moderate, context: Moderate }, &w);
    ensure((high.score - 3.0).abs() < 1e-12 && high.level == Severe, || format!("(4,2,2) -> {} {}", high.score, high.level))?;
    let low = severity_score(SeverityFeatures { keyword: Mild, emotion: Mild, context: Mild }, &w);
    ensure(low.level == Mild, || format!("(1,1,1) -> {} {}", low.score, low.level))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let update = |id: &str, a: &calltriage::triage::SeverityAssessment, terms: &[&str], at: u64| {
        PriorityUpdate::from_assessment(id, a, IncidentSignature::new(terms.iter().map(|s| s.to_string()), at), at)
    };
    for trial in 0..1000 {
        let raw: [f64; 3] = [rng.random_range(1e-6..1.0), rng.random::<f64>(), rng.random::<f64>()];
        let sum: f64 = raw.iter().sum();
        let weights = PriorityWeights { w_s: raw[0] / sum, w_f: raw[1] / sum, w_d: raw[2] / sum };
        let mut q = PriorityQueue::new(weights);
        // The low call arrives first so arrival order cannot be what ranks it.
        q.upsert(update("low", &low, &["noise", "intent:nuisance"], 0));
        q.upsert(update("high", &high, &["fire", "intent:fire"], rng.random_range(1..600_000)));
        let snap = q.snapshot();
        ensure(snap[0].session_id == "high", || format!("trial {trial} weights {weights:?}: {snap:?}"))?;
    }
    Ok(format!("S(4,2,2) = {:.1} -> {}, S(1,1,1) = {:.1} -> {}, High first under 1000 weight vectors", high.score, high.level, low.score, low.level))
}

fn confusion_ratios() -> Outcome {
    use Severity::*;
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    let mut push = |g: Severity, p: Severity, n: usize| {
        gold.extend(std::iter::repeat_n(g, n));
        pred.extend(std::iter::repeat_n(p, n));
    };
    push(Mild, Mild, 4);
    push(Mild, Moderate, 1);
    push(Moderate, Moderate, 6);
    push(Severe, Severe, 10);
    push(Severe, Moderate, 3);
    let (_, scores) = confusion_and_scores(&gold, &pred).map_err(|e| e.to_string())?;
    let want = [0.800, 1.000, 0.769];
    let got: Vec<f64> = scores.iter().map(|s| s.recall.unwrap_or(f64::NAN)).collect();
    for (s, w) in scores.iter().zip(want) {
        let r = s.recall.unwrap_or(f64::NAN);
        ensure((r - w).abs() < RECALL_TOL, || format!("{} recall {r}, want {w}", s.label))?;
    }
    Ok(format!("recalls {:.3} / {:.3} / {:.3}", got[0], got[1], got[2]))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_calltriage"))
        .args(args)
        .current_dir(manifest())
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn get_json(url: &str) -> Result<Value, String> {
    ureq::get(url).call().map_err(|e| e.to_string())?.body_mut().read_json().map_err(|e| e.to_string())
}

fn end_to_end() -> Outcome {
    let args = ["simulate", "--scenario", "fire", "--loss", "0.05", "--seed", "1234"];
    let a = run_cli(&args)?;
    let b = run_cli(&args)?;
    ensure(a == b, || "fire reports differ between runs".into())?;
    let fire: Value = serde_json::from_str(&a).map_err(|e| e.to_string())?;
    ensure(fire["assessment"]["level"] == "severe", || format!("fire ended {}", fire["assessment"]["level"]))?;
    ensure(fire["empirical_loss"].as_f64().is_some_and(|l| l > 0.0), || "no loss applied".into())?;
    let noise: Value = serde_json::from_str(&run_cli(&["simulate", "--scenario", "noise", "--loss", "0.05", "--seed", "1234"])?)
        .map_err(|e| e.to_string())?;
    let noise_level = noise["assessment"]["level"].as_str().unwrap_or_default().to_string();
    ensure(noise_level == "mild" || noise_level == "moderate", || format!("noise ended {noise_level}"))?;

    // Same two calls through the running service.
    let cfg = ServiceConfig::from_toml_str("", std::iter::empty::<(&str, &str)>(), manifest()).map_err(|e| e.to_string())?;
    ensure(cfg.backends.stt == Default::default() && cfg.backends.generator == Default::default(), || "non-mock backend".into())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    let state = rt.block_on(async { runtime::build_state(cfg) }).map_err(|e| e.to_string())?;
    rt.spawn(http::serve_on(state, listener, None));
    let url = |p: &str| format!("http://{addr}{p}");
    let mut ids = Vec::new();
    for scenario in ["noise", "fire"] {
        let ticket: Value = ureq::post(&url("/simulate"))
            .send_json(json!({"scenario": scenario, "seed": 1234, "channel": {"p_random": 0.05}}))
            .map_err(|e| e.to_string())?
            .body_mut()
            .read_json()
            .map_err(|e| e.to_string())?;
        ids.push(ticket["session_id"].as_str().unwrap_or_default().to_string());
    }
    let deadline = Instant::now() + Duration::from_secs(10);
    while !ids.iter().all(|id| get_json(&url(&format!("/calls/{id}"))).is_ok_and(|v| v["state"] == "closed")) {
        ensure(Instant::now() < deadline, || "simulated calls did not close".into())?;
        std::thread::sleep(Duration::from_millis(20));
    }
    let queue = get_json(&url("/calls"))?;
    ensure(queue[0]["session_id"] == ids[1].as_str(), || format!("queue head is {}", queue[0]["session_id"]))?;
    let detail = get_json(&url(&format!("/calls/{}", ids[1])))?;
    ensure(detail["current_assessment"] == fire["assessment"], || "service and CLI disagree on the fire assessment".into())?;
    Ok(format!("identical reports ({} bytes); fire severe, noise {noise_level}; GET /calls puts fire first", a.len()))
}

fn dataset_prep() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out: PathBuf = dir.path().join("corpus.csv");
    let raw = manifest().join("fixtures/table1_raw.csv");
    run_cli(&["prep-data", "--in", raw.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
    let records = read_corpus_file(&out).map_err(|e| e.to_string())?;
    let q = "9-1-1, what's your emergency?";
    let want = [
        format!("{q} I'm at West High School. There's a guy with a gun. West High."),
        format!("{q} Hi, you need to get the police. Just ran over and they said that the young boy just shot his mom."),
        format!("{q} It's 188 and 92 Indian Springs. I just shot my mother and my nephew."),
        format!("{q} He's breaking into my house! I don't know who he is!"),
    ];
    ensure(records.len() == want.len(), || format!("{} rows written", records.len()))?;
    for (r, w) in records.iter().zip(&want) {
        ensure(&r.combined == w, || format!("combined {:?}, want {w:?}", r.combined))?;
        ensure(r.combined == format!("{} {} {}", r.respondent_msg, r.victim_msg_1, r.victim_msg_2), || "join".into())?;
    }
    Ok(format!("{} complete conversations kept, single-message call dropped", records.len()))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(u8, &str, Check, Duration); 8] = [
        (1, "keyword-rule fidelity", keyword_fidelity, Duration::from_secs(1)),
        (2, "channel model", channel_model, Duration::from_secs(30)),
        (3, "retrieval oracle equivalence", retrieval_oracle, Duration::from_secs(10)),
        (4, "metric oracles", metric_oracles, Duration::from_secs(10)),
        (5, "severity/priority composition", severity_composition, Duration::from_secs(5)),
        (6, "confusion ratios", confusion_ratios, Duration::from_secs(1)),
        (7, "end-to-end determinism and triage", end_to_end, Duration::from_secs(20)),
        (8, "dataset prep", dataset_prep, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (n, name, check, budget) in criteria {
        let t = Instant::now();
        let outcome = check();
        let took = t.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {n}. {name}: {detail} ({took:.2?})"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {n}. {name}: {why} ({took:.2?})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
