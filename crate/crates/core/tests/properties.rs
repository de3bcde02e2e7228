mod support;

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use proptest::collection::vec;
use proptest::prelude::*;

use calltriage::evalkit::{bleu, rouge_l, rouge_n};
use calltriage::knowledge::corpus::{preprocess_dataset, RawConversation, Speaker, Turn};
use calltriage::knowledge::index::squared_l2;
use calltriage::knowledge::intent::softmax;
use calltriage::knowledge::KnowledgeBase;
use calltriage::media_gateway::{mulaw, ScenarioFile};
use calltriage::netsim::{transmit, ChannelConfig, PacketFrame};
use calltriage::prioritizer::{queue_order, IncidentSignature, PriorityQueue, PriorityUpdate, PriorityWeights};
use calltriage::service::{run_simulation, Pipeline, ServiceConfig};
use calltriage::triage::{
    keyword_level, misclassification_penalty, severity_score, severity_softmax, KeywordRules, Severity, SeverityFeatures,
    SeverityWeights,
};

const VOCAB: &[&str] = &[
    "help", "my", "house", "is", "on", "fire", "the", "neighbor", "noise", "dog", "pet", "minor", "car", "accident",
    "someone", "broke", "in", "please", "hurry", "loud", "music", "gun", "smoke", "hurt", "bleeding", "now",
];

fn word() -> impl Strategy<Value = String> {
    proptest::sample::select(VOCAB).prop_map(str::to_string)
}

fn sentence(min: usize, max: usize) -> impl Strategy<Value = String> {
    vec(word(), min..=max).prop_map(|w| w.join(" "))
}

fn severity() -> impl Strategy<Value = Severity> {
    prop_oneof![Just(Severity::Mild), Just(Severity::Moderate), Just(Severity::Severe)]
}

fn simplex3() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        (lo, hi - lo, 1.0 - hi)
    })
}

fn random_case(text: &str, mask: &[bool]) -> String {
    text.chars()
        .zip(mask.iter().cycle())
        .map(|(c, &up)| if up { c.to_ascii_uppercase() } else { c })
        .collect()
}

proptest! {
    #[test]
    fn keyword_level_ignores_case(text in sentence(0, 12), mask in vec(any::<bool>(), 1..16)) {
        let rules = KeywordRules::default();
        prop_assert_eq!(keyword_level(&random_case(&text, &mask), &rules), keyword_level(&text, &rules));
    }

    #[test]
    fn severe_terms_win_over_mild(pre in sentence(0, 6), post in sentence(0, 6),
                                  severe in proptest::sample::select(vec!["gun", "fire", "accident", "killed"]),
                                  mild in proptest::sample::select(vec!["noise", "neighbor", "pet", "minor"])) {
        let rules = KeywordRules::default();
        prop_assert_eq!(keyword_level(&format!("{pre} {mild} {severe} {post}"), &rules), Severity::Severe);
        prop_assert_eq!(keyword_level(&format!("{pre} {severe}, {mild}. {post}"), &rules), Severity::Severe);
    }

    #[test]
    fn severity_score_is_monotone(k in severity(), e in severity(), c in severity(), bump in 0usize..3, (wk, we, wc) in simplex3()) {
        let w = SeverityWeights { w_k: wk, w_e: we, w_c: wc, ..SeverityWeights::default() };
        let base = SeverityFeatures { keyword: k, emotion: e, context: c };
        let up = |s: Severity| match s {
            Severity::Mild => Severity::Moderate,
            _ => Severity::Severe,
        };
        let mut raised = base;
        match bump {
            0 => raised.keyword = up(k),
            1 => raised.emotion = up(e),
            _ => raised.context = up(c),
        }
        let (a, b) = (severity_score(base, &w), severity_score(raised, &w));
        prop_assert!(b.score >= a.score - 1e-12);
        prop_assert!(b.level >= a.level);
        prop_assert!((1.0 - 1e-9..=4.0 + 1e-9).contains(&a.score));
    }

    #[test]
    fn softmax_is_a_distribution_and_shift_invariant(logits in vec(-30.0..30.0f64, 1..8), shift in -100.0..100.0f64) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v <= 1.0));
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn severity_softmax_and_penalty(x in vec(-2.0..2.0f64, 3), theta in vec(vec(-2.0..2.0f64, 3), 2..5),
                                    deltas in vec(0.0..5.0f64, 1..6)) {
        let p = severity_softmax(&x, &theta).unwrap();
        prop_assert_eq!(p.len(), theta.len());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let cases: Vec<(usize, Vec<f64>)> = deltas.iter().enumerate().map(|(i, _)| (i % p.len(), p.clone())).collect();
        let penalty = misclassification_penalty(&cases, &deltas).unwrap();
        prop_assert!(penalty >= 0.0);
        let certain: Vec<(usize, Vec<f64>)> = deltas.iter().map(|_| (0, vec![1.0, 0.0])).collect();
        prop_assert_eq!(misclassification_penalty(&certain, &deltas).unwrap(), 0.0);
    }

    #[test]
    fn rouge_f_relation_and_swap_symmetry(a in sentence(0, 12), b in sentence(0, 12), n in 1usize..4) {
        for (x, y) in [(rouge_n(&a, &b, n), rouge_n(&b, &a, n)), (rouge_l(&a, &b), rouge_l(&b, &a))] {
            prop_assert!((x.precision - y.recall).abs() < 1e-12);
            prop_assert!((x.recall - y.precision).abs() < 1e-12);
            prop_assert!((x.f - y.f).abs() < 1e-12);
            let expect = if x.precision + x.recall == 0.0 { 0.0 } else { 2.0 * x.precision * x.recall / (x.precision + x.recall) };
            prop_assert!((x.f - expect).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x.precision) && (0.0..=1.0).contains(&x.recall));
        }
    }

    #[test]
    fn bleu_is_bounded_and_one_on_identity(a in sentence(1, 12), b in sentence(0, 12), long in sentence(4, 12)) {
        let s = bleu(&a, &[b.as_str()], 4).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((bleu(&long, &[long.as_str()], 4).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn queue_is_ordered_and_scores_follow_the_weights(
        calls in vec((0usize..6, 1.0..4.0f64, 0.0..1.0f64, vec(word(), 0..3), 0u64..1_000_000), 1..20),
        (ws, wf, wd) in simplex3(),
        claims in vec(0usize..6, 0..4),
    ) {
        let w = PriorityWeights { w_s: ws, w_f: wf, w_d: wd };
        let mut q = PriorityQueue::new(w);
        let mut ids = BTreeSet::new();
        for (id, s, d, terms, at) in &calls {
            let id = format!("call-{id}");
            ids.insert(id.clone());
            q.upsert(PriorityUpdate {
                session_id: id,
                severity_score: *s,
                severity_level: Severity::Moderate,
                distress_score: *d,
                signature: IncidentSignature::new(terms.iter().cloned(), *at),
                enqueued_at: *at,
            });
        }
        for c in claims {
            let _ = q.claim(&format!("call-{c}"));
        }
        let snap = q.snapshot();
        prop_assert_eq!(snap.iter().map(|e| e.session_id.clone()).collect::<BTreeSet<_>>(), ids);
        for pair in snap.windows(2) {
            prop_assert_ne!(queue_order(&pair[0], &pair[1]), std::cmp::Ordering::Greater);
            prop_assert!(pair[0].priority >= pair[1].priority);
        }
        for e in &snap {
            prop_assert!((0.0..=1.0).contains(&e.frequency_score));
            let p = ws * e.severity_score + wf * e.frequency_score + wd * e.distress_score;
            prop_assert!((e.priority - p).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_severity_ranks_first_when_all_else_ties((ws, wf, wd) in simplex3(), lo in 1.0..2.0f64, gap in 0.5..2.0f64, d in 0.0..1.0f64) {
        prop_assume!(ws > 1e-6);
        let mut q = PriorityQueue::new(PriorityWeights { w_s: ws, w_f: wf, w_d: wd });
        for (id, s, terms, at) in [("low", lo, "noise", 0), ("high", lo + gap, "fire", 10)] {
            q.upsert(PriorityUpdate {
                session_id: id.into(),
                severity_score: s,
                severity_level: Severity::Moderate,
                distress_score: d,
                signature: IncidentSignature::new([terms.to_string()], at),
                enqueued_at: at,
            });
        }
        prop_assert_eq!(&q.snapshot()[0].session_id, "high");
    }

    #[test]
    fn preprocess_keeps_exactly_the_well_formed_conversations(
        convs in vec(vec((any::<bool>(), sentence(1, 5)), 0..6), 0..8)
    ) {
        let raw: Vec<RawConversation> = convs.iter().enumerate().map(|(i, turns)| RawConversation {
            id: format!("c{i}"),
            turns: turns.iter().map(|(r, t)| if *r { Turn::respondent(t) } else { Turn::victim(t) }).collect(),
        }).collect();
        let out = preprocess_dataset(&raw);
        let expected: Vec<_> = raw.iter().filter(|c| {
            let Some(q) = c.turns.iter().position(|t| t.speaker == Speaker::Respondent) else { return false };
            c.turns[q + 1..].windows(2).any(|w| w.iter().all(|t| t.speaker == Speaker::Victim))
        }).collect();
        prop_assert_eq!(out.len(), expected.len());
        for (rec, conv) in out.iter().zip(expected) {
            prop_assert_eq!(&rec.combined, &format!("{} {} {}", rec.respondent_msg, rec.victim_msg_1, rec.victim_msg_2));
            prop_assert!(conv.turns.iter().any(|t| t.speaker == Speaker::Respondent && t.text == rec.respondent_msg));
        }
    }

    #[test]
    fn retrieval_matches_brute_force(docs in vec(sentence(1, 8), 1..15), query in sentence(1, 6), k in 1usize..5) {
        let kb = KnowledgeBase::from_texts(&docs).unwrap();
        let qv = kb.model().transform(&query);
        let mut brute: Vec<(f64, usize)> = docs.iter().enumerate()
            .map(|(i, d)| (squared_l2(&qv, &kb.model().transform(d)), i)).collect();
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got = kb.neighbors(&query, k).unwrap();
        prop_assert_eq!(got.len(), k.min(docs.len()));
        for (n, (d, _)) in got.iter().zip(&brute) {
            prop_assert!((n.distance - d).abs() < 1e-9);
        }
        // Every document is at distance zero from itself.
        for (i, d) in docs.iter().enumerate() {
            let best = kb.neighbors(d, 1).unwrap()[0];
            prop_assert!(best.distance < 1e-9, "doc {} nearest at {}", i, best.distance);
        }
    }

    #[test]
    fn mulaw_encode_is_stable_under_a_round_trip(sample in any::<i16>(), code in any::<u8>()) {
        let c = mulaw::encode_sample(sample);
        prop_assert_eq!(mulaw::encode_sample(mulaw::decode_sample(c)), c);
        prop_assume!(code != 0x7F);
        prop_assert_eq!(mulaw::encode_sample(mulaw::decode_sample(code)), code);
    }

    #[test]
    fn channel_partitions_frames_and_replays_by_seed(n in 1usize..400, p in 0.0..0.5f64, enter in 0.0..0.2f64,
                                                     exit in 0.05..1.0f64, burst in 0.0..1.0f64, seed in any::<u64>()) {
        let cfg = ChannelConfig { p_random: p, burst_enter: enter, burst_exit: exit, burst_loss: burst, ..ChannelConfig::lossless(seed) };
        let frames = PacketFrame::stream(n, |_| Vec::new());
        let a = transmit(&frames, &cfg).unwrap();
        prop_assert_eq!(a.total(), n);
        let mut seen: Vec<u64> = a.delivered.iter().map(|d| d.0).chain(a.dropped.iter().copied()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n as u64).collect::<Vec<_>>());
        prop_assert_eq!(transmit(&frames, &cfg).unwrap(), a);
        let clean = transmit(&frames, &ChannelConfig::lossless(seed)).unwrap();
        prop_assert!(clean.dropped.is_empty());
    }
}

fn shared() -> &'static (ServiceConfig, Arc<Pipeline>) {
    static CELL: OnceLock<(ServiceConfig, Arc<Pipeline>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = support::config("");
        let pipeline = Arc::new(Pipeline::from_config(&cfg).unwrap());
        (cfg, pipeline)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn session_events_are_numbered_without_gaps(text in sentence(5, 25), p in 0.0..0.4f64, seed in any::<u64>()) {
        let (cfg, pipeline) = shared();
        let scenario = ScenarioFile::from_text("prop", &text, 10);
        let channel = ChannelConfig { p_random: p, ..ChannelConfig::lossless(seed) };
        let report = run_simulation(pipeline.clone(), &cfg.runtime(), &scenario, &channel).unwrap();
        let seqs: Vec<u64> = report.events.iter().map(|e| e.seq).collect();
        prop_assert_eq!(seqs, (1..=report.events.len() as u64).collect::<Vec<_>>());
        prop_assert!(report.frames_delivered <= report.frames_sent);
        prop_assert_eq!(report.events.last().map(|e| e.kind), Some(calltriage::service::LiveEventKind::CallClosed));
    }
}
