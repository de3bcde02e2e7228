//! Rank calls, notice a cluster of related reports, then claim and resolve.

use calltriage::prioritizer::{IncidentSignature, PriorityQueue, PriorityUpdate, PriorityWeights};
use calltriage::triage::Severity;

fn update(id: &str, score: f64, level: Severity, terms: &[&str], at_ms: u64) -> PriorityUpdate {
    PriorityUpdate {
        session_id: id.into(),
        severity_score: score,
        severity_level: level,
        distress_score: 0.5,
        signature: IncidentSignature::new(terms.iter().map(|t| t.to_string()), at_ms),
        enqueued_at: at_ms,
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut q = PriorityQueue::new(PriorityWeights::default());
    q.upsert(update("noise-1", 1.3, Severity::Mild, &["noise", "intent:nuisance"], 0));
    q.upsert(update("medical-1", 2.4, Severity::Moderate, &["intent:medical"], 1_000));
    for (i, at) in [2_000, 3_000, 4_000, 5_000].into_iter().enumerate() {
        q.upsert(update(&format!("fire-{i}"), 2.2, Severity::Moderate, &["fire", "smoke", "intent:fire"], at));
    }
    for e in q.snapshot() {
        println!("{:<10} P={:.3} S={:.1} F={:.2} {}", e.session_id, e.priority, e.severity_score, e.frequency_score, e.status);
    }

    let top = q.claim(&q.snapshot()[0].session_id.clone())?;
    println!("claimed {}", top.session_id);
    println!("second claim: {}", q.claim(&top.session_id).unwrap_err());
    q.resolve(&top.session_id)?;
    println!("next up: {}", q.pop_highest()?.session_id);
    Ok(())
}

fn main() {
    run_example().expect("dispatch example");
}
