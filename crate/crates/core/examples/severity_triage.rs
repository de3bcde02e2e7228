//! Keyword, emotion and context levels combined into a severity call.

use calltriage::knowledge::ReconstructionResult;
use calltriage::triage::{assess, keyword_level, KeywordRules, LexiconEmotion, TriageConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rules = KeywordRules::default();
    for text in ["there is a gun at the school", "my neighbor's dog barking, the noise", "someone threw acid at me"] {
        println!("K={} for {text:?}", keyword_level(text, &rules).value());
    }

    let reconstruction = ReconstructionResult {
        predicted_text: "Please hurry, the house is on fire and I am scared".into(),
        retrieved_context: vec!["911. There is a fire in my kitchen. The smoke is everywhere.".into()],
        fallback: false,
    };
    let a = assess("house on fire", &reconstruction, &TriageConfig::default(), &LexiconEmotion::default());
    println!(
        "S={:.2} -> {} (K={} E={} C={}, matched {:?}, emotion {})",
        a.score,
        a.level,
        a.features.keyword.value(),
        a.features.emotion.value(),
        a.features.context.value(),
        a.rationale.matched_keywords,
        a.rationale.emotion_label
    );
    Ok(())
}

fn main() {
    run_example().expect("severity example");
}
