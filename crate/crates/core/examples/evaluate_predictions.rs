//! Score reconstructed transcripts and a severity confusion matrix.

use std::path::Path;

use calltriage::evalkit::{bleu, confusion_and_scores, rouge_l, rouge_n, run_report, ReportOptions};
use calltriage::triage::Severity;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cand = "the cat sat on the mat";
    let refs = ["the cat is sitting on the mat"];
    let r1 = rouge_n(cand, refs[0], 1);
    println!("BLEU-2 {:.4}  ROUGE-1 f {:.4}  ROUGE-L f {:.4}", bleu(cand, &refs, 2)?, r1.f, rouge_l(cand, refs[0]).f);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/table2");
    let report = run_report(
        &dir.join("predictions.csv"),
        &dir.join("transcripts.csv"),
        Some(&dir.join("concepts.json")),
        ReportOptions::default(),
    )?;
    let agg = &report.aggregate;
    println!(
        "{} cases: BLEU {:.3}, ROUGE-1 {:.3}, ROUGE-L {:.3}, concepts {:.3}",
        agg.cases,
        agg.bleu.unwrap_or(0.0),
        agg.rouge1_f.unwrap_or(0.0),
        agg.rouge_l_f.unwrap_or(0.0),
        agg.conceptual_precision.unwrap_or(0.0)
    );

    use Severity::*;
    let gold = [Mild, Mild, Moderate, Severe, Severe, Severe];
    let pred = [Mild, Moderate, Moderate, Severe, Severe, Moderate];
    let (_, scores) = confusion_and_scores(&gold, &pred)?;
    for s in scores {
        println!("{:<8} recall {:?}", s.label.to_string(), s.recall);
    }
    Ok(())
}

fn main() {
    run_example().expect("evaluation example");
}
