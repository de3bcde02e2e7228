//! Retrieve similar past calls and rebuild a garbled transcript from them.

use std::path::Path;
use std::sync::Arc;

use calltriage::knowledge::{assemble_prompt, reconstruct, KnowledgeBase, ReconstructionParams, TopContextGenerator};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus.csv");
    let kb = KnowledgeBase::from_corpus_file(&corpus)?;
    println!("{} records, {} terms", kb.len(), kb.model().dim());

    let partial = "smoke coming out building";
    for n in kb.neighbors(partial, 3)? {
        println!("  d={:.3}  {}", n.distance, kb.records()[n.row].combined);
    }

    let context = kb.retrieve(partial, 2)?;
    println!("\n{}\n", assemble_prompt(partial, &context));

    let params = ReconstructionParams::default();
    let result = reconstruct(&kb, partial, Arc::new(TopContextGenerator), &params)?;
    println!("reconstructed: {}", result.predicted_text);
    Ok(())
}

fn main() {
    run_example().expect("retrieval example");
}
