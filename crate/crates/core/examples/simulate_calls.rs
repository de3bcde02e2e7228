//! Two calls replayed through the whole pipeline on a private desk.

use std::path::Path;
use std::sync::Arc;

use calltriage::knowledge::KnowledgeBase;
use calltriage::media_gateway::ScenarioFile;
use calltriage::netsim::ChannelConfig;
use calltriage::service::{run_simulation, Pipeline, RuntimeConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let pipeline = Arc::new(Pipeline::mock(KnowledgeBase::from_corpus_file(&fixtures.join("corpus.csv"))?));
    let channel = ChannelConfig { p_random: 0.05, ..ChannelConfig::lossless(42) };

    for name in ["fire", "noise"] {
        let scenario = ScenarioFile::load(&fixtures.join(format!("scenarios/{name}.json")))?;
        let report = run_simulation(pipeline.clone(), &RuntimeConfig::default(), &scenario, &channel)?;
        let a = report.assessment.as_ref().expect("one final per call");
        println!(
            "{name}: lost {:.1}% of frames, heard \"{}\", severity {} (S={:.2}), {} events",
            100.0 * report.empirical_loss,
            report.final_transcript,
            a.level,
            a.score,
            report.events.len()
        );
    }
    Ok(())
}

fn main() {
    run_example().expect("simulation example");
}
