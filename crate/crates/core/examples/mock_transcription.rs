//! What the scripted recognizer hears as channel loss grows.

use calltriage::media_gateway::ScenarioFile;
use calltriage::netsim::{transmit, ChannelConfig};
use calltriage::transcription::mock_transcribe;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = ScenarioFile::from_text("gun", "there is a man with a gun outside the school", 20);
    let frames = scenario.frames()?;
    for loss in [0.0, 0.2, 0.5, 0.8] {
        let cfg = ChannelConfig { p_random: loss, ..ChannelConfig::lossless(9) };
        let trace = transmit(&frames, &cfg)?;
        let heard = mock_transcribe("demo", &scenario.words, &trace);
        println!("loss {loss:.1}: \"{}\" (confidence {:.2})", heard.text, heard.confidence);
    }
    Ok(())
}

fn main() {
    run_example().expect("mock transcription example");
}
