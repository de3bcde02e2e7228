//! Turn a scripted call into the carrier's WebSocket event stream.

use calltriage::media_gateway::{mulaw, parse_media_event, replay_scenario, EventKind, ScenarioFile};
use calltriage::netsim::ChannelConfig;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = ScenarioFile::from_text("demo", "there is a fire in the kitchen", 25);
    let channel = ChannelConfig { p_random: 0.1, ..ChannelConfig::lossless(4) };
    let replay = replay_scenario(&scenario, &channel)?;
    println!(
        "stream {}: {} frames scripted, {} media events after loss",
        replay.stream_id,
        replay.frame_count,
        replay.media_count()
    );

    let wire = replay.to_wire();
    let first_media = wire.lines().map(parse_media_event).find_map(|e| e.ok().filter(|e| e.kind == EventKind::Media));
    if let Some(event) = first_media {
        let pcm = mulaw::decode(&event.payload()?);
        println!("first media frame: {} mu-law bytes, peak {}", pcm.len(), pcm.iter().map(|s| s.unsigned_abs()).max().unwrap_or(0));
    }
    println!("{}", wire.lines().next().unwrap_or_default());
    Ok(())
}

fn main() {
    run_example().expect("media replay example");
}
