//! Random and bursty packet loss on a 20 ms audio stream.

use calltriage::netsim::{effective_loss_probability, reception_rate, transmit, ChannelConfig, PacketFrame};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let frames = PacketFrame::stream(50_000, |_| vec![0xFF; 160]);
    let random = ChannelConfig { p_random: 0.05, ..ChannelConfig::lossless(11) };
    let bursty = ChannelConfig { burst_enter: 0.1, burst_exit: 0.4, burst_loss: 1.0, ..ChannelConfig::lossless(11) };

    for (name, cfg) in [("random", &random), ("bursty", &bursty)] {
        let trace = transmit(&frames, cfg)?;
        println!(
            "{name:>7}: expected loss {:.3}, observed {:.3}, mean burst {:.2} frames, reception {:.3}",
            effective_loss_probability(cfg),
            trace.empirical_loss_rate,
            trace.mean_burst_length(),
            reception_rate(trace.empirical_loss_rate),
        );
    }
    Ok(())
}

fn main() {
    run_example().expect("lossy channel example");
}
