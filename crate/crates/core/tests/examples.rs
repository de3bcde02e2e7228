#[allow(dead_code)]
#[path = "../examples/lossy_channel.rs"]
mod lossy_channel;

#[allow(dead_code)]
#[path = "../examples/media_replay.rs"]
mod media_replay;

#[allow(dead_code)]
#[path = "../examples/mock_transcription.rs"]
mod mock_transcription;

#[allow(dead_code)]
#[path = "../examples/retrieval_reconstruction.rs"]
mod retrieval_reconstruction;

#[allow(dead_code)]
#[path = "../examples/severity_triage.rs"]
mod severity_triage;

#[allow(dead_code)]
#[path = "../examples/dispatch_queue.rs"]
mod dispatch_queue;

#[allow(dead_code)]
#[path = "../examples/evaluate_predictions.rs"]
mod evaluate_predictions;

#[allow(dead_code)]
#[path = "../examples/simulate_calls.rs"]
mod simulate_calls;


#[test]
fn lossy_channel_runs() {
    lossy_channel::run_example().expect("lossy_channel example");
}

#[test]
fn media_replay_runs() {
    media_replay::run_example().expect("media_replay example");
}

#[test]
fn mock_transcription_runs() {
    mock_transcription::run_example().expect("mock_transcription example");
}

#[test]
fn retrieval_reconstruction_runs() {
    retrieval_reconstruction::run_example().expect("retrieval_reconstruction example");
}

#[test]
fn severity_triage_runs() {
    severity_triage::run_example().expect("severity_triage example");
}

#[test]
fn dispatch_queue_runs() {
    dispatch_queue::run_example().expect("dispatch_queue example");
}

#[test]
fn evaluate_predictions_runs() {
    evaluate_predictions::run_example().expect("evaluate_predictions example");
}

#[test]
fn simulate_calls_runs() {
    simulate_calls::run_example().expect("simulate_calls example");
}

#[test]
fn service_api_runs() {
    service_api::run_example().expect("service_api example");
}
