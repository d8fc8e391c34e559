//! Trains the speech detector on a synthetic corpus, reports hold-out
//! metrics, then classifies a few fresh seconds of audio.
//!
//! cargo run --release --example vad_train_classify [segments]

use dyadsense::vad::corpus::{ambient_second, labeled_frames, noise_second, speech_second, SyntheticCorpus};
use dyadsense::vad::train::{stratified_split, train, TrainConfig};
use dyadsense::vad::{evaluate, Vad};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let corpus = SyntheticCorpus::generate(n, 1);
    let (train_set, test_set) = stratified_split(&corpus.segments, 0.2, 1);
    let vad = Vad::new(dyadsense::vad::VadModel::constant(0.0));
    let report = train(&labeled_frames(&train_set, vad.extractor(), 4), &TrainConfig::default())?;
    for s in &report.cv {
        println!("lambda {:<8} cv accuracy {:.4}", s.lambda, s.mean_accuracy);
    }
    let m = evaluate(&report.model, &labeled_frames(&test_set, vad.extractor(), 1))?;
    println!(
        "lambda {} on {} hold-out seconds: accuracy {:.4}, SHR {:.4}, FAR {:.4}",
        report.lambda,
        test_set.len(),
        m.accuracy,
        m.shr,
        m.far
    );

    let vad = Vad::new(report.model);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (name, audio) in [
        ("speech", speech_second(&mut rng)),
        ("noise", noise_second(&mut rng)),
        ("quiet room", ambient_second(&mut rng)),
    ] {
        println!("{name:<10} -> {}", vad.decide_segment(&audio)?);
    }
    Ok(())
}
