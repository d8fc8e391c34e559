//! RSSI against distance under the default path-loss model, and how often a
//! noisy scan at each distance would count as close.

use dyadsense::proximity::{scan_step, PathLossModel, ProximityConfig, RssiSample, ScanOutcome, ScanState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let model = PathLossModel::default();
    let cfg = ProximityConfig::default();
    println!("threshold {} dBm is reached at {:.2} m", cfg.threshold_dbm, model.distance_for_rssi(cfg.threshold_dbm));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    println!("{:>8} {:>10} {:>10}", "metres", "mean dBm", "close %");
    for d in [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 12.0, 20.0] {
        let mut state = ScanState::default();
        let scans = 2000;
        for i in 0..scans {
            let z: f64 = StandardNormal.sample(&mut rng);
            let s = RssiSample::from_prediction(i * cfg.scan_period_ms, model.predict_rssi(d, z).unwrap());
            let (next, outcome) = scan_step(state, &s, &cfg);
            debug_assert_eq!(outcome == ScanOutcome::AttemptConnect, next != state);
            state = next;
        }
        println!(
            "{d:>8.1} {:>10.1} {:>10.1}",
            model.predict_rssi(d, 0.0).unwrap(),
            100.0 * state.connect_attempts as f64 / scans as f64
        );
    }
}
