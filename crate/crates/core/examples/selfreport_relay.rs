//! Sends self-report triggers over the watch, phone and server hops with
//! drops, jitter and an internet outage, and tallies what reached the
//! phone in time.

use std::collections::BTreeMap;

use dyadsense::time::{Duration, SimTime, Span};
use dyadsense::transport::{relay_selfreport_trigger, Partner, RelayOutcome, SelfReportPath, Server};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut path = SelfReportPath::new(Partner::Female);
    path.data_layer.drop_prob = 0.01;
    path.internet.drop_prob = 0.02;
    path.internet.jitter_ms = 1500;
    path.internet.outages.push(Span::new(SimTime::at(0, 18, 0, 0), SimTime::at(0, 18, 40, 0)));
    let server = Server::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut tally: BTreeMap<String, u32> = BTreeMap::new();
    let mut log = Vec::new();
    let mut latency = Vec::new();
    for minute in 0..600u64 {
        let start = SimTime::at(0, 17, 0, 0).plus(Duration::from_minutes(minute / 5));
        let sent = start.plus(Duration::from_minutes(5));
        let key = match relay_selfreport_trigger(&path, &server, start, sent, Duration::from_minutes(4), &mut rng, &mut log) {
            RelayOutcome::Shown { at } => {
                latency.push(at.saturating_sub(sent).as_ms());
                "shown".to_string()
            }
            RelayOutcome::NotShown(r) => format!("{r:?}"),
        };
        *tally.entry(key).or_default() += 1;
    }
    for (k, v) in &tally {
        println!("{k:<22} {v:>4}");
    }
    latency.sort_unstable();
    println!("median delivery {} ms, {} messages logged", latency[latency.len() / 2], log.len());
}
