//! Runs the default 13-couple week and prints the study report.
//!
//! cargo run --release --example simulate_study [ground-truth|dsp]

use dyadsense::sim::{run, Mode, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mode: Mode = std::env::args().nth(1).unwrap_or_else(|| "ground-truth".into()).parse()?;
    let t = std::time::Instant::now();
    let out = run(&Scenario::default(), mode)?;
    println!("{}", out.report.to_text());
    println!("run took {:.1?}", t.elapsed());
    Ok(())
}
