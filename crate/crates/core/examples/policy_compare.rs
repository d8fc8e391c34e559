//! Share of recordings that catch a conversation: the proximity and speech
//! trigger against a fixed minute and a random minute per hour.
//!
//! cargo run --release --example policy_compare [ground-truth|dsp]

use dyadsense::sim::{compare_policies, Mode, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mode: Mode = std::env::args().nth(1).unwrap_or_else(|| "ground-truth".into()).parse()?;
    let cmp = compare_policies(&Scenario::default(), mode)?;
    print!("{}", cmp.to_text());
    Ok(())
}
