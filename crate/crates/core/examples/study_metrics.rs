//! Simulates a short study, writes the logs, then recomputes the collection
//! and content report from the files alone.

use dyadsense::obslog::{read_annotations, read_log_tree, StudyMetrics};
use dyadsense::sim::{run, Mode, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = Scenario {
        n_couples: 4,
        days: 3,
        ..Scenario::default()
    };
    let out = run(&s, Mode::GroundTruth)?;
    let dir = std::env::temp_dir().join("dyadsense-study-metrics");
    let _ = std::fs::remove_dir_all(&dir);
    out.write(&dir)?;
    let watches = read_log_tree(&dir.join("logs"))?;
    let ann = read_annotations(&dir.join("annotations.csv"))?;
    let m = StudyMetrics::compute(&watches, &ann)?;
    print!("{}", m.to_text());
    println!("\nlogs under {} match the in-memory report: {}", dir.display(), m == out.report.metrics);
    Ok(())
}
