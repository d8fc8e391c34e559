//! Expected self-report counts from availability windows and the daily
//! reminder decisions for a few adherence patterns.

use dyadsense::escalation::{afternoon_check, end_of_day_check, expected_counts, AvailabilityWindows, DayStats};

fn main() {
    let w = AvailabilityWindows::default();
    for day in [0, 5] {
        let (m, e) = expected_counts(&w, day);
        println!("day {day}: {m} morning and {e} evening self-reports expected");
    }
    let (em, ee) = expected_counts(&w, 0);
    println!("\n{:>8} {:>8} {:>6}  afternoon / end of day", "morning", "evening", "diary");
    for (cm, ce, diary) in [(3, 5, true), (1, 5, true), (2, 2, true), (0, 1, true), (3, 5, false)] {
        let s = DayStats {
            expected_morning: em,
            completed_morning: cm,
            expected_evening: ee,
            completed_evening: ce,
            diary_completed: diary,
        };
        println!(
            "{:>8} {:>8} {:>6}  {:?} / {:?}",
            format!("{cm}/{em}"),
            format!("{ce}/{ee}"),
            diary,
            afternoon_check(&s).actions,
            end_of_day_check(&s).actions
        );
    }
}
