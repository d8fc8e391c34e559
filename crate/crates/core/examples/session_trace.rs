//! Steps the recording state machine through one hour by hand and prints
//! every transition: a trigger at 10:05 whose self-report goes unanswered,
//! a proximity hit at 10:15 that falls inside the gap, and a trigger at
//! 10:30 that is answered.

use dyadsense::session::trace::{write_trace, TracingSession};
use dyadsense::session::{Action, Role, SessionEvent, SessionState, TimingConfig};
use dyadsense::time::SimTime;

fn at(m: u32, s: u32) -> SimTime {
    SimTime::at(0, 10, m, s)
}

type Res = Result<(), Box<dyn std::error::Error>>;

fn step(sess: &mut TracingSession, timers: &mut Vec<(SimTime, SessionEvent)>, e: SessionEvent, t: SimTime) -> Res {
    for a in sess.apply(e, t)? {
        if let Action::ScheduleTimer { id, at } = a {
            timers.push((at, SessionEvent::TimerFired(id)));
        }
    }
    Ok(())
}

fn main() -> Res {
    let mut sess = TracingSession::new(SessionState::new(Role::Central), TimingConfig::default());
    let mut timers = Vec::new();
    let t = &mut timers;

    step(&mut sess, t, SessionEvent::HourStart, at(0, 0))?;
    step(&mut sess, t, SessionEvent::ProximityMet, at(5, 0))?;
    step(&mut sess, t, SessionEvent::SpeechDetected, at(5, 2))?;
    step(&mut sess, t, SessionEvent::RecordingComplete, at(10, 2))?;
    // nobody answers; let the alert timers run out
    while let Some(i) = (0..t.len()).filter(|&i| t[i].0 < at(20, 0)).min_by_key(|&i| t[i].0) {
        let (when, e) = t.remove(i);
        step(&mut sess, t, e, when)?;
    }
    step(&mut sess, t, SessionEvent::ProximityMet, at(15, 0))?;
    step(&mut sess, t, SessionEvent::ProximityMet, at(30, 0))?;
    step(&mut sess, t, SessionEvent::SpeechDetected, at(30, 1))?;
    step(&mut sess, t, SessionEvent::RecordingComplete, at(35, 1))?;
    step(&mut sess, t, SessionEvent::SelfReportStarted, at(36, 0))?;
    step(&mut sess, t, SessionEvent::SelfReportCompleted, at(38, 30))?;
    step(&mut sess, t, SessionEvent::HourEnd, SimTime::at(0, 11, 0, 0))?;

    for r in &sess.trace {
        let acts: Vec<String> = r.actions.iter().map(|a| format!("{a:?}")).collect();
        let event = format!("{:?}", r.event);
        println!("{}  {event:<28} {} -> {}  {}", r.at, r.before.name(), r.after.name(), acts.join(", "));
    }
    let mut buf = Vec::new();
    write_trace(&mut buf, &sess.trace)?;
    println!("\n{} bytes of JSON lines", buf.len());
    Ok(())
}
