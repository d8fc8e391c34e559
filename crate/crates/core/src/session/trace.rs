//! Line-delimited transition traces.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{advance, Action, Phase, SessionError, SessionEvent, SessionState, TimingConfig};
use crate::jsonl;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub at: SimTime,
    pub before: Phase,
    pub event: SessionEvent,
    pub after: Phase,
    pub actions: Vec<Action>,
}

/// Runs `advance` and keeps a record of every transition.
#[derive(Debug, Clone)]
pub struct TracingSession {
    pub state: SessionState,
    pub config: TimingConfig,
    pub trace: Vec<TraceRecord>,
}

impl TracingSession {
    pub fn new(state: SessionState, config: TimingConfig) -> Self {
        TracingSession {
            state,
            config,
            trace: Vec::new(),
        }
    }

    pub fn apply(&mut self, event: SessionEvent, now: SimTime) -> Result<Vec<Action>, SessionError> {
        let (next, actions) = advance(&self.state, event, &self.config, now)?;
        self.trace.push(TraceRecord {
            at: now,
            before: self.state.phase,
            event,
            after: next.phase,
            actions: actions.clone(),
        });
        self.state = next;
        Ok(actions)
    }
}

pub fn write_trace<W: Write>(w: W, records: &[TraceRecord]) -> io::Result<()> {
    jsonl::write_lines(w, records)
}

pub fn read_trace<R: BufRead>(r: R) -> io::Result<Vec<TraceRecord>> {
    jsonl::read_lines(r)
}
