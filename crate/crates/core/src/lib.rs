#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod escalation;
pub mod jsonl;
pub mod obslog;
pub mod proximity;
pub mod cli;
pub mod session;
pub mod sim;
pub mod time;
pub mod transport;
pub mod vad;
