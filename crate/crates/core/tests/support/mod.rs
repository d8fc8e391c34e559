//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod fixture;
pub mod mfcc_ref;
pub mod session_ref;
