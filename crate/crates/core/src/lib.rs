//! Browser-session measurement engine.
//!
//! Replays recorded or synthetic browser event traces and reconstructs page
//! visits, logical referrers, attention, link exposures and shares, then
//! compares them against conventional measurement methods and packages the
//! results into schema-checked, pseudonymous digests.

pub mod attention;
pub mod chronology;
pub mod exposure;
pub mod fixtures;
pub mod navigation;
pub mod panel;
pub mod patterns;
pub mod privacy;
pub mod replay;
pub mod spans;
pub mod synth;
pub mod trace;
