//! Reference oracles and synthetic fixtures shared by the fseg test suites.
//!
//! Everything here works on plain slices and deliberately shares no code with
//! `fseg-core`, so that tests comparing the two are genuinely independent.

pub mod fixtures;
pub mod oracles;
