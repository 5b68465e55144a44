//! Acceptance checks for the co2risk workspace live in `tests/acceptance.rs`.
