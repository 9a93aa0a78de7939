//! Keeps the book honest: each chapter is attached as module documentation,
//! so `cargo test` runs every Rust code block in `book/src` as a doctest.
//! One module per chapter makes a failing snippet easy to trace back.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/generalized-trig.md")]
pub mod generalized_trig {}

#[doc = include_str!("../../../book/src/impact-integration.md")]
pub mod impact_integration {}

#[doc = include_str!("../../../book/src/action-angle.md")]
pub mod action_angle {}

#[doc = include_str!("../../../book/src/time-energy-exchange.md")]
pub mod time_energy_exchange {}

#[doc = include_str!("../../../book/src/twist-maps.md")]
pub mod twist_maps {}

#[doc = include_str!("../../../book/src/experiments-cli.md")]
pub mod experiments_cli {}
