//! Classification of self-maps of finite-dimensional normed spaces against the
//! triangle-perimeter hierarchy (nonexpansive, perimetric nonexpansive,
//! perimeter-contracting, ...) and fixed-point computation via Picard, damped,
//! anchored and orbit iteration schemes.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`] — points, the norm family, and the triple-perimeter functional
//! * [`mapping`] — declarative self-maps, domains and deterministic samplers
//! * [`classify`] — the class audits and the period-2 scan
//! * [`solve`] — the four iteration schemes and their traces
//! * [`suites`] — executable property suites over classified scenarios
//! * [`scenario`] — JSON scenario files and the bundled example corpus
//! * [`report`] — canonical (byte-stable) report serialization

pub mod classify;
pub mod error;
pub mod geometry;
pub mod mapping;
pub mod report;
pub mod scenario;
pub mod solve;
pub mod suites;

pub use error::{Error, Result};
