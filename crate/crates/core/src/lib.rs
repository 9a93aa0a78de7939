//! Numerical toolkit for impact oscillators with time-periodic polynomial
//! potentials.
//!
//! The model is a particle on the half-line `x >= 0` governed by
//!
//! ```text
//! x'' + x^(2n+1) + sum_{i=0..2n} p_i(t) x^i = 0     for x > 0,
//! v -> -v                                            when x hits 0,
//! ```
//!
//! with each coefficient `p_i` a 1-periodic trigonometric polynomial. The
//! crate provides:
//!
//! * [`gentrig`] — the generalized sine/cosine pair `(C, S)` solving
//!   `x'' = -x^(2n+1)`, its minimal period `T0`, and fast tabulated
//!   evaluation;
//! * [`dynamics`] — potential specification, forces, and the Hamiltonians of
//!   the folded (impact) system;
//! * [`impact`] — event-driven adaptive integration of the half-line system
//!   with exact elastic reflection;
//! * [`transforms`] — the coordinate pipeline: action-angle charts, impact
//!   folding, the time-energy exchange, and the implicit radius defect `R`
//!   with finite-difference derivative estimators;
//! * [`maps`] — Poincaré/twist-map construction from physical orbits,
//!   perturbation extraction, rotation numbers, scaling-law fits, and
//!   long-horizon boundedness sweeps.

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the
// out-of-domain sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod gentrig;
pub mod impact;
pub mod maps;
pub mod ode;
pub(crate) mod quad;
pub mod transforms;

pub use dynamics::{DerivedConstants, FourierSeries, PotentialSpec, System};
pub use error::{Error, Result};
pub use gentrig::GenTrigTable;
pub use impact::{IntegratorOptions, OrbitTrace, PhaseState};
pub use maps::{Backend, MapContext, ScalingFit, TwistSample};
pub use transforms::{ActionAngle, ExchangedCoords, ImpactCoords, ScaledCoords};
