//! Charge-qudit register modelling and pulse-level gate compilation.
//!
//! A register is a set of donor quantum dots partitioned into qudits (one
//! electron shared among `D` dots) plus, depending on the architecture,
//! auxiliary dots onto which the `|1>` population of a qudit can be moved to
//! bring electrons close together and switch their Coulomb interaction on.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation: layouts and Hilbert-space dimension analysis ([`layout`]),
//! configuration bases and Hamiltonians ([`model`]), piecewise-constant
//! propagation and gate metrics ([`evolve`]), protocol compilation
//! ([`gates`]) and pulse tuning plus crosstalk analysis ([`tune`]).
//!
//! Units are fixed throughout: nanometres, milli-electronvolts, picoseconds.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod constants;
pub mod evolve;
pub mod gates;
pub mod layout;
pub mod linalg;
pub mod model;
pub mod simplex;
pub mod tune;

pub use constants::PhysicalConstants;
pub use evolve::{ControlSchedule, Propagator, Segment, StateVector, Subspace};
pub use layout::{build_register, Geometry, RegisterLayout, Scheme};
pub use model::{ConfigurationBasis, ControlValues, HamiltonianModel};
