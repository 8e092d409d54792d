//! Toolkit for designing coherently driven `n`-level atomic systems whose
//! excited-state amplitude follows a prescribed truncated Fourier sine series,
//! and for computing the photon statistics of the resulting fluorescence.
//!
//! The crate is organized as a pipeline:
//!
//! * [`synthesis`] constructs the real symmetric coupling Hamiltonian
//!   `H = T D Tᵗ` from a Fourier sine-series target;
//! * [`dynamics`] evolves the amplitude vector spectrally and extracts the
//!   excited-state sine series, with an independent ODE integrator for
//!   cross-checking;
//! * [`photostats`] computes the waiting-time distribution, mean emission
//!   rate, and the second-order correlation function `g²(τ)` via the renewal
//!   equation;
//! * [`trajectory`] Monte-Carlo samples emission times from the same model
//!   and provides empirical statistics.
//!
//! All frequencies are angular and expressed relative to the generalized Rabi
//! frequency `Ω` (the designed evolution has period `1/Ω`); times are in units
//! of `1/Ω` and rates in units of `Ω`.

pub mod dynamics;
pub mod linalg;
pub mod photostats;
pub mod synthesis;
pub mod trajectory;

pub use dynamics::{AmplitudeTrajectory, EigenStructure, SineSeries, SineTerm};
pub use photostats::{CorrelationTable, WaitingTimeTable};
pub use synthesis::{CoupledSystem, EigenDesign, FourierTarget, FreeRowStrategy};
pub use trajectory::{InterruptionEstimate, JumpRecord, SimMode};
