//! Classical communication with photon pairs over a fiber whose random
//! birefringence acts identically on both photons of a pair.
//!
//! The crate is organised bottom-up:
//!
//! * [`qstate`] two-qubit polarization states, collective unitaries, entropies.
//! * [`channel`] exact and Monte Carlo collective depolarization.
//! * [`analyzer`] Hong-Ou-Mandel based Bell-state analyzer and detector cascade.
//! * [`capacity`] Blahut-Arimoto, closed-form binary capacity, Holevo quantity.
//! * [`experiment`] simulated delay scans, Gaussian-pair fits, channel reduction.

pub mod analyzer;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod qstate;

pub use error::{Error, Result};
