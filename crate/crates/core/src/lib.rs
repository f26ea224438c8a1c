//! Bell scenarios with communication.
//!
//! Parties may see some of each other's inputs (a nonlocal hidden variable
//! causal structure). For full-correlator Bell inequalities on such
//! structures this crate computes exact classical bounds by enumeration,
//! quantum values by see-saw optimization over qubit observables, and
//! simulates the matching communication-complexity protocol, where the
//! success probability equals `1/2 + B/(2Γ)`.
//!
//! ```
//! use bellcom_core::{classical, quantum, scenario};
//!
//! let gyni = scenario::gyni_inequality();
//! assert_eq!(classical::classical_bound(&gyni).unwrap().value, 6.0);
//!
//! let strategy = quantum::canonical_strategy(quantum::CanonicalStrategy::GyniPaper);
//! let table = quantum::correlator_table(&strategy).unwrap();
//! let b = quantum::bell_value(&table, &gyni).unwrap();
//! assert!(b > 7.39);
//! ```

pub mod classical;
pub mod config;
pub mod error;
pub mod optimizer;
mod par;
pub mod protocol;
pub mod quantum;
pub mod scenario;
pub mod tensor;

pub use error::{Error, Result};
pub use par::is_parallel;
