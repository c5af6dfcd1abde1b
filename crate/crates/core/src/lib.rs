//! Hamiltonian simulation by a truncated Taylor series of the evolution
//! operator, implemented as a linear combination of unitaries (LCU) and
//! boosted segment by segment with robust oblivious amplitude amplification.
//!
//! The crate simulates the algorithm itself on a state vector over the
//! joint (compressed ancilla) ⊗ (system) space and checks it against dense
//! brute-force references:
//!
//! * [`hamiltonian`] parses and represents `H = Σ α_ℓ H_ℓ` with Pauli-product
//!   unitaries `H_ℓ`.
//! * [`taylor`] plans segments, picks the truncation order and builds the
//!   coefficient table of the truncated series.
//! * [`operators`] realizes the prepare, select, projector, reflection and
//!   amplification operators on a [`operators::JointState`].
//! * [`engine`] runs the segmented simulation.
//! * [`oracle`] holds the dense matrix-exponential and time-ordered references.
//! * [`dyson`] extends the method to polynomial time-dependent Hamiltonians.
//! * [`resources`] reports qubit and gate counts of the circuit construction.

pub mod dyson;
pub mod engine;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod resources;
pub mod taylor;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use hamiltonian::{LcuHamiltonian, PauliTerm, Phase};
pub use taylor::{CoefficientTable, SegmentPlan};

/// Size caps protecting against inputs that would not fit in memory or time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest qubit count for which dense `2^n × 2^n` matrices are built.
    pub dense_qubits: usize,
    /// Largest admissible truncation order `K`.
    pub max_order: usize,
    /// Largest admissible number of coefficient-table entries `m`.
    pub max_table_len: usize,
    /// Largest admissible number of time samples per segment (time-dependent case).
    pub max_time_steps: usize,
    /// Largest admissible joint state, in complex amplitudes
    /// (`m · 2^n`, doubled when the flag qubit is present).
    pub max_joint_amplitudes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            dense_qubits: 12,
            max_order: 40,
            max_table_len: 1 << 24,
            max_time_steps: 1 << 16,
            max_joint_amplitudes: 1 << 25,
        }
    }
}

impl Limits {
    pub fn check_dense(&self, n: usize) -> Result<()> {
        if n > self.dense_qubits {
            return Err(Error::DenseCapExceeded {
                n,
                cap: self.dense_qubits,
            });
        }
        Ok(())
    }

    /// Fails when a joint state over `m` ancilla indices, `n` system qubits
    /// and an optional flag qubit would exceed the amplitude cap.
    pub fn check_joint(&self, m: usize, n: usize, flagged: bool) -> Result<()> {
        let amps = (m as u128) << (n + flagged as usize);
        if amps > self.max_joint_amplitudes as u128 {
            return Err(Error::TableBudgetExceeded {
                m: m as u128,
                budget: self.max_joint_amplitudes >> (n + flagged as usize),
            });
        }
        Ok(())
    }
}
