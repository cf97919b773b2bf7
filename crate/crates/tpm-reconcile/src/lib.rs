//! Key reconciliation for QKD post-processing via tree parity
//! machines.
//!
//! Two parties hold highly correlated but imperfect bit strings — raw
//! keys out of a quantum key distribution link whose disagreement
//! rate is the QBER. Each party folds its string into the integer
//! weights of a tree parity machine (TPM): `K` hidden perceptrons
//! with `N` inputs each, weights bounded by a half-width `L` tied to
//! the block size by `L = 2^(b-1)`. The parties then play the mutual
//! learning game over the public channel: one side broadcasts a
//! random challenge and both announce their output bits, training
//! only when the bits agree. Because the initial weights are already
//! close, the networks converge quickly; once a weight-identity check
//! passes, decoding the weights yields the reconciled key. Sessions
//! that exhaust their iteration budget are discarded and the frame's
//! bits never leave the session.
//!
//! The crate provides the whole experimental apparatus:
//!
//! - [`tpm`] — the network itself: evaluation, the three training
//!   rules, bounded-weight arithmetic;
//! - [`codec`] — the reversible bit-string/weight transformation;
//! - [`channel`] — seeded randomness, key generation, and the binary
//!   symmetric channel used to model the QBER;
//! - [`session`] — the reconciliation state machine and single-trial
//!   driver;
//! - [`metrics`] — frame error rate, the entropy-loss estimate, and
//!   sweep-point aggregation;
//! - [`sweep`] — deterministic, parallel Monte-Carlo sweeps with CSV
//!   and JSON emitters;
//! - [`wire`] — a framed binary protocol running the same session
//!   between two processes;
//! - [`adversary`] — a naive passive eavesdropper replayed against
//!   recorded transcripts.
//!
//! Determinism is a design contract: every random choice flows from
//! named substreams of explicit 64-bit seeds, so single runs, sweeps
//! (at any thread count), and networked sessions are reproducible
//! bit for bit.
//!
//! # Example: one trial
//!
//! ```
//! use tpm_reconcile::session::{run_trial, SessionConfig};
//!
//! // The standard setup: K=10, N=15, b=4, Hebbian, 300-iteration cap.
//! let config = SessionConfig::default();
//! // With no channel noise the keys already agree: zero-cost success.
//! let free = run_trial(&config, 0.0, 7).unwrap();
//! assert!(free.success && free.total_iterations == 0);
//! // A noisy channel costs iterations (and may discard the frame).
//! let noisy = run_trial(&config, 0.05, 7).unwrap();
//! assert!(noisy.total_iterations > 0);
//! ```
//!
//! # Example: a tiny sweep
//!
//! ```
//! use tpm_reconcile::sweep::{render_csv, run_sweep, SweepSpec};
//!
//! let mut spec = SweepSpec::qber_sweep(vec![0.0, 0.02]);
//! spec.trials_per_point = 4;
//! let table = run_sweep(&spec).unwrap();
//! let csv = render_csv(&table);
//! assert_eq!(csv.lines().count(), 3); // header + one row per point
//! assert!(csv.starts_with("qber,trials,fer,"));
//! ```

pub mod adversary;
pub mod channel;
pub mod codec;
pub mod error;
pub mod metrics;
pub mod session;
pub mod sweep;
pub mod tpm;
pub mod wire;

pub use adversary::{passive_attack, EveReport, SessionRecord};
pub use channel::SeededRng;
pub use codec::BitString;
pub use error::{Error, Result};
pub use metrics::{entropy_loss, frame_error_rate, SweepPoint};
pub use session::{reconcile, run_trial, ReconciliationReport, SessionConfig};
pub use sweep::{run_sweep, SweepSpec, SweepTable};
pub use tpm::{LearningRule, TpmParams, WeightMatrix};
pub use wire::{run_peer, Role};
