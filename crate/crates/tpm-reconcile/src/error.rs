//! Error type shared by every module in the crate.

use thiserror::Error;

/// Unified error for codec, protocol, and transport failures.
///
/// The CLI maps variants onto its documented exit codes: parameter,
/// codec, record, and handshake problems are usage errors (exit 1),
/// while frame, protocol, and transport problems abort a network
/// session (exit 3). A *discarded frame* — reconciliation that ran out
/// of iterations — is not an error at all; it is reported through
/// [`ReconciliationReport::success`](crate::session::ReconciliationReport).
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Bit-string/weight conversion failed (length, symbol, or range).
    #[error("codec error: {0}")]
    Codec(String),

    /// A session record is structurally unusable for replay.
    #[error("invalid session record: {0}")]
    Record(String),

    /// The peers disagreed on protocol parameters during HELLO.
    #[error("handshake mismatch: {0}")]
    HandshakeMismatch(String),

    /// A received frame violates the wire format.
    #[error("malformed frame: {0}")]
    Frame(String),

    /// A well-formed frame arrived out of order for the state machine.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// The underlying byte stream failed.
    #[error("transport error: {0}")]
    Transport(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
