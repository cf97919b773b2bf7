//! The two-process network protocol.
//!
//! [`frame`] defines the binary frame format and a strict codec for
//! it; [`peer`] drives a full reconciliation session over any
//! [`std::io::Read`] + [`std::io::Write`] stream (TCP in production,
//! loopback or in-memory pipes in tests).
//!
//! The networked protocol is observationally identical to the
//! in-process simulator: with the same keys and the same challenge
//! stream, both peers finish with the same report fields the
//! simulator produces, because every counter advances on the same
//! events. The only difference is how weight identity is checked —
//! the simulator compares weights directly, the peers compare SHA-256
//! digests so no weight ever crosses the wire.

pub mod frame;
pub mod peer;

pub use frame::{
    decode_frame, encode_frame, read_message, weight_digest, write_message, Message, Role, MAGIC,
    MAX_PAYLOAD, PROTOCOL_VERSION,
};
pub use peer::{accept_one, connect_retry, open_listener, run_peer, run_peer_tcp, session_id};
