//! Random linear network coding for REST request/response exchanges.
//!
//! The client layer ([`client`]) buffers requests and sends random linear
//! combinations of them over GF(2^8) ([`gf256`], [`codec`]). The server layer
//! ([`server`]) keeps a decoding matrix in reduced row-echelon form, answers
//! every arrival with its newest seen and unseen IDs, and delivers requests
//! as they decode. [`sim`] runs the protocol and a plain-REST baseline over a
//! lossy channel; [`analysis`] holds the closed-form expectations the
//! simulator is checked against.

pub mod analysis;
pub mod client;
pub mod codec;
pub mod gf256;
pub mod idset;
pub mod scenario;
pub mod server;
pub mod sim;

pub use client::{ClientConfig, ClientError, ClientSession, CoefficientSource, ScriptedCoefficients, SeededCoefficients};
pub use codec::{combine, prune, CodecError, CodedMessage, CodingHeader, MessageId, NativeMessage, NcResponse};
pub use gf256::Gf256;
pub use idset::IdSet;
pub use server::{DecodingMatrix, Insertion, Receipt, ServerError, ServerSession};
pub use sim::{LossModel, Mode, SimConfig, SimError, SimResult};
