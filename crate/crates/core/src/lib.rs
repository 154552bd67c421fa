//! Fountain codes built from a `(2, d_c)`-regular non-binary LDPC pre-code
//! over GF(2^m) followed by an endless stream of multiplicative repetitions.
//!
//! * [`gf`]: field arithmetic.
//! * [`precode`]: construction, encoding and serialisation of the pre-code.
//! * [`fountain`]: the seekable output stream.
//! * [`channel`]: erasure and BI-AWGN channels.
//! * [`spdecoder`]: sum-product decoding over GF(2^m).
//! * [`deanalysis`]: density evolution and asymptotic overhead thresholds.
//! * [`harness`]: trials, overhead histograms and block-error sweeps.

pub mod channel;
pub mod deanalysis;
pub mod fountain;
pub mod gf;
pub mod harness;
pub mod precode;
pub mod spdecoder;
pub mod transform;

pub use channel::{ChannelModel, Observation, Posterior};
pub use fountain::{OutputTriple, StreamSpec};
pub use gf::{Field, Symbol};
pub use precode::{CodeParams, Codeword, ParityCheckCode};
pub use spdecoder::{CollectedOutputs, DecodeResult, SpDecoder};
