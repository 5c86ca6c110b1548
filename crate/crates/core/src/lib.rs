//! Character-level encoder-decoder models of German plural inflection.
//!
//! The crate covers the whole pipeline: corpus ingestion and encoding
//! ([`corpus`]), rule-based plural classes ([`morph`]), a small
//! reverse-mode autodiff engine with Adadelta ([`numerics`]), the
//! attention encoder-decoder with beam search ([`seq2seq`]) and the
//! training and wug-test measurement suite ([`experiments`]).

pub mod corpus;
pub mod error;
pub mod morph;
pub mod numerics;
pub mod seq2seq;
pub mod experiments;
mod util;

pub use error::{Error, Result};
pub use util::sha256_hex;
