//! Pyramid-encoder sequence-to-sequence models for source code repair.

pub mod attention;
pub mod codetok;
pub mod error;
pub mod harness;
pub mod model;
pub mod rnn;
pub mod corpus;
pub mod decode;
pub mod seqcore;
pub mod transfer;
pub mod xformer;

pub use error::{Error, Result};
