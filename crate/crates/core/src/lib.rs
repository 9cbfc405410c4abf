pub mod corpus;
pub mod dialog_embed;
pub mod disentangler;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod pairmodel;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
