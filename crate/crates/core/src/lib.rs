pub mod error;
pub mod eval;
pub mod files;
pub mod ingest;
pub mod lm;
pub mod masker;
pub mod objective;
pub mod retrieval;
pub mod sampler;
pub mod vocab;
pub mod weighted;

pub use error::{Error, Result};
