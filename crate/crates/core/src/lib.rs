//! Sound source localization and tracking toolkit.

pub mod corpus_io;
mod error;
pub mod evaluate;
pub mod geometry;
pub mod localize;
pub mod pipeline;
pub mod sigproc;
pub mod simulate;
pub mod track;

#[cfg(test)]
mod test_support;

pub use error::{Error, Result};
