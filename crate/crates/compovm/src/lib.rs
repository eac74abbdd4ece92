//! File formats, type-path loading and the `compovm` command line on top of
//! [`compovm_core`].

pub mod cli;
pub mod source;
pub mod textio;

pub use source::FileSource;
