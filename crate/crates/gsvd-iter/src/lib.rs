pub mod analysis;
pub mod cli;
pub mod deflation;
pub mod dense;
pub mod error;
pub mod gdgsvd;
pub mod mdgsvd;
pub mod operator;
pub mod problems;
pub mod regularization;

pub use error::{GsvdError, Result};
