//! Hybrid spreadsheet/compute-kernel library.
//!
//! A workbook cell grid is linked to a matrix workspace through a fixed
//! protocol of link-management and data-management calls. Commands run in
//! a small interpreter with statistical and financial builtins, including
//! a mean-variance efficient-frontier optimizer, and every bridge call is
//! recorded in a hash-chained, replayable audit trail.

pub mod audit;
pub mod bridge;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod optim;
pub mod value;
pub mod workbook;

pub use error::{Error, Result};
pub use value::{Matrix, Value};
