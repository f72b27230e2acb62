pub mod atom;
pub mod breit_rabi;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod exec;
pub mod matrix;
pub mod phase;
pub mod raman;
pub mod readout;
pub mod spinops;
pub mod units;
pub mod universality;

pub use error::{QuditError, Result};
pub use exec::Execution;
pub use matrix::{ComplexMatrix, C64};
