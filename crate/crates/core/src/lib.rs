pub mod bench;
pub mod bounds;
pub mod data;
pub mod datagen;
pub mod error;
pub mod gosvm;
pub mod kernels;
pub mod modelsel;
pub mod nusvm;
pub mod ordermetrics;
pub mod qp;

pub use error::{Error, Result};
