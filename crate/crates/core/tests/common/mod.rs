//! Independent oracles shared by the integration tests. Nothing here calls
//! into the implementation paths it is used to check.
#![allow(dead_code)]

pub mod oracles;
pub mod random;
