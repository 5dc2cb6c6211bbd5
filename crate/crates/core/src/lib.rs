//! Rotating waves in nonlocal oscillatory media: kernel symbols, Hankel
//! transforms, Hopf normal forms, reduced profile solves and a 2-D simulator.

pub mod cli;
pub mod error;
pub mod field;
pub mod hankel;
pub mod kernel;
pub mod modes;
pub mod normalform;
pub mod rotwave;
pub mod simulate;

pub use error::{Error, Result};
