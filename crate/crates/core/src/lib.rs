pub mod dynamics;
pub mod error;
pub mod fock;
pub mod gates;
pub mod integrate;
pub mod kerr;
pub mod optim;
pub mod oracles;
pub mod pulseopt;
pub mod rqr;

pub use error::{Error, Result};
