//! Diffusion-based reverse auctions on invitation networks.

pub mod error;
pub mod forward;
pub mod fuzz;
pub mod heterogeneous;
pub mod homogeneous;
pub mod io;
pub mod mechanism;
pub mod model;
pub mod money;
pub mod network;
pub mod oracles;
pub mod par;
pub mod sim;

pub use error::{Error, Result};
pub use money::Money;
