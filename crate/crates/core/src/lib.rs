//! Learning transportation-network state from observed routes with
//! multi-agent inverse optimization.

pub mod data;
pub mod datasets;
pub mod error;
pub mod forward;
pub mod graph;
pub mod inverse;
pub mod io;
pub mod learner;
pub mod lp;
pub mod price;
pub mod scenario;

pub use error::{Error, Result};
