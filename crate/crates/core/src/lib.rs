pub mod combinatorics;
pub mod cumulants;
pub mod error;
pub mod feller;
pub mod laguerre;
pub mod simulate;
mod sum;
pub mod table;

pub use error::{FptError, Result};
