pub mod driver;
pub mod error;
pub mod io;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod sim;
pub mod tables;
pub mod univariate;

pub use error::{Error, Result};
