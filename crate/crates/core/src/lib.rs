pub mod bitplane;
pub mod chunk;
pub mod container;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod pipeline;
pub mod transform;

pub use error::{Error, Result};
