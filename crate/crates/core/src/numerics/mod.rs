//! Generic numerical building blocks.

pub mod fd;
pub mod jet;
pub mod quad;
pub mod roots;

pub use jet::Jet;
