pub mod bvh;
pub mod error;
pub mod fd;
pub mod geom;
pub mod mesh;
pub mod ode;
pub mod reflect;
pub mod rings;
pub mod spanner;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
