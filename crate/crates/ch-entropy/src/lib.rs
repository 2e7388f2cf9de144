//! Numerical geometry of complex hyperbolic space and its ideal boundary:
//! CR-volumes of horizontal submanifolds of odd spheres, Colding-Minicozzi
//! entropy of submanifolds of the ball, and the identities relating them.

pub mod ambient;
pub mod asymptotics;
pub mod crvolume;
pub mod entropy;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod models;
pub mod moebius;
pub mod zoo;

pub use error::{Error, Result};
