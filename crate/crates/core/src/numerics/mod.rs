//! Small numerical kernels used by the model modules.

pub mod banded;
pub mod ode;
pub mod quad;
pub mod roots;

pub use banded::BandedLu;
pub use ode::rk4_step;
pub use quad::{integrate, QuadResult};
pub use roots::brent;
