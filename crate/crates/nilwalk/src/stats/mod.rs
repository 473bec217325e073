//! Distribution distances, normality tests, Berry–Esseen curves, local limit
//! ratios and the asymptotic closeness test.

mod distance;
mod functions;
mod limits;

pub use distance::*;
pub use functions::{expectation, levy_expectation, Factor, TestFunction};
pub use limits::*;
