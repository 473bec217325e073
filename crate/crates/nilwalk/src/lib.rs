//! Random walks on simply connected nilpotent Lie groups, their diffusion
//! limits and the statistics used to compare the two.
//!
//! A group is given by its Lie algebra in a Malcev-type basis; the product is
//! the truncated BCH series. Walks are driven by an [`measure::IncrementMeasure`]
//! and rescaled along the weight filtration of the bias direction.
//!
//! The guide in `book/` walks through the pieces with runnable snippets.

pub mod algebra;
pub mod batch;
pub mod bch;
pub mod decomposition;
pub mod diffusion;
pub mod error;
pub mod filtration;
pub mod hall;
pub mod levy;
pub mod linalg;
pub mod measure;
pub mod presets;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod support;
pub mod walk;

pub use algebra::LieAlgebra;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/algebras.md")]
    mod algebras {}
    #[doc = include_str!("../../../book/src/filtrations.md")]
    mod filtrations {}
    #[doc = include_str!("../../../book/src/walks.md")]
    mod walks {}
    #[doc = include_str!("../../../book/src/diffusion.md")]
    mod diffusion {}
    #[doc = include_str!("../../../book/src/limits.md")]
    mod limits {}
    #[doc = include_str!("../../../book/src/support.md")]
    mod support {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
