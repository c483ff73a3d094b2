pub mod control;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod multibody_dynamics;
pub mod params;
pub mod set_arithmetic;

pub use error::*;
pub use params::ModelParams;

/// The guide in `book/`, compiled so its snippets run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub mod intro {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod dynamics {}
    #[doc = include_str!("../../../book/src/sets.md")]
    pub mod sets {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    pub mod estimation {}
    #[doc = include_str!("../../../book/src/control.md")]
    pub mod control {}
    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
