//! Order reduction of LQG controllers by balanced and modal truncation, with
//! closed-loop stability and LQG-cost certificates for the reduced controller.
//!
//! The guide in `book/` walks through each module; its code blocks are
//! compiled and run as doctests of this crate.

pub mod certify;
pub mod decompose;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod norms;
pub mod poly;
pub mod polezero;
pub mod reduce;
pub mod tol;

pub use error::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type C64 = nalgebra::Complex<f64>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    mod systems {}
    #[doc = include_str!("../../../book/src/norms.md")]
    mod norms {}
    #[doc = include_str!("../../../book/src/balanced.md")]
    mod balanced {}
    #[doc = include_str!("../../../book/src/modal.md")]
    mod modal {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/polezero.md")]
    mod polezero {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
