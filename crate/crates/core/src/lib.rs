//! Hybrid hypervolume maximization for bi-objective box-constrained problems.
//!
//! Points are added one at a time. Each new point is chosen to maximize its
//! exclusive hypervolume contribution with respect to the points already
//! found, starting from a point that is non-dominated and strictly improves
//! the set. Local refinement uses a projected quasi-Newton method; a
//! mutation-based explorer takes over once geometric exploration runs dry.

pub mod boxmin;
pub mod error;
pub mod h2ma;
pub mod harness;
pub mod hypervolume;
pub mod moo;
pub mod zdt;

pub use error::{Error, Result};
pub use moo::{Archive, ArchiveEntry, Bounds, Candidate, Evaluation, Evaluator, ObjectiveVector, Phase, Problem};
pub use zdt::{Zdt, ZdtKind};

// the guide's code blocks run as doctests
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hypervolume.md")]
    mod hypervolume {}
    #[doc = include_str!("../../../book/src/zdt.md")]
    mod zdt {}
    #[doc = include_str!("../../../book/src/minimizer.md")]
    mod minimizer {}
    #[doc = include_str!("../../../book/src/algorithm.md")]
    mod algorithm {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
