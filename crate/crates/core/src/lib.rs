//! Finitely generated R-forests with 1-1-Lipschitz binary predicates.
//!
//! Everything is computed in exact rational arithmetic.

// Distance matrices are indexed on both axes; index loops read better.
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod distortion;
pub mod extension;
pub mod gen;
pub mod heart;
pub mod hull;
pub mod io;
pub mod metric;
pub mod model;
pub mod predicate;
pub mod rational;

pub use hull::{build_hull, free_amalgam, ForestHull, HullError, PointRef, SubHull};
pub use metric::{ExtDist, FiniteMetric};
pub use predicate::{Anchor, AnchorPredicate, RfrStructure};
pub use rational::Rat;
