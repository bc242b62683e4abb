//! Para-Kähler warped-product geometry.
//!
//! Layers, bottom up: [`paracomplex`] scalars, [`jets`] for exact second
//! derivatives, [`geometry`] for neutral metric calculus, [`submanifold`] for
//! immersion analysis and [`catalog`] for the concrete immersions, warping
//! functions and PDE solutions.

pub mod catalog;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod paracomplex;
pub mod sampling;
pub mod submanifold;
