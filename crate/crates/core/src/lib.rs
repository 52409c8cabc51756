//! Qualitative reachability for stochastic BPA games.

pub mod dfa;
pub mod format;
pub mod game;
pub mod gen;
pub mod linalg;
pub mod one;
pub mod pipeline;
pub mod play;
pub mod strategy;
pub mod termination;
pub mod transform;
pub mod zero;
