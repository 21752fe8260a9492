//! Firefighter problem on trees: instances, LP relaxations solved exactly,
//! rounding schemes, gap generators and exact search oracles.

pub mod exact;
pub mod generators;
pub mod lp;
pub mod rational;
pub mod rounding;
pub mod simplex;
pub mod tree;

pub use rational::Rational;
pub use tree::{simulate, Instance, SavedSet, Strategy, TreeError, VertexId};
