//! Protocol specification toolchain: a fixed-format XML protocol database,
//! an executability analyzer and a Tamarin back-end.

pub mod diagnostic;
pub mod model;
pub mod xml;
pub mod analysis;
pub mod tamarin;
pub mod plugin;
pub mod pipeline;
pub mod store;
pub mod fixtures;
