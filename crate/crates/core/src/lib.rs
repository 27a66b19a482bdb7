//! Mixed-initiative room design: a constrained MAP-Elites engine generates
//! room suggestions while a small neural preference model, trained from the
//! suggestions a designer applies, is blended into the fitness function.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod level;
pub mod preference;
pub mod session;
pub mod sim;
