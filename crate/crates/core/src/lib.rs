//! Multi-objective curriculum reinforcement learning for inverse molecular design.

pub mod cli;
pub mod curriculum;
pub mod descriptors;
pub mod evaluation;
pub mod neural;
pub mod rl;
pub mod seed;
pub mod smiles;
pub mod training;
