//! Translation-process classification for English-French phrase pairs.

pub mod config;
pub mod corpus;
pub mod resources;
pub mod features;
pub mod classic_ml;
pub mod evaluation;
pub mod optim;
pub mod rng;
pub mod neural;
pub mod synth;
