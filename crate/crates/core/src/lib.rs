pub mod channels;
pub mod cli;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod gauge;
pub mod groups;
pub mod linalg;
pub mod noise;
pub mod pauli;
pub mod protocols;
pub mod rng;
