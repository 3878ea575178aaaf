pub mod autoencoder;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gan;
pub mod latent;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod rng;
pub mod tensor;
pub use error::{Error, Result};
