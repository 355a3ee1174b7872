//! Continuous downscaling of coarse ensemble forecasts with a score-based
//! diffusion model: synthetic data world, from-scratch autodiff and UNet,
//! reverse-SDE/ODE samplers, and a full forecast verification suite.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod sampler;
pub mod scorenet;
pub mod sde;
pub mod seed;
pub mod synthdata;
pub mod tensorad;
pub mod verify;

pub use error::{Error, Result};
