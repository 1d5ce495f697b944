//! Layers, network assemblies and gradient checking.

pub mod gradcheck;
pub mod layers;
pub mod networks;

pub use layers::{Activation, ActivationKind, BatchNorm, Linear, Mode, Param, Parameters};
pub use networks::{Discriminator, Generator, NetConfig, ResidualBlock, GENERATOR_BN_EPS};
