//! Simulation and finite-key-free security analysis of sending-or-not-sending
//! twin-field QKD with a measurement-device-independent, side-channel-free
//! source.
//!
//! - [`model`]: protocol and channel parameters, window classes.
//! - [`photonics`]: closed-form click probabilities at Charlie.
//! - [`simulator`]: sharded Monte Carlo over transmission windows.
//! - [`estimator`]: yield bounds, phase-flip bound, key rate, optimiser.
//! - [`oracle`]: brute-force checks in a truncated Fock space.

pub mod error;
pub mod estimator;
pub mod model;
pub mod oracle;
pub mod photonics;
pub mod simulator;

pub use error::{Error, Result};
pub use estimator::{
    analyze, estimate_bounds, evaluate, optimize, BoundSet, DetectorPair, KeyRateReport, OptimizeResult,
    Optimizer, OptimizerGrid, YieldSet,
};
pub use model::{
    ChannelParams, DetectorEvent, ModelOptions, PhaseFlipPrefactor, PhaseMode, ProtocolParams, WindowClass,
};
pub use simulator::{SimulationResult, Simulator, WindowTally};
