//! Simulation and evolutionary tuning of integer- and fractional-order PID
//! controllers for processes controlled over a lossy network with random
//! delays.
//!
//! The numeric core is generic over the scalar type ([`Scalar`], `f32` or
//! `f64`); the aliases below fix it to `f64` for everyday use. Time stamps
//! on the network side are always `f64` seconds.

// `!(a < b)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fractional;
pub mod network;
pub mod optimizers;
pub mod plants;
pub mod scalar;
pub mod seeding;
pub mod simloop;
pub mod statespace;
pub mod studies;

pub use error::{Error, Result};
pub use fractional::{
    filter_to_statespace, fopid_controller, oustaloup_filter, Band, ControllerParams, ControllerSpec, OustaloupConfig,
    RationalFilter,
};
pub use network::{
    audit_channel, channel_stats, Channel, ChannelConfig, ChannelLog, ChannelStats, DelayLaw, Link, Packet, TsoBuffer,
};
pub use optimizers::{
    de_optimize, ga_optimize, tune_controller, Algorithm, DeConfig, DeVariant, GaConfig, OptResult, SearchBox, TuneMode,
    TuneResult,
};
pub use plants::{make_fodup, make_foptd, make_sodup, DelayedRationalPlant, PlantPreset, PlantSpec, PlantState};
pub use scalar::Scalar;
pub use simloop::{
    cost, expected_cost, expected_cost_of, run_closed_loop, surface_sweep, CostBreakdown, CostWeights, ExpectedCost,
    SimConfig, StepInput, Trace, PENALTY,
};
pub use statespace::StateSpaceModel;

pub type StateSpace = StateSpaceModel<f64>;
pub type StateSpaceF32 = StateSpaceModel<f32>;
pub type Filter = RationalFilter<f64>;
pub type FilterF32 = RationalFilter<f32>;
pub type Params = ControllerParams<f64>;
pub type ParamsF32 = ControllerParams<f32>;
pub type Plant = DelayedRationalPlant<f64>;
pub type PlantF32 = DelayedRationalPlant<f32>;
pub type SimTrace = Trace<f64>;
pub type SimTraceF32 = Trace<f32>;
pub type Cost = CostBreakdown<f64>;
pub type Weights = CostWeights<f64>;
pub type Box64 = SearchBox<f64>;
pub type Optimum = OptResult<f64>;
