//! Single-cell mmWave downlink simulator with joint adaptive beamwidth and
//! subband allocation under user position uncertainty.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`). The `*64` aliases below fix it to `f64`, which is what
//! the command-line tool uses.

// `!(x > 0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod channel;
pub mod config;
pub mod geometry;
pub mod report;
pub mod scalar;
pub mod simulator;

pub use allocator::{
    allocate, check_constraints, AllocationMatrix, AllocatorError, Policy, QosConfig, System,
    UserClass,
};
pub use channel::{mainlobe_gain, noise_power_dbm, pathloss_db, ChannelError, LinkBudget};
pub use config::{load_config, ConfigError, ConfigFile};
pub use geometry::{BeamGrid, BeamId, CellConfig, GeometryError, Position};
pub use report::{emit_results, ReportError, RunManifest};
pub use scalar::Real;
pub use simulator::{
    run_campaign, run_frame, AggregateMetrics, Arm, CampaignConfig, FrameMetrics, Scheme, SimError,
};

pub type Position64 = Position<f64>;
pub type CellConfig64 = CellConfig<f64>;
pub type BeamGrid64 = BeamGrid<f64>;
pub type LinkBudget64 = LinkBudget<f64>;
pub type QosConfig64 = QosConfig<f64>;
pub type System64 = System<f64>;
pub type Policy64 = Policy<f64>;
pub type Allocation64 = allocator::Allocation<f64>;
pub type Arm64 = Arm<f64>;
pub type CampaignConfig64 = CampaignConfig<f64>;
pub type FrameMetrics64 = FrameMetrics<f64>;
pub type AggregateMetrics64 = AggregateMetrics<f64>;
