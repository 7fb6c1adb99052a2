//! Anomaly detection and diagnosis for a small simulated process control
//! system.
//!
//! A blending-tank plant runs under PI control with a man-in-the-middle
//! layer on every sensor and actuator channel. A PCA model calibrated on
//! attack-free runs monitors the D (Hotelling T²) and Q (SPE) statistics
//! of both the controller view and the process view of all variables.
//! oMEDA contributions of each alarm are compared across the two views to
//! tell a physical disturbance from a manipulated channel.

pub mod bench;
pub mod channel;
pub mod control;
pub mod data;
pub mod error;
pub mod io;
pub mod mspc;
pub mod omeda;
pub mod plant;
pub mod sim;
pub mod svg;

pub use channel::{AttackKind, AttackSpec, Channel, ChannelBank, Direction};
pub use data::DataMatrix;
pub use error::{Error, Result};
pub use mspc::limits::{ControlLimits, LimitMethod};
pub use mspc::monitor::{compute_arl, monitor_stream, AlarmEvent, RunLength, StatPoint, Statistic, StreamMonitor, View};
pub use mspc::pca::{calibrate, PcaModel, RetainPolicy};
pub use mspc::MonitorBundle;
pub use omeda::{classify_event, diagnose_event, omeda, Classification, DiagnosisConfig, DiagnosisReport, DummyVector, OmedaVector};
pub use plant::{plant_step, PlantParams, PlantState};
pub use sim::{simulate_run, DisturbanceSpec, RunRecord, ScenarioConfig};
