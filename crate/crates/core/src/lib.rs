//! Core library for `mrdo`: a simulator and property certifier for distributed
//! optimization algorithms viewed as multi-rate feedback control systems.
//!
//! The model is a network of `N` agents coupled by two feedback loops acting on
//! the stacked state `y = [x; v]` (plus a local-only state `z`):
//!
//! * a *global* loop (communication): a linear operator built from a gossip
//!   mixing matrix that pushes the stack toward consensus, and
//! * a *local* loop (computation): a per-agent map of `(x_i, v_i, z_i)` and the
//!   local objective `f_i` that pushes the average toward stationarity.
//!
//! Both loops may run in continuous time, or be sampled with independent
//! zero-order-hold periods (`tau_g` for communication, `tau_l` for
//! computation). The crate provides:
//!
//! * [`graph`]: topologies, incidence and mixing matrices, spectral gaps;
//! * [`problem`]: local objectives (quadratic, nonconvex-regularized logistic)
//!   and the stationarity gap;
//! * [`controllers`]: global/local controller constructors plus a catalog of
//!   named algorithms (`dgd`, `dgt`, `next`, `dlm`, `fedprox`, `fedpd`,
//!   `fedavg`, `scaffold`, `xfilter`, `dgpda`, `pi`, `d_fedgt`, `d_agt`);
//! * [`simulator`]: continuous (RK4) and sampled/discrete integrators with
//!   trace recording;
//! * [`diagnostics`]: sampling-based certificates for the controller
//!   properties, energy-descent checks, and log-log rate fits;
//! * [`bounds`]: sampling-period budgets that keep the convergence
//!   certificate positive;
//! * [`config`]: serde schemas for experiment configs and results.

pub mod bounds;
pub mod config;
pub mod controllers;
pub mod diagnostics;
pub mod graph;
pub mod problem;
pub mod simulator;

pub use bounds::{ContinuousRates, DiscretizationBudget};
pub use config::ExperimentConfig;
pub use controllers::{AlgorithmDescriptor, GlobalController, LocalController};
pub use diagnostics::{PropertyCertificate, RateEstimate};
pub use graph::{IncidenceMatrix, MixingMatrix, SpectralInfo, Topology};
pub use problem::{LocalObjective, ObjectiveSuite, StationarityReport};
pub use simulator::{DiscretizationScheme, GainSchedule, RunOutcome, StackedState, Trace};
