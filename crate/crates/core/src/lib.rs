//! Workbench for hybrid model-based + domain-randomized reinforcement
//! learning control of a nonlinear backlash powertrain.
//!
//! The crate simulates the uncertain three-mass driveline, synthesizes the
//! nominal linear controller, trains an LSTM-DDPG agent under randomized
//! dynamics, and evaluates the hybrid controller against baselines.

pub mod config;
pub mod ddpg;
pub mod error;
pub mod eval;
pub mod lmdp;
pub mod mbc;
pub mod nn;
pub mod numerics;
pub mod plant;
pub mod textdoc;

pub use error::{Error, Result};
pub use numerics::{Matrix, OuProcess, SeededRng};
pub use plant::{PlantParams, PlantState};
