//! Directed polymers in random environments on supercritical Bernoulli bond
//! percolation clusters.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] and [`percolation`]: finite boxes of `Z^d`, bit-packed bond
//!   configurations, cluster labeling and conditioning on the origin.
//! * [`tubes`]: open / good tubes, the tube-density statistic and its
//!   concentration experiment.
//! * [`disorder`]: space-time environments, log-moment generating functions
//!   and exponentially tilted fields.
//! * [`walk`]: the random walk on the cluster, tube-dwelling detection and
//!   exact killed-walk dynamic programs.
//! * [`polymer`]: exact transfer-operator computation of the normalized
//!   partition function and the experiments built on it.
//!
//! Every random quantity is a pure function of an explicit 64-bit seed (see
//! [`rng`]), so experiments are reproducible bit for bit and can be coupled
//! across parameters.

pub mod disorder;
pub mod error;
pub mod lattice;
pub mod percolation;
pub mod polymer;
pub mod rng;
pub mod stats;
pub mod tubes;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::{Direction, LatticeBox, Parity};
pub use percolation::{BondConfig, ClusterGraph, ClusterLabeling, ConditionedSample, Realization};
