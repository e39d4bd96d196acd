//! Distributed weight balancing and doubly stochastic matrix formation on
//! strongly connected digraphs.
//!
//! Every node adapts the weights on its outgoing edges using only the total
//! weight it receives from its in-neighbors. Two protocols are provided:
//!
//! * [`balancer`]: drives the digraph to a weight-balanced state (in-weight
//!   equals out-weight at every node) with a per-node step size `beta_j`.
//! * [`bistochastic`]: additionally assigns self-weights so the weighted
//!   adjacency matrix stays column stochastic at every round and converges to
//!   a doubly stochastic matrix.
//!
//! The [`spectral`] module builds the linear update matrix behind the first
//! protocol and predicts its geometric convergence rate from the second
//! largest eigenvalue modulus. [`baseline`] holds an imbalance-correcting
//! comparison protocol and [`experiment`] runs seeded batches.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the batch
//! harness and CLI use.

pub mod balancer;
pub mod baseline;
pub mod bistochastic;
pub mod consensus;
pub mod eigen;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod spectral;
pub mod trace;

pub use balancer::{BalancerParams, BetaPolicy};
pub use bistochastic::{Algo2Mode, BetaRule, BistochasticParams};
pub use error::{Error, Result};
pub use graph::Digraph;
pub use linalg::SquareMatrix;
pub use metrics::WeightState;
pub use scalar::Scalar;
pub use spectral::{SpectralReport, UpdateMatrix};
pub use trace::{RunTrace, StopReason, StopRule, TraceRecord};

pub type WeightState64 = WeightState<f64>;
pub type WeightState32 = WeightState<f32>;
pub type BalancerParams64 = BalancerParams<f64>;
pub type BistochasticParams64 = BistochasticParams<f64>;
pub type RunTrace64 = RunTrace<f64>;
pub type StopRule64 = StopRule<f64>;
pub type UpdateMatrix64 = UpdateMatrix<f64>;
pub type SpectralReport64 = SpectralReport<f64>;
pub type SquareMatrix64 = SquareMatrix<f64>;

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::graph::{parse_edge_list, Digraph};

    /// 4-node weight-balanceable digraph whose balanced weights are known
    /// in closed form (10/7 on the out-edges of nodes 0 and 1, 5/7 on the
    /// rest).
    pub fn four_node() -> Digraph {
        parse_edge_list("4\n0 1\n1 2\n2 0\n2 3\n3 0").unwrap()
    }

    pub fn two_cycle() -> Digraph {
        parse_edge_list("2\n0 1\n1 0").unwrap()
    }

    /// Every directed cycle has even length, so the update matrix with all
    /// step sizes equal to 1 is periodic.
    pub fn even_cycles() -> Digraph {
        parse_edge_list("4\n0 1\n1 2\n2 3\n3 0\n0 3").unwrap()
    }
}
