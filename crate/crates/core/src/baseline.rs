//! Imbalance-correcting comparison protocol.
//!
//! Every node with positive imbalance `x_j = S-_j - S+_j` adds all of it to
//! its lightest outgoing edge (ties go to the smallest destination id).
//! Nodes with `x_j <= 0` do nothing. Rounds are synchronous, so all nodes
//! read the same snapshot. Weights only ever grow.

use crate::error::{Error, Result};
use crate::graph::{is_strongly_connected, Digraph};
use crate::metrics::{absolute_balance, imbalances, WeightState};
use crate::scalar::Scalar;
use crate::trace::{iterate, Observation, RunTrace, StopRule};

pub const ALGORITHM_ID: &str = "baseline";

pub fn imbalance_correcting_round<T: Scalar>(g: &Digraph, w: &WeightState<T>) -> WeightState<T> {
    let x = imbalances(g, w);
    let mut next = w.edge_weights.clone();
    for (j, &xj) in x.iter().enumerate() {
        if xj <= T::zero() {
            continue;
        }
        // out-edge ids are ordered by destination, so the first minimum wins ties
        let lightest = g
            .out_edge_ids(j)
            .reduce(|best, id| {
                if w.edge_weights[id] < w.edge_weights[best] {
                    id
                } else {
                    best
                }
            });
        if let Some(id) = lightest {
            next[id] += xj;
        }
    }
    WeightState {
        edge_weights: next,
        self_weights: None,
    }
}

/// Runs the baseline from unit weights.
pub fn run_imbalance_correcting<T: Scalar>(
    g: &Digraph,
    stop: &StopRule<T>,
) -> Result<(WeightState<T>, RunTrace<T>)> {
    if let Some(j) = g.find_sink() {
        return Err(Error::NoOutNeighbors(j));
    }
    if !is_strongly_connected(g) {
        return Err(Error::NotStronglyConnected);
    }
    iterate(
        ALGORITHM_ID,
        stop,
        WeightState::uniform(g, T::one()),
        |w| Observation {
            epsilon: absolute_balance(g, w),
            ab: None,
        },
        |w| Ok((imbalance_correcting_round(g, w), None)),
    )
}
