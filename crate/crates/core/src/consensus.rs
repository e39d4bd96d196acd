//! Average consensus driven by the doubly stochastic formation protocol.
//!
//! Node values follow `x[k+1] = W[k] x[k]` while the weights `W[k]`
//! (self-weights included) adapt. Every `W[k]` is column stochastic, so the
//! sum of the values is preserved; once the weights become doubly
//! stochastic the values settle at the average of `x[0]`.

use crate::bistochastic::{algo2_round, initial_state, BistochasticParams};
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::metrics::WeightState;
use crate::scalar::Scalar;
use crate::trace::{StopReason, StopRule};

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRun<T> {
    /// Node values for rounds `0..=rounds`.
    pub trajectory: Vec<Vec<T>>,
    pub weights: WeightState<T>,
    pub stop_reason: StopReason,
    pub rounds: usize,
}

impl<T: Scalar> ConsensusRun<T> {
    pub fn final_values(&self) -> &[T] {
        self.trajectory.last().map_or(&[], Vec::as_slice)
    }
}

/// `W x` with `W` the full weight matrix: node `j` combines its own value
/// with weight `w_jj` and each in-neighbor's value with the edge weight.
pub fn mix<T: Scalar>(g: &Digraph, w: &WeightState<T>, x: &[T]) -> Vec<T> {
    (0..g.node_count())
        .map(|j| {
            let incoming: T = g
                .in_neighbors(j)
                .iter()
                .zip(g.in_edge_ids(j))
                .map(|(&i, &id)| w.edge_weights[id] * x[i])
                .sum();
            w.self_weight(j) * x[j] + incoming
        })
        .collect()
}

fn max_deviation<T: Scalar>(x: &[T], target: T) -> T {
    x.iter().map(|&v| (v - target).abs()).fold(T::zero(), T::max)
}

/// Runs consensus from `x0` until every value is within `stop.tol` of the
/// initial average.
pub fn consensus_run<T: Scalar>(
    g: &Digraph,
    params: &BistochasticParams<T>,
    x0: &[T],
    stop: &StopRule<T>,
) -> Result<ConsensusRun<T>> {
    params.validate(g)?;
    if x0.len() != g.node_count() {
        return Err(Error::InvalidParameter(format!(
            "expected {} initial values, got {}",
            g.node_count(),
            x0.len()
        )));
    }
    let mean = x0.iter().copied().sum::<T>() / T::from_count(x0.len());
    let mut w = initial_state(g, params)?;
    let mut x = x0.to_vec();
    let mut trajectory = vec![x.clone()];
    let mut rounds = 0;
    let stop_reason = loop {
        if max_deviation(&x, mean) <= stop.tol {
            break StopReason::Tolerance;
        }
        if rounds >= stop.max_rounds {
            break StopReason::RoundLimit;
        }
        x = mix(g, &w, &x);
        w = algo2_round(g, &w, params)?;
        trajectory.push(x.clone());
        rounds += 1;
    };
    Ok(ConsensusRun {
        trajectory,
        weights: w,
        stop_reason,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::fixtures::two_cycle;
    use crate::graph::random_strongly_connected;

    #[test]
    fn two_cycle_averages_in_one_step() {
        let g = two_cycle();
        let params = BistochasticParams::uniform(2, 0.5);
        let run = consensus_run(&g, &params, &[0.0, 1.0], &StopRule::default()).unwrap();
        assert_eq!(run.rounds, 1);
        assert_eq!(run.final_values(), &[0.5, 0.5]);
    }

    #[test]
    fn constant_values_stay_constant_at_the_fixed_point() {
        let g = two_cycle();
        let params = BistochasticParams::uniform(2, 0.5);
        let w = initial_state(&g, &params).unwrap();
        let x = vec![3.25, 3.25];
        assert_eq!(mix(&g, &w, &x), x);
        let run = consensus_run(&g, &params, &x, &StopRule::default()).unwrap();
        assert_eq!(run.rounds, 0);
    }

    #[test]
    fn sum_is_conserved_every_round() {
        let g = random_strongly_connected(10, 0.2, 5).unwrap();
        let params = BistochasticParams::uniform(10, 0.5);
        let x0: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin() * 4.0).collect();
        let run = consensus_run(&g, &params, &x0, &StopRule::new(1e-9, 100_000)).unwrap();
        assert_eq!(run.stop_reason, StopReason::Tolerance);
        let s0: f64 = x0.iter().sum();
        for x in &run.trajectory {
            assert_abs_diff_eq!(x.iter().sum::<f64>(), s0, epsilon = 1e-10 * s0.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_wrong_length() {
        let g = two_cycle();
        let params = BistochasticParams::uniform(2, 0.5);
        assert!(consensus_run(&g, &params, &[1.0], &StopRule::default()).is_err());
    }
}
