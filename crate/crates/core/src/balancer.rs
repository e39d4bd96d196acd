//! Distributed weight balancing with constant per-node step sizes.
//!
//! Every node `j` starts with weight 1 on each outgoing edge. In every
//! synchronous round it moves each outgoing weight a fraction `beta_j` of
//! the way toward its in-weight split evenly over its out-degree:
//!
//! ```text
//! w_lj <- w_lj + beta_j * (S-_j / D+_j - w_lj)
//! ```
//!
//! All outgoing edges of a node stay equal, so the per-node values evolve
//! linearly as `w <- P w` with the update matrix of
//! [`build_update_matrix`](crate::spectral::build_update_matrix). The weights
//! converge to a weight-balanced assignment whenever the digraph is strongly
//! connected and at least one `beta_j < 1`.

use crate::error::{Error, Result};
use crate::graph::{is_strongly_connected, Digraph};
use crate::metrics::{absolute_balance, in_weights, WeightState};
use crate::scalar::Scalar;
use crate::trace::{iterate, Observation, RunTrace, StopRule};

pub const ALGORITHM_ID: &str = "algo1";

/// Admissible range of the step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaPolicy {
    /// Every `beta_j` in the open interval `(0, 1)`.
    Strict,
    /// `beta_j` in `(0, 1]` with at least one strictly below 1, which keeps
    /// the update matrix primitive.
    #[default]
    Primitive,
    /// Any `beta_j` in `(0, 1]`, including all equal to 1. Convergence is
    /// then not guaranteed.
    Permissive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancerParams<T> {
    pub beta: Vec<T>,
    pub policy: BetaPolicy,
    /// Run on digraphs that are not strongly connected (each strongly
    /// connected piece balances on its own). Every node still needs an
    /// outgoing edge.
    pub allow_disconnected: bool,
}

impl<T: Scalar> BalancerParams<T> {
    pub fn new(beta: Vec<T>, policy: BetaPolicy) -> Self {
        BalancerParams {
            beta,
            policy,
            allow_disconnected: false,
        }
    }

    pub fn uniform(n: usize, beta: T) -> Self {
        Self::new(vec![beta; n], BetaPolicy::default())
    }

    pub fn validate(&self, g: &Digraph) -> Result<()> {
        let n = g.node_count();
        if self.beta.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} step sizes, got {}",
                self.beta.len()
            )));
        }
        let one = T::one();
        for (j, &b) in self.beta.iter().enumerate() {
            let ok = match self.policy {
                BetaPolicy::Strict => b > T::zero() && b < one,
                BetaPolicy::Primitive | BetaPolicy::Permissive => b > T::zero() && b <= one,
            };
            if !ok {
                let range = if self.policy == BetaPolicy::Strict {
                    "(0, 1)"
                } else {
                    "(0, 1]"
                };
                return Err(Error::InvalidParameter(format!(
                    "beta of node {j} is {b}, must lie in {range}"
                )));
            }
        }
        if self.policy == BetaPolicy::Primitive && self.beta.iter().all(|&b| b >= one) {
            return Err(Error::InvalidParameter(
                "at least one beta must be strictly below 1 for the update matrix to be \
                 primitive (use the permissive policy to run anyway)"
                    .into(),
            ));
        }
        if let Some(j) = g.find_sink() {
            return Err(Error::NoOutNeighbors(j));
        }
        if !self.allow_disconnected && !is_strongly_connected(g) {
            return Err(Error::NotStronglyConnected);
        }
        Ok(())
    }
}

/// Weight 1 on every edge.
pub fn init_unit_weights<T: Scalar>(g: &Digraph) -> WeightState<T> {
    WeightState::uniform(g, T::one())
}

/// Moves every outgoing weight of `j` a fraction `step(j)` toward
/// `S-_j / D+_j`, reading all in-weights from the same snapshot.
pub(crate) fn proportional_update<T: Scalar>(
    g: &Digraph,
    w: &WeightState<T>,
    s_minus: &[T],
    step: impl Fn(usize) -> T,
) -> Result<Vec<T>> {
    let mut next = w.edge_weights.clone();
    for (j, &sm) in s_minus.iter().enumerate().take(g.node_count()) {
        let d = g.out_degree(j);
        if d == 0 {
            return Err(Error::NoOutNeighbors(j));
        }
        let target = sm / T::from_count(d);
        let b = step(j);
        for id in g.out_edge_ids(j) {
            next[id] = w.edge_weights[id] + b * (target - w.edge_weights[id]);
        }
    }
    Ok(next)
}

/// One synchronous round.
pub fn algo1_round<T: Scalar>(
    g: &Digraph,
    w: &WeightState<T>,
    params: &BalancerParams<T>,
) -> Result<WeightState<T>> {
    if params.beta.len() != g.node_count() {
        return Err(Error::InvalidParameter(format!(
            "expected {} step sizes, got {}",
            g.node_count(),
            params.beta.len()
        )));
    }
    let s_minus = in_weights(g, w);
    let edge_weights = proportional_update(g, w, &s_minus, |j| params.beta[j])?;
    Ok(WeightState {
        edge_weights,
        self_weights: None,
    })
}

/// Iterates [`algo1_round`] from unit weights until the absolute balance is
/// within `stop.tol` or `stop.max_rounds` rounds have run.
pub fn run_algo1<T: Scalar>(
    g: &Digraph,
    params: &BalancerParams<T>,
    stop: &StopRule<T>,
) -> Result<(WeightState<T>, RunTrace<T>)> {
    params.validate(g)?;
    iterate(
        ALGORITHM_ID,
        stop,
        init_unit_weights(g),
        |w| Observation {
            epsilon: absolute_balance(g, w),
            ab: None,
        },
        |w| Ok((algo1_round(g, w, params)?, None)),
    )
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::fixtures::{even_cycles, four_node, two_cycle};
    use crate::graph::parse_edge_list;
    use crate::metrics::{imbalances, total_mass};

    #[test]
    fn unit_initialization() {
        let g = four_node();
        let w: WeightState<f64> = init_unit_weights(&g);
        assert_eq!(w.edge_weights, vec![1.0; 5]);
        assert!(w.self_weights.is_none());
        assert!(w.is_node_uniform(&g));

        let g = two_cycle();
        let w: WeightState<f64> = init_unit_weights(&g);
        assert_eq!(absolute_balance(&g, &w), 0.0);
    }

    #[test]
    fn one_round_by_hand() {
        let g = four_node();
        let p = BalancerParams::uniform(4, 0.5);
        let w = algo1_round(&g, &init_unit_weights(&g), &p).unwrap();
        assert_eq!(w.node_value(&g, 0), 1.5);
        assert_eq!(w.node_value(&g, 2), 0.75);
        assert_eq!(w.weight(&g, 2, 3), Some(0.75));
        assert!(w.is_node_uniform(&g));
    }

    #[test]
    fn balanced_state_is_fixed() {
        let g = four_node();
        let w = WeightState::from_node_values(&g, &[2.0, 2.0, 1.0, 1.0]);
        assert_eq!(absolute_balance(&g, &w), 0.0);
        let p = BalancerParams::uniform(4, 0.3);
        assert_eq!(algo1_round(&g, &w, &p).unwrap(), w);
    }

    #[test]
    fn converges_to_closed_form_fixed_point() {
        let g = four_node();
        for beta in [0.1, 0.5, 0.9] {
            let (w, trace) =
                run_algo1(&g, &BalancerParams::uniform(4, beta), &StopRule::default()).unwrap();
            assert!(trace.converged());
            for (j, expected) in [10.0 / 7.0, 10.0 / 7.0, 5.0 / 7.0, 5.0 / 7.0]
                .into_iter()
                .enumerate()
            {
                assert_abs_diff_eq!(w.node_value(&g, j), expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mass_is_conserved() {
        let g = four_node();
        let beta = vec![0.2, 0.7, 0.4, 0.9];
        let p = BalancerParams::new(beta.clone(), BetaPolicy::Strict);
        let mut w = init_unit_weights::<f64>(&g);
        let m0 = total_mass(&g, &w, &beta).unwrap();
        for _ in 0..200 {
            w = algo1_round(&g, &w, &p).unwrap();
            let m = total_mass(&g, &w, &beta).unwrap();
            assert!((m - m0).abs() <= 1e-12 * m0);
            assert!(w.edge_weights.iter().all(|&x| x > 0.0));
            assert!(imbalances(&g, &w).iter().sum::<f64>().abs() <= 1e-12);
        }
    }

    #[test]
    fn policy_validation() {
        let g = four_node();
        let all_one = BalancerParams::uniform(4, 1.0);
        let err = all_one.validate(&g).unwrap_err();
        assert!(err.to_string().contains("strictly below 1"), "{err}");

        let mut permissive = all_one.clone();
        permissive.policy = BetaPolicy::Permissive;
        permissive.validate(&g).unwrap();

        let mixed = BalancerParams::new(vec![0.9, 1.0, 1.0, 1.0], BetaPolicy::Primitive);
        mixed.validate(&g).unwrap();
        let mut strict = mixed.clone();
        strict.policy = BetaPolicy::Strict;
        assert!(strict.validate(&g).is_err());

        assert!(BalancerParams::uniform(4, 0.0).validate(&g).is_err());
        assert!(BalancerParams::uniform(4, 1.2).validate(&g).is_err());
        assert!(BalancerParams::uniform(3, 0.5).validate(&g).is_err());
    }

    #[test]
    fn connectivity_requirements() {
        let disjoint = parse_edge_list("4\n0 1\n1 0\n2 3\n3 2").unwrap();
        let mut p = BalancerParams::uniform(4, 0.5);
        assert!(matches!(p.validate(&disjoint), Err(Error::NotStronglyConnected)));
        p.allow_disconnected = true;
        let (_, trace) = run_algo1(&disjoint, &p, &StopRule::default()).unwrap();
        assert!(trace.converged());

        let sink = parse_edge_list("3\n0 1\n1 2\n0 2").unwrap();
        let p = BalancerParams::uniform(3, 0.5);
        assert!(matches!(p.validate(&sink), Err(Error::NoOutNeighbors(2))));
    }

    #[test]
    fn periodic_counterexample_does_not_settle() {
        let g = even_cycles();
        let mut p = BalancerParams::uniform(4, 1.0);
        p.policy = BetaPolicy::Permissive;
        let (_, trace) = run_algo1(&g, &p, &StopRule::new(1e-10, 2_000)).unwrap();
        assert!(!trace.converged());
        assert!(trace.epsilons().iter().all(|&e| e > 0.1));

        p.beta[0] = 0.9;
        let (_, trace) = run_algo1(&g, &p, &StopRule::new(1e-10, 10_000)).unwrap();
        assert!(trace.converged());
    }

    #[test]
    fn works_in_single_precision() {
        let g = four_node();
        let (w, trace) = run_algo1(
            &g,
            &BalancerParams::uniform(4, 0.5f32),
            &StopRule::new(1e-5, 1000),
        )
        .unwrap();
        assert!(trace.converged());
        assert!((w.node_value(&g, 0) - 10.0 / 7.0).abs() < 1e-4);
    }
}
