//! Distributed formation of a doubly stochastic weight matrix.
//!
//! Each node `j` splits unit mass between its outgoing edges and a
//! self-weight, so every column of the weighted adjacency matrix sums to 1 at
//! every round. Outgoing weights follow the same proportional update as the
//! balancing protocol, but the step size `beta_j[k]` is chosen per round so
//! that the out-weight never reaches 1 and the self-weight
//! `w_jj = 1 - S+_j` stays nonnegative. At the balanced limit every row also
//! sums to 1.

use crate::error::{Error, Result};
use crate::graph::{is_strongly_connected, Digraph};
use crate::metrics::{absolute_balance, bistochastic_gap, in_weights, out_weights, WeightState};
use crate::scalar::Scalar;
use crate::trace::{iterate, Observation, RunTrace, StopRule};

pub const ALGORITHM_ID: &str = "algo2";

/// Self-weights below this are reported as a broken precondition.
pub const SELF_WEIGHT_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algo2Mode {
    /// Weights start at `1 / (1 + D+_j)`; step sizes adapt every round.
    #[default]
    Standard,
    /// Weights start at `1 / (m (1 + D+_j))` with `m >= n` and every step
    /// size stays at `alpha_j`, so the per-node weights follow a fixed
    /// linear iteration with a predictable geometric rate.
    ConstantBeta,
}

/// How the adaptive step size is chosen when a node's in-weight exceeds its
/// out-weight (otherwise the step is `alpha_j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaRule {
    /// `min(alpha_j, alpha_j (1 - S+) / (S- - S+))`.
    #[default]
    Capped,
    /// `alpha_j (1 - S+) / (S- - S+)` with no upper bound. The out-weight
    /// then moves to exactly `(1 - alpha_j) S+ + alpha_j` however small the
    /// gap, so a run near the balanced state can be thrown back out of it.
    Uncapped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BistochasticParams<T> {
    pub alpha: Vec<T>,
    pub mode: Algo2Mode,
    /// Scale of the small initialization in [`Algo2Mode::ConstantBeta`].
    pub m: usize,
    pub beta_rule: BetaRule,
}

impl<T: Scalar> BistochasticParams<T> {
    pub fn uniform(n: usize, alpha: T) -> Self {
        BistochasticParams {
            alpha: vec![alpha; n],
            mode: Algo2Mode::Standard,
            m: n,
            beta_rule: BetaRule::default(),
        }
    }

    pub fn constant_beta(n: usize, alpha: T, m: usize) -> Self {
        BistochasticParams {
            mode: Algo2Mode::ConstantBeta,
            m,
            ..Self::uniform(n, alpha)
        }
    }

    pub fn validate(&self, g: &Digraph) -> Result<()> {
        let n = g.node_count();
        if self.alpha.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} alpha values, got {}",
                self.alpha.len()
            )));
        }
        for (j, &a) in self.alpha.iter().enumerate() {
            if !(a > T::zero() && a < T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "alpha of node {j} is {a}, must lie in (0, 1)"
                )));
            }
        }
        if self.mode == Algo2Mode::ConstantBeta && self.m < n {
            return Err(Error::InvalidParameter(format!(
                "initialization scale m = {} must be at least the node count {n}",
                self.m
            )));
        }
        if let Some(j) = g.find_sink() {
            return Err(Error::NoOutNeighbors(j));
        }
        if !is_strongly_connected(g) {
            return Err(Error::NotStronglyConnected);
        }
        Ok(())
    }
}

fn with_self_weights<T: Scalar>(g: &Digraph, edge_weights: Vec<T>) -> WeightState<T> {
    let mut w = WeightState {
        edge_weights,
        self_weights: None,
    };
    w.self_weights = Some(
        out_weights(g, &w)
            .into_iter()
            .map(|s| T::one() - s)
            .collect(),
    );
    w
}

/// `1 / (1 + D+_j)` on every outgoing edge and on the self-loop of `j`.
pub fn init_bistochastic_weights<T: Scalar>(g: &Digraph) -> WeightState<T> {
    let n = g.node_count();
    let shares: Vec<T> = (0..n)
        .map(|j| T::one() / T::from_count(1 + g.out_degree(j)))
        .collect();
    let mut w = WeightState::from_node_values(g, &shares);
    w.self_weights = Some(shares);
    w
}

/// `1 / (m (1 + D+_j))` on every outgoing edge; the self-weight takes the
/// rest of the column. Keeps every in- and out-weight below 1.
pub fn init_prop3_weights<T: Scalar>(g: &Digraph, m: usize) -> Result<WeightState<T>> {
    let n = g.node_count();
    if m < n {
        return Err(Error::InvalidParameter(format!(
            "initialization scale m = {m} must be at least the node count {n}"
        )));
    }
    let values: Vec<T> = (0..n)
        .map(|j| T::one() / (T::from_count(m) * T::from_count(1 + g.out_degree(j))))
        .collect();
    Ok(with_self_weights(
        g,
        WeightState::from_node_values(g, &values).edge_weights,
    ))
}

/// Adaptive step size: `alpha (1 - S+) / (S- - S+)` when `S- > S+`, else
/// `alpha`. The result may exceed 1. An out-weight that has rounded to 1
/// gives a zero step.
pub fn select_beta<T: Scalar>(s_minus: T, s_plus: T, alpha: T) -> Result<T> {
    if s_minus > s_plus {
        let room = T::one() - s_plus;
        if room < T::lit(SELF_WEIGHT_FLOOR) {
            return Err(Error::InvariantViolation(format!(
                "out-weight {s_plus} exceeds 1 while in-weight {s_minus} is larger"
            )));
        }
        Ok(alpha * room.max(T::zero()) / (s_minus - s_plus))
    } else {
        Ok(alpha)
    }
}

/// [`select_beta`] bounded above by `alpha`.
pub fn select_beta_capped<T: Scalar>(s_minus: T, s_plus: T, alpha: T) -> Result<T> {
    Ok(select_beta(s_minus, s_plus, alpha)?.min(alpha))
}

/// Result of one round: the new state and the step sizes that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Algo2Step<T> {
    pub state: WeightState<T>,
    pub beta: Vec<T>,
}

pub fn algo2_step<T: Scalar>(
    g: &Digraph,
    w: &WeightState<T>,
    params: &BistochasticParams<T>,
) -> Result<Algo2Step<T>> {
    let n = g.node_count();
    if params.alpha.len() != n {
        return Err(Error::InvalidParameter(format!(
            "expected {n} alpha values, got {}",
            params.alpha.len()
        )));
    }
    let s_minus = in_weights(g, w);
    let s_plus = out_weights(g, w);
    let beta = (0..n)
        .map(|j| match (params.mode, params.beta_rule) {
            (Algo2Mode::ConstantBeta, _) => Ok(params.alpha[j]),
            (Algo2Mode::Standard, BetaRule::Capped) => {
                select_beta_capped(s_minus[j], s_plus[j], params.alpha[j])
            }
            (Algo2Mode::Standard, BetaRule::Uncapped) => {
                select_beta(s_minus[j], s_plus[j], params.alpha[j])
            }
        })
        .collect::<Result<Vec<T>>>()?;

    // node totals instead of per-edge gaps: equal on node-uniform states, and
    // a large step size does not amplify rounding in `S- / D+ - w`
    let mut edge_weights = w.edge_weights.clone();
    for j in 0..n {
        let d = g.out_degree(j);
        if d == 0 {
            return Err(Error::NoOutNeighbors(j));
        }
        let inc = beta[j] * (s_minus[j] - s_plus[j]) / T::from_count(d);
        for id in g.out_edge_ids(j) {
            edge_weights[id] += inc;
        }
    }
    let mut state = with_self_weights(g, edge_weights);

    // rounding residue below zero is stored as zero
    let floor = T::lit(SELF_WEIGHT_FLOOR);
    if let Some(self_weights) = state.self_weights.as_mut() {
        if let Some(j) = (0..n).find(|&j| self_weights[j] < floor) {
            return Err(Error::InvariantViolation(format!(
                "self-weight of node {j} became {}",
                self_weights[j]
            )));
        }
        for s in self_weights.iter_mut() {
            *s = s.max(T::zero());
        }
    }
    if let Some(id) = state.edge_weights.iter().position(|&x| x <= T::zero()) {
        let (src, dst) = g.edges()[id];
        return Err(Error::InvariantViolation(format!(
            "weight of edge {src} -> {dst} became {}",
            state.edge_weights[id]
        )));
    }
    Ok(Algo2Step { state, beta })
}

pub fn algo2_round<T: Scalar>(
    g: &Digraph,
    w: &WeightState<T>,
    params: &BistochasticParams<T>,
) -> Result<WeightState<T>> {
    algo2_step(g, w, params).map(|s| s.state)
}

/// Initial state for the configured mode.
pub fn initial_state<T: Scalar>(
    g: &Digraph,
    params: &BistochasticParams<T>,
) -> Result<WeightState<T>> {
    match params.mode {
        Algo2Mode::Standard => Ok(init_bistochastic_weights(g)),
        Algo2Mode::ConstantBeta => init_prop3_weights(g, params.m),
    }
}

/// Iterates [`algo2_step`] until the bistochastic gap is within `stop.tol`.
///
/// The trace records the gap as `ab`, the absolute balance of the edge
/// weights as `epsilon`, and the step sizes of every round.
pub fn run_algo2<T: Scalar>(
    g: &Digraph,
    params: &BistochasticParams<T>,
    stop: &StopRule<T>,
) -> Result<(WeightState<T>, RunTrace<T>)> {
    params.validate(g)?;
    iterate(
        ALGORITHM_ID,
        stop,
        initial_state(g, params)?,
        |w| Observation {
            epsilon: absolute_balance(g, w),
            ab: Some(bistochastic_gap(g, w).value),
        },
        |w| {
            let step = algo2_step(g, w, params)?;
            Ok((step.state, Some(step.beta)))
        },
    )
}
