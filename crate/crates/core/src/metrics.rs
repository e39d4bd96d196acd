//! Edge weights and the balance metrics every protocol is measured by.

use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::scalar::Scalar;

/// Column-sum error above which [`bistochastic_gap`] flags its input.
pub const COLUMN_STOCHASTIC_TOL: f64 = 1e-9;

/// Weights on the edges of a [`Digraph`], indexed by edge id, plus optional
/// per-node self-weights (only the doubly stochastic protocol uses them).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState<T> {
    pub edge_weights: Vec<T>,
    pub self_weights: Option<Vec<T>>,
}

impl<T: Scalar> WeightState<T> {
    /// Every edge carries `value`; no self-weights.
    pub fn uniform(g: &Digraph, value: T) -> Self {
        WeightState {
            edge_weights: vec![value; g.edge_count()],
            self_weights: None,
        }
    }

    /// One value per node, copied onto all of that node's outgoing edges.
    pub fn from_node_values(g: &Digraph, values: &[T]) -> Self {
        let edge_weights = g.edges().iter().map(|&(src, _)| values[src]).collect();
        WeightState {
            edge_weights,
            self_weights: None,
        }
    }

    pub fn weight(&self, g: &Digraph, src: usize, dst: usize) -> Option<T> {
        g.edge_id(src, dst).map(|id| self.edge_weights[id])
    }

    /// Self-weight of `j`, zero when self-weights are absent.
    pub fn self_weight(&self, j: usize) -> T {
        self.self_weights.as_ref().map_or(T::zero(), |s| s[j])
    }

    /// The common weight on the outgoing edges of `j`.
    ///
    /// Only meaningful for per-node uniform states (both adaptive protocols
    /// keep all outgoing edges of a node equal). Reads the first out-edge.
    pub fn node_value(&self, g: &Digraph, j: usize) -> T {
        self.edge_weights[g.out_edge_ids(j).start]
    }

    /// True when every node's outgoing edges carry exactly the same weight.
    pub fn is_node_uniform(&self, g: &Digraph) -> bool {
        (0..g.node_count()).all(|j| {
            let ids = g.out_edge_ids(j);
            let mut ws = self.edge_weights[ids].iter();
            match ws.next() {
                Some(first) => ws.all(|w| w == first),
                None => true,
            }
        })
    }

    /// Dense weighted adjacency matrix `W`, row `dst`, column `src`, with
    /// self-weights on the diagonal.
    pub fn to_dense(&self, g: &Digraph) -> Vec<Vec<T>> {
        let n = g.node_count();
        let mut w = vec![vec![T::zero(); n]; n];
        for (id, &(src, dst)) in g.edges().iter().enumerate() {
            w[dst][src] = self.edge_weights[id];
        }
        for (j, row) in w.iter_mut().enumerate() {
            row[j] = self.self_weight(j);
        }
        w
    }
}

/// Total weight node `j` receives from its in-neighbors (self-weight excluded).
pub fn in_weight<T: Scalar>(g: &Digraph, w: &WeightState<T>, j: usize) -> T {
    g.in_edge_ids(j).iter().map(|&id| w.edge_weights[id]).sum()
}

/// Total weight node `j` sends to its out-neighbors (self-weight excluded).
pub fn out_weight<T: Scalar>(g: &Digraph, w: &WeightState<T>, j: usize) -> T {
    w.edge_weights[g.out_edge_ids(j)].iter().copied().sum()
}

pub fn imbalance<T: Scalar>(g: &Digraph, w: &WeightState<T>, j: usize) -> T {
    in_weight(g, w, j) - out_weight(g, w, j)
}

/// All in-weights at once.
pub fn in_weights<T: Scalar>(g: &Digraph, w: &WeightState<T>) -> Vec<T> {
    (0..g.node_count()).map(|j| in_weight(g, w, j)).collect()
}

/// All out-weights at once.
pub fn out_weights<T: Scalar>(g: &Digraph, w: &WeightState<T>) -> Vec<T> {
    (0..g.node_count()).map(|j| out_weight(g, w, j)).collect()
}

pub fn imbalances<T: Scalar>(g: &Digraph, w: &WeightState<T>) -> Vec<T> {
    (0..g.node_count()).map(|j| imbalance(g, w, j)).collect()
}

/// Sum of absolute imbalances; zero iff the weights are balanced.
pub fn absolute_balance<T: Scalar>(g: &Digraph, w: &WeightState<T>) -> T {
    (0..g.node_count()).map(|j| imbalance(g, w, j).abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistochasticGap<T> {
    /// Sum over nodes of `|1 - (self-weight + in-weight)|`.
    pub value: T,
    /// Largest `|self-weight + out-weight - 1|` over all nodes.
    pub max_column_error: T,
}

impl<T: Scalar> BistochasticGap<T> {
    /// False when the column sums are off by more than
    /// [`COLUMN_STOCHASTIC_TOL`]; the gap then no longer measures the
    /// distance from a doubly stochastic matrix.
    pub fn column_stochastic(&self) -> bool {
        self.max_column_error <= T::lit(COLUMN_STOCHASTIC_TOL)
    }
}

/// Distance of a column-stochastic state from doubly stochastic: the summed
/// deviation of every row sum (self-weight included) from 1.
pub fn bistochastic_gap<T: Scalar>(g: &Digraph, w: &WeightState<T>) -> BistochasticGap<T> {
    let mut value = T::zero();
    let mut max_column_error = T::zero();
    for j in 0..g.node_count() {
        let own = w.self_weight(j);
        value += (T::one() - (own + in_weight(g, w, j))).abs();
        max_column_error = max_column_error.max((own + out_weight(g, w, j) - T::one()).abs());
    }
    BistochasticGap {
        value,
        max_column_error,
    }
}

/// Weighted mass `sum_j (D+_j / beta_j) * w_j`, conserved by the balancing
/// protocol with constant step sizes.
pub fn total_mass<T: Scalar>(g: &Digraph, w: &WeightState<T>, beta: &[T]) -> Result<T> {
    if beta.len() != g.node_count() {
        return Err(Error::InvalidParameter(format!(
            "expected {} step sizes, got {}",
            g.node_count(),
            beta.len()
        )));
    }
    let mut mass = T::zero();
    for (j, &b) in beta.iter().enumerate() {
        if b <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "step size of node {j} must be positive, got {b}"
            )));
        }
        if g.out_degree(j) == 0 {
            return Err(Error::NoOutNeighbors(j));
        }
        mass += T::from_count(g.out_degree(j)) / b * w.node_value(g, j);
    }
    Ok(mass)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::fixtures::{four_node, two_cycle};

    fn balanced_four_node() -> WeightState<f64> {
        let g = four_node();
        WeightState::from_node_values(&g, &[10.0 / 7.0, 10.0 / 7.0, 5.0 / 7.0, 5.0 / 7.0])
    }

    fn published_four_node() -> WeightState<f64> {
        let g = four_node();
        WeightState::from_node_values(&g, &[1.4286, 1.4286, 0.7143, 0.7143])
    }

    #[test]
    fn weight_sums_on_unit_weights() {
        let g = four_node();
        let w = WeightState::uniform(&g, 1.0);
        assert_eq!(in_weight(&g, &w, 0), 2.0);
        assert_eq!(out_weight(&g, &w, 2), 2.0);
        assert_eq!(imbalances(&g, &w), vec![1.0, 0.0, -1.0, 0.0]);
        assert_eq!(absolute_balance(&g, &w), 2.0);
    }

    #[test]
    fn weight_sums_at_published_fixed_point() {
        let g = four_node();
        let w = published_four_node();
        assert_abs_diff_eq!(in_weight(&g, &w, 0), 1.4286, epsilon = 1e-12);
        assert_abs_diff_eq!(out_weight(&g, &w, 2), 1.4286, epsilon = 1e-12);
        for x in imbalances(&g, &w) {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(absolute_balance(&g, &balanced_four_node()), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_weights_are_trivially_balanced() {
        let g = four_node();
        let w = WeightState::uniform(&g, 0.0);
        assert_eq!(in_weight(&g, &w, 1), 0.0);
        assert_eq!(absolute_balance(&g, &w), 0.0);
    }

    #[test]
    fn two_cycle_out_weight() {
        let g = two_cycle();
        let w = WeightState::uniform(&g, 0.5);
        assert_eq!(out_weight(&g, &w, 0), 0.5);
        assert_eq!(absolute_balance(&g, &w), 0.0);
    }

    #[test]
    fn gap_of_bistochastic_and_initial_states() {
        let g = two_cycle();
        let mut w = WeightState::uniform(&g, 0.5);
        w.self_weights = Some(vec![0.5, 0.5]);
        let gap = bistochastic_gap(&g, &w);
        assert_eq!(gap.value, 0.0);
        assert!(gap.column_stochastic());

        // 1/(1+D+) on every out-edge and on the diagonal
        let g = four_node();
        let shares = [0.5, 0.5, 1.0 / 3.0, 0.5];
        let mut w = WeightState::from_node_values(&g, &shares);
        w.self_weights = Some(shares.to_vec());
        let gap = bistochastic_gap(&g, &w);
        assert_abs_diff_eq!(gap.value, 2.0 / 3.0, epsilon = 1e-15);
        assert!(gap.column_stochastic());
    }

    #[test]
    fn gap_flags_broken_columns() {
        let g = two_cycle();
        let mut w = WeightState::uniform(&g, 0.5);
        w.self_weights = Some(vec![0.6, 0.5]);
        let gap = bistochastic_gap(&g, &w);
        assert!(!gap.column_stochastic());
        assert_abs_diff_eq!(gap.max_column_error, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn mass_values() {
        let g = four_node();
        let unit = WeightState::uniform(&g, 1.0);
        assert_abs_diff_eq!(total_mass(&g, &unit, &[0.5; 4]).unwrap(), 10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            total_mass(&g, &balanced_four_node(), &[0.5; 4]).unwrap(),
            10.0,
            epsilon = 1e-13
        );
        assert_eq!(
            total_mass(&g, &unit, &[1.0; 4]).unwrap(),
            g.edge_count() as f64
        );
        assert!(total_mass(&g, &unit, &[0.5, 0.0, 0.5, 0.5]).is_err());
        assert!(total_mass(&g, &unit, &[0.5; 3]).is_err());
    }

    #[test]
    fn node_uniformity_detection() {
        let g = four_node();
        let mut w = WeightState::uniform(&g, 1.0);
        assert!(w.is_node_uniform(&g));
        let id = g.edge_id(2, 3).unwrap();
        w.edge_weights[id] = 2.0;
        assert!(!w.is_node_uniform(&g));
    }

    #[test]
    fn dense_layout() {
        let g = four_node();
        let mut w = balanced_four_node();
        w.self_weights = Some(vec![0.1, 0.2, 0.3, 0.4]);
        let d = w.to_dense(&g);
        assert_eq!(d[1][0], 10.0 / 7.0);
        assert_eq!(d[0][3], 5.0 / 7.0);
        assert_eq!(d[0][1], 0.0);
        assert_eq!(d[2][2], 0.3);
    }
}
