//! Independent oracles and property checks shared by the property suite and
//! the acceptance runner.
#![allow(dead_code)]

use proptest::prelude::*;
use wbal_core::balancer::{algo1_round, BalancerParams, BetaPolicy};
use wbal_core::baseline::imbalance_correcting_round;
use wbal_core::bistochastic::{
    algo2_round, algo2_step, init_bistochastic_weights, init_prop3_weights, BetaRule,
    BistochasticParams,
};
use wbal_core::graph::{random_strongly_connected, Digraph};
use wbal_core::metrics::{imbalances, in_weights, out_weights, total_mass};
use wbal_core::WeightState;

pub type Check = Result<(), TestCaseError>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(TestCaseError::fail(format!($($fmt)+)));
        }
    };
}

/// Random strongly connected graph with 2..=max_n nodes.
pub fn graph(max_n: usize) -> impl Strategy<Value = Digraph> {
    (2..=max_n, 0.0..0.6f64, any::<u64>())
        .prop_map(|(n, p, seed)| random_strongly_connected(n, p, seed).unwrap())
}

/// Graph plus one value per node drawn from `lo..=hi`.
pub fn graph_with(max_n: usize, lo: f64, hi: f64) -> impl Strategy<Value = (Digraph, Vec<f64>)> {
    graph(max_n).prop_flat_map(move |g| {
        let n = g.node_count();
        (Just(g), prop::collection::vec(lo..=hi, n))
    })
}

/// Graph, per-node step sizes and positive per-node initial weights.
pub fn balancer_case(max_n: usize) -> impl Strategy<Value = (Digraph, Vec<f64>, Vec<f64>)> {
    graph(max_n).prop_flat_map(|g| {
        let n = g.node_count();
        (
            Just(g),
            prop::collection::vec(0.01..=1.0f64, n),
            prop::collection::vec(0.01..10.0f64, n),
        )
    })
}

/// Dense update matrix built straight from the edge list: row `j` holds
/// `1 - beta_j` on the diagonal and `beta_j / D+_j` for each in-neighbor.
pub fn dense_update(g: &Digraph, beta: &[f64]) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut out_deg = vec![0usize; n];
    for &(src, _) in g.edges() {
        out_deg[src] += 1;
    }
    let mut p = vec![vec![0.0; n]; n];
    for j in 0..n {
        p[j][j] = 1.0 - beta[j];
    }
    for &(src, dst) in g.edges() {
        p[dst][src] += beta[dst] / out_deg[dst] as f64;
    }
    p
}

pub fn mat_vec(p: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    p.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn node_values(g: &Digraph, w: &WeightState<f64>) -> Vec<f64> {
    (0..g.node_count()).map(|j| w.node_value(g, j)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One balancing round equals the dense iteration `v <- P v`.
pub fn algo1_matches_dense(g: &Digraph, beta: &[f64], init: &[f64]) -> Check {
    let params = BalancerParams::new(beta.to_vec(), BetaPolicy::Permissive);
    let w = WeightState::from_node_values(g, init);
    let next = algo1_round(g, &w, &params).unwrap();
    ensure!(next.is_node_uniform(g), "out-edges diverged");
    let expected = mat_vec(&dense_update(g, beta), init);
    let d = max_diff(&node_values(g, &next), &expected);
    ensure!(d <= 1e-13, "dense oracle differs by {d:e}");
    Ok(())
}

/// Constant-beta rounds from the scaled initialization follow `v <- P(alpha) v`.
pub fn prop3_matches_dense(g: &Digraph, alpha: &[f64], rounds: usize) -> Check {
    let n = g.node_count();
    let params = BistochasticParams {
        alpha: alpha.to_vec(),
        ..BistochasticParams::constant_beta(n, 0.5, n)
    };
    let p = dense_update(g, alpha);
    let mut w = init_prop3_weights::<f64>(g, n).unwrap();
    let mut v = node_values(g, &w);
    for k in 0..rounds {
        w = algo2_round(g, &w, &params).unwrap();
        v = mat_vec(&p, &v);
        let d = max_diff(&node_values(g, &w), &v);
        ensure!(d <= 1e-13, "round {k}: dense oracle differs by {d:e}");
    }
    Ok(())
}

fn mass_of(g: &Digraph, w: &WeightState<f64>, beta: &[f64]) -> f64 {
    total_mass(g, w, beta).unwrap()
}

/// The weighted mass is unchanged by every balancing round.
pub fn algo1_conserves_mass(g: &Digraph, beta: &[f64], init: &[f64], rounds: usize) -> Check {
    let params = BalancerParams::new(beta.to_vec(), BetaPolicy::Permissive);
    let mut w = WeightState::from_node_values(g, init);
    let m0 = mass_of(g, &w, beta);
    for k in 0..rounds {
        w = algo1_round(g, &w, &params).unwrap();
        let m = mass_of(g, &w, beta);
        ensure!((m - m0).abs() <= 1e-12 * m0.abs(), "round {k}: mass {m} vs {m0}");
    }
    Ok(())
}

/// Same invariant for the constant-beta doubly stochastic mode.
pub fn prop3_conserves_mass(g: &Digraph, alpha: &[f64], rounds: usize) -> Check {
    let n = g.node_count();
    let params = BistochasticParams {
        alpha: alpha.to_vec(),
        ..BistochasticParams::constant_beta(n, 0.5, n)
    };
    let mut w = init_prop3_weights::<f64>(g, n).unwrap();
    let m0 = mass_of(g, &w, alpha);
    for k in 0..rounds {
        w = algo2_round(g, &w, &params).unwrap();
        let m = mass_of(g, &w, alpha);
        ensure!((m - m0).abs() <= 1e-12 * m0.abs(), "round {k}: mass {m} vs {m0}");
    }
    Ok(())
}

fn imbalance_sum(g: &Digraph, w: &WeightState<f64>) -> f64 {
    imbalances(g, w).iter().sum()
}

/// `sum_j x_j = 0` at every round of every algorithm.
pub fn imbalances_sum_to_zero(g: &Digraph, param: &[f64], rounds: usize) -> Check {
    let n = g.node_count();
    let a1 = BalancerParams::new(param.to_vec(), BetaPolicy::Permissive);
    let alpha: Vec<f64> = param.iter().map(|&x| x.min(0.99)).collect();
    let a2 = BistochasticParams {
        alpha,
        ..BistochasticParams::uniform(n, 0.5)
    };
    let mut w1 = WeightState::uniform(g, 1.0);
    let mut w2 = init_bistochastic_weights::<f64>(g);
    let mut w3 = WeightState::uniform(g, 1.0);
    for k in 0..=rounds {
        for (name, w) in [("algo1", &w1), ("algo2", &w2), ("baseline", &w3)] {
            let s = imbalance_sum(g, w);
            ensure!(s.abs() <= 1e-12, "{name} round {k}: sum {s:e}");
        }
        w1 = algo1_round(g, &w1, &a1).unwrap();
        w2 = algo2_round(g, &w2, &a2).unwrap();
        w3 = imbalance_correcting_round(g, &w3);
    }
    Ok(())
}

/// With the literal step-size rule, every node whose in-weight exceeds its
/// out-weight moves to `S+ <- (1 - alpha) S+ + alpha`, and `n` consecutive
/// such rounds give `S+[k+n] = 1 - (1 - alpha)^n (1 - S+[k])`.
pub fn out_weight_recursion(g: &Digraph, alpha: &[f64], rounds: usize) -> Check {
    let n = g.node_count();
    let params = BistochasticParams {
        alpha: alpha.to_vec(),
        beta_rule: BetaRule::Uncapped,
        ..BistochasticParams::uniform(n, 0.5)
    };
    let mut w = init_bistochastic_weights::<f64>(g);
    let mut s_plus = vec![out_weights(g, &w)];
    let mut fired = Vec::new();
    for k in 0..rounds {
        let s_minus = in_weights(g, &w);
        let now = out_weights(g, &w);
        let step = algo2_step(g, &w, &params).unwrap();
        w = step.state;
        let next = out_weights(g, &w);
        let f: Vec<bool> = (0..n).map(|j| s_minus[j] > now[j]).collect();
        for j in (0..n).filter(|&j| f[j]) {
            let expected = (1.0 - alpha[j]) * now[j] + alpha[j];
            ensure!(
                (next[j] - expected).abs() <= 1e-14,
                "round {k} node {j}: S+ {} vs {expected}",
                next[j]
            );
        }
        fired.push(f);
        s_plus.push(next);
    }
    for j in 0..n {
        for start in 0..rounds {
            let streak = (start..rounds).take_while(|&k| fired[k][j]).count();
            for len in 1..=streak {
                let expected = 1.0 - (1.0 - alpha[j]).powi(len as i32) * (1.0 - s_plus[start][j]);
                let got = s_plus[start + len][j];
                ensure!(
                    (got - expected).abs() <= 1e-12,
                    "node {j}, {len} rounds from {start}: S+ {got} vs {expected}"
                );
            }
        }
    }
    Ok(())
}
