//! Update matrix of the balancing protocol, its spectrum, and measured
//! versus predicted geometric convergence rates.
//!
//! With all outgoing weights of node `j` equal to `w_j`, one round of the
//! balancing protocol is `w <- P w` where
//!
//! ```text
//! P = I - B + B D^-1 A,   B = diag(beta),  D = diag(D+),  A_ji = 1 iff i -> j
//! ```
//!
//! `P` has spectral radius 1 on strongly connected digraphs. When it is
//! primitive the error decays like `delta^k`, with `delta` the largest
//! eigenvalue modulus other than the eigenvalue 1, so the asymptotic rate is
//! `-ln delta`.

use num_complex::Complex;

use crate::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;
use crate::trace::RunTrace;

/// Largest matrix order the dense eigensolver accepts by default.
pub const DEFAULT_SOLVER_CAP: usize = 200;
/// Distance within which an eigenvalue counts as the eigenvalue 1, and
/// within which a modulus ties with the spectral radius.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-7;
/// `delta` at or below this is reported as zero (one-step contraction).
pub const CONTRACTION_TOL: f64 = 1e-12;
/// Rounds skipped at the start of a trace before fitting a rate.
pub const TRANSIENT_ROUNDS: usize = 10;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
/// Metric values at or below this are treated as underflow and not fitted.
pub const UNDERFLOW_FLOOR: f64 = 1e-14;
/// Fitted rates at or below this are reported as [`Error::NoDecay`].
pub const NO_DECAY_RATE: f64 = 1e-6;
const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMatrix<T> {
    pub entries: SquareMatrix<T>,
    pub beta: Vec<T>,
}

fn check_beta<T: Scalar>(g: &Digraph, beta: &[T]) -> Result<()> {
    if beta.len() != g.node_count() {
        return Err(Error::InvalidParameter(format!(
            "expected {} step sizes, got {}",
            g.node_count(),
            beta.len()
        )));
    }
    if let Some(j) = g.find_sink() {
        return Err(Error::NoOutNeighbors(j));
    }
    Ok(())
}

/// `P_jj = 1 - beta_j`, `P_ji = beta_j / D+_j` for every in-neighbor `i` of
/// `j`, zero elsewhere.
pub fn build_update_matrix<T: Scalar>(g: &Digraph, beta: &[T]) -> Result<UpdateMatrix<T>> {
    check_beta(g, beta)?;
    let n = g.node_count();
    let mut p = SquareMatrix::zeros(n);
    for j in 0..n {
        p[(j, j)] = T::one() - beta[j];
        let share = beta[j] / T::from_count(g.out_degree(j));
        for &i in g.in_neighbors(j) {
            p[(j, i)] = share;
        }
    }
    Ok(UpdateMatrix {
        entries: p,
        beta: beta.to_vec(),
    })
}

/// Column-stochastic companion `I - B + A D^-1 B`, similar to `P` through
/// `D^-1 B`.
pub fn build_column_companion<T: Scalar>(g: &Digraph, beta: &[T]) -> Result<SquareMatrix<T>> {
    check_beta(g, beta)?;
    let n = g.node_count();
    let mut p = SquareMatrix::zeros(n);
    for j in 0..n {
        p[(j, j)] = T::one() - beta[j];
        for &i in g.in_neighbors(j) {
            p[(j, i)] = beta[i] / T::from_count(g.out_degree(i));
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport<T> {
    /// Eigenvalues sorted by decreasing modulus.
    pub eigenvalues: Vec<Complex<T>>,
    /// Moduli of [`Self::eigenvalues`], same order.
    pub moduli: Vec<T>,
    pub rho: T,
    /// Largest modulus after removing the eigenvalue closest to 1.
    pub delta: T,
    /// `-ln delta`; infinite when `delta` is zero.
    pub rate: T,
    /// Exactly one eigenvalue attains the spectral radius.
    pub primitive: bool,
}

pub fn spectrum<T: Scalar>(m: &UpdateMatrix<T>) -> Result<SpectralReport<T>> {
    spectrum_with_cap(m, DEFAULT_SOLVER_CAP)
}

pub fn spectrum_with_cap<T: Scalar>(m: &UpdateMatrix<T>, cap: usize) -> Result<SpectralReport<T>> {
    let n = m.entries.order();
    if n > cap {
        return Err(Error::MatrixTooLarge { n, cap });
    }
    let ev = eigenvalues(&m.entries)?;
    Ok(report_from_eigenvalues(ev))
}

pub fn report_from_eigenvalues<T: Scalar>(mut ev: Vec<Complex<T>>) -> SpectralReport<T> {
    ev.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal))
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let moduli: Vec<T> = ev.iter().map(|z| z.norm()).collect();
    let rho = moduli.first().copied().unwrap_or(T::zero());
    let tol = T::lit(UNIT_EIGENVALUE_TOL);

    let one = Complex::new(T::one(), T::zero());
    let unit = ev
        .iter()
        .enumerate()
        .map(|(i, z)| (i, (*z - one).norm()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .filter(|&(_, dist)| dist <= tol)
        .map(|(i, _)| i);
    let mut delta = moduli
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != unit)
        .map(|(_, &m)| m)
        .fold(T::zero(), T::max);
    if delta <= T::lit(CONTRACTION_TOL) {
        delta = T::zero();
    }
    let rate = if delta == T::zero() {
        T::infinity()
    } else {
        (-delta.ln()).max(T::zero())
    };
    let primitive = moduli.iter().filter(|&&m| (rho - m).abs() <= tol).count() == 1;
    SpectralReport {
        eigenvalues: ev,
        moduli,
        rho,
        delta,
        rate,
        primitive,
    }
}

/// Geometric rate `-ln delta`.
///
/// Fails when `delta` is zero (the iteration contracts in one step) or when
/// `delta` reaches 1 (a second unit-modulus eigenvalue: not primitive).
pub fn convergence_rate<T: Scalar>(report: &SpectralReport<T>) -> Result<T> {
    if report.delta == T::zero() {
        return Err(Error::RateUndefined(
            "one-step contraction (delta = 0)".into(),
        ));
    }
    if report.delta >= T::one() - T::lit(UNIT_EIGENVALUE_TOL) {
        return Err(Error::RateUndefined(format!(
            "second largest modulus {} is not below 1, the update matrix is not primitive",
            report.delta
        )));
    }
    Ok(-report.delta.ln())
}

/// Builds the update matrix for `beta` and returns its predicted rate.
pub fn predicted_rate<T: Scalar>(g: &Digraph, beta: &[T]) -> Result<T> {
    convergence_rate(&spectrum(&build_update_matrix(g, beta)?)?)
}

/// Which trace column a rate is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMetric {
    Epsilon,
    Ab,
}

/// Measured decay rate of the absolute balance `epsilon`.
///
/// Negated least-squares slope of `ln epsilon[k]` against `k` over the last
/// `tail_fraction` of the usable rounds. Usable rounds exclude the first
/// [`TRANSIENT_ROUNDS`], the terminal round of a converged run, and any
/// value at or below [`UNDERFLOW_FLOOR`].
pub fn empirical_rate<T: Scalar>(trace: &RunTrace<T>, tail_fraction: f64) -> Result<T> {
    empirical_rate_for(trace, TraceMetric::Epsilon, tail_fraction)
}

pub fn empirical_rate_for<T: Scalar>(
    trace: &RunTrace<T>,
    metric: TraceMetric,
    tail_fraction: f64,
) -> Result<T> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail fraction {tail_fraction} must lie in (0, 1]"
        )));
    }
    let end = if trace.converged() {
        trace.records.len().saturating_sub(1)
    } else {
        trace.records.len()
    };
    let floor = T::lit(UNDERFLOW_FLOOR);
    let mut points = Vec::new();
    for r in &trace.records[..end] {
        let value = match metric {
            TraceMetric::Epsilon => r.epsilon,
            TraceMetric::Ab => r.ab.ok_or_else(|| {
                Error::InsufficientData("trace has no ab column".into())
            })?,
        };
        if r.round >= TRANSIENT_ROUNDS && value > floor {
            points.push((T::from_count(r.round), value.ln()));
        }
    }
    let keep = ((points.len() as f64) * tail_fraction).ceil() as usize;
    let tail = &points[points.len() - keep.min(points.len())..];
    if tail.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable rounds in the tail, need at least {MIN_FIT_POINTS}",
            tail.len()
        )));
    }
    let rate = -least_squares_slope(tail);
    if rate <= T::lit(NO_DECAY_RATE) {
        return Err(Error::NoDecay);
    }
    Ok(rate)
}

fn least_squares_slope<T: Scalar>(points: &[(T, T)]) -> T {
    let count = T::from_count(points.len());
    let mean_x = points.iter().map(|p| p.0).sum::<T>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<T>() / count;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for &(x, y) in points {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    sxy / sxx
}
