use crate::error::{Error, Result};
use crate::params::PotentialParams;

use super::graph::{check_primitivity, BlockGraph, NONE};
use super::spectral::{perron, Operator, PerronPair, Side, SolverOptions};

/// Stationary Markov measure built from the Perron data of a weighted graph.
#[derive(Clone, Debug)]
pub struct EquilibriumMeasure {
    pub t: f64,
    pub pressure: f64,
    pub node_distribution: Vec<f64>,
    /// Transition probabilities per node, indexed by appended bit.
    pub transition_probabilities: Vec<[f64; 2]>,
    pub entropy: f64,
    pub phi_average: f64,
    pub chi_average: f64,
    pub stationarity_residual: f64,
    pub gibbs_residual: f64,
    pub converged: bool,
}

/// Builds the equilibrium measure of `t * potential` on a primitive graph.
pub fn equilibrium(
    g: &BlockGraph,
    p: &PotentialParams,
    t: f64,
    opts: &SolverOptions,
) -> Result<EquilibriumMeasure> {
    check_primitivity(g)?;
    let op = Operator::new(g, p.log_weights(t));
    let right = perron(&op, Side::Right, opts, None);
    let left = perron(&op, Side::Left, opts, None);
    from_perron(g, p, t, &op, &right, &left)
}

/// Measure from already computed right and left Perron pairs of `op`.
pub(crate) fn from_perron(
    g: &BlockGraph,
    p: &PotentialParams,
    t: f64,
    op: &Operator<'_>,
    right: &PerronPair,
    left: &PerronPair,
) -> Result<EquilibriumMeasure> {
    if !right.log_rho.is_finite() || !left.log_rho.is_finite() {
        return Err(Error::Precondition("Perron iteration failed".into()));
    }
    // Eigenvalue of the rescaled operator.
    let rho_scaled = (right.log_rho - op.log_shift()).exp();
    let r = &right.vector;
    let l = &left.vector;
    let phi = [p.potential(0), p.potential(2)];

    let n = g.len();
    let mut kernel = vec![[0.0f64; 2]; n];
    for (u, row) in kernel.iter_mut().enumerate() {
        let succ = g.successors(u);
        let mut total = 0.0;
        for (bit, &v) in succ.iter().enumerate() {
            if v != NONE {
                row[bit] = op.weight_into(v as usize) * r[v as usize] / (rho_scaled * r[u]);
                total += row[bit];
            }
        }
        // Removes the residual eigenvector error from each row.
        row.iter_mut().for_each(|q| *q /= total);
    }

    let mut pi: Vec<f64> = l.iter().zip(r).map(|(a, b)| a * b).collect();
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= z);

    let mut pushed = vec![0.0; n];
    let mut entropy = 0.0;
    let mut phi_average = 0.0;
    for u in 0..n {
        for (bit, &v) in g.successors(u).iter().enumerate() {
            if v == NONE {
                continue;
            }
            let q = kernel[u][bit];
            let mass = pi[u] * q;
            pushed[v as usize] += mass;
            if q > 0.0 {
                entropy -= mass * q.ln();
            }
            phi_average += mass * phi[bit];
        }
    }
    let stationarity_residual = pushed.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
    let pressure = right.log_rho;
    let gibbs_residual = (entropy + t * phi_average - pressure).abs();
    Ok(EquilibriumMeasure {
        t,
        pressure,
        node_distribution: pi,
        transition_probabilities: kernel,
        entropy,
        phi_average,
        chi_average: -phi_average,
        stationarity_residual,
        gibbs_residual,
        converged: right.converged && left.converged,
    })
}
