//! Block graphs of the window-constrained sub-shifts, their pressure
//! `P(t) = log rho(M_t)` and equilibrium measures.

mod equilibrium;
mod graph;
mod spectral;

pub use equilibrium::{equilibrium, EquilibriumMeasure};
pub use graph::{check_primitivity, period, BlockGraph, DEFAULT_NODE_CAP, NONE};
pub use spectral::{perron, Operator, PerronPair, Side, SolverOptions};

use crate::error::Result;
use crate::params::PotentialParams;
use crate::words::log_weighted_sum;

/// Pressure value with its certified bracket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pressure {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub matvecs: usize,
    pub converged: bool,
    /// Set for an empty graph, where the value is `-inf`.
    pub empty: bool,
}

impl Pressure {
    fn from_pair(pair: &PerronPair) -> Self {
        Pressure {
            value: pair.log_rho,
            lower: pair.log_lower,
            upper: pair.log_upper,
            matvecs: pair.matvecs,
            converged: pair.converged,
            empty: false,
        }
    }

    fn empty() -> Self {
        Pressure {
            value: f64::NEG_INFINITY,
            lower: f64::NEG_INFINITY,
            upper: f64::NEG_INFINITY,
            matvecs: 0,
            converged: true,
            empty: true,
        }
    }
}

/// `log` of the spectral radius of the weighted adjacency operator at `t`.
pub fn pressure(g: &BlockGraph, p: &PotentialParams, t: f64) -> Pressure {
    pressure_with(g, p, t, &SolverOptions::default())
}

pub fn pressure_with(g: &BlockGraph, p: &PotentialParams, t: f64, opts: &SolverOptions) -> Pressure {
    if g.is_empty() {
        return Pressure::empty();
    }
    let op = Operator::new(g, p.log_weights(t));
    Pressure::from_pair(&perron(&op, Side::Right, opts, None))
}

/// Pressure and equilibrium evaluator for one graph that warm-starts each
/// solve from the previous Perron vectors.
pub struct PieceSolver<'a> {
    graph: &'a BlockGraph,
    params: PotentialParams,
    opts: SolverOptions,
    right: Option<Vec<f64>>,
    left: Option<Vec<f64>>,
}

impl<'a> PieceSolver<'a> {
    pub fn new(graph: &'a BlockGraph, params: PotentialParams, opts: SolverOptions) -> Self {
        PieceSolver {
            graph,
            params,
            opts,
            right: None,
            left: None,
        }
    }

    pub fn graph(&self) -> &'a BlockGraph {
        self.graph
    }

    pub fn params(&self) -> &PotentialParams {
        &self.params
    }

    pub fn pressure(&mut self, t: f64) -> Pressure {
        if self.graph.is_empty() {
            return Pressure::empty();
        }
        let op = Operator::new(self.graph, self.params.log_weights(t));
        let pair = perron(&op, Side::Right, &self.opts, self.right.as_deref());
        let out = Pressure::from_pair(&pair);
        self.right = Some(pair.vector);
        out
    }

    pub fn equilibrium(&mut self, t: f64) -> Result<EquilibriumMeasure> {
        check_primitivity(self.graph)?;
        let op = Operator::new(self.graph, self.params.log_weights(t));
        let right = perron(&op, Side::Right, &self.opts, self.right.as_deref());
        let left = perron(&op, Side::Left, &self.opts, self.left.as_deref());
        let m = equilibrium::from_perron(self.graph, &self.params, t, &op, &right, &left)?;
        self.right = Some(right.vector);
        self.left = Some(left.vector);
        Ok(m)
    }
}

/// `(1/n) log` of the weighted sum over admissible `n`-words, computed
/// from the triple alone (no block graph).
pub fn pressure_oracle(g: &BlockGraph, p: &PotentialParams, t: f64, n: usize, state_cap: u64) -> Result<f64> {
    Ok(log_weighted_sum(g.triple(), n, p.log_weights(t), state_cap)? / n as f64)
}
