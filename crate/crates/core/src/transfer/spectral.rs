//! Perron eigenpairs of weighted block graphs.
//!
//! The weighted operator is `(M x)(u) = sum_{u -> v} w(v) x(v)` with `w(v)`
//! depending only on the symbol labelling edges into `v`. Eigenvalue bounds
//! come from the Collatz-Wielandt quotients `min/max_u (M x)(u) / x(u)` of a
//! positive vector, which bracket the spectral radius for any positive `x`.
//! The subdominant spectrum of these graphs spreads around a circle of radius
//! close to `rho`, so polynomial acceleration buys little over plain power
//! steps; warm starts and early decisions do the heavy lifting instead.

use rayon::prelude::*;

use super::graph::{BlockGraph, NONE};

const PAR_THRESHOLD: usize = 1 << 15;

/// Which Perron vector to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `M r = rho r`
    Right,
    /// `l M = rho l`
    Left,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Target width of the bracket on `log rho`.
    pub tol: f64,
    pub max_matvecs: usize,
    pub check_every: usize,
    /// Stop as soon as the bracket on `log rho` excludes this value.
    pub decide: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_matvecs: 200_000,
            check_every: 8,
            decide: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_matvecs(mut self, max_matvecs: usize) -> Self {
        self.max_matvecs = max_matvecs;
        self
    }

    pub fn deciding(mut self, value: f64) -> Self {
        self.decide = Some(value);
        self
    }
}

/// Perron data of one side.
#[derive(Clone, Debug)]
pub struct PerronPair {
    /// Best estimate of `log rho` (midpoint of the bracket).
    pub log_rho: f64,
    pub log_lower: f64,
    pub log_upper: f64,
    /// Positive eigenvector, normalized to unit max-norm.
    pub vector: Vec<f64>,
    pub matvecs: usize,
    pub converged: bool,
}

impl PerronPair {
    pub fn width(&self) -> f64 {
        self.log_upper - self.log_lower
    }
}

/// Weighted transfer operator of a block graph at a fixed parameter.
pub struct Operator<'a> {
    graph: &'a BlockGraph,
    /// Weights per appended bit, rescaled so the larger one is 1.
    weight: [f64; 2],
    /// Added back to `log rho` to undo the rescaling.
    log_shift: f64,
    low_bits: Vec<u8>,
}

impl<'a> Operator<'a> {
    /// `log_weight[0]` for symbol 0, `log_weight[1]` for symbol 2.
    pub fn new(graph: &'a BlockGraph, log_weight: [f64; 2]) -> Self {
        let shift = log_weight[0].max(log_weight[1]);
        Operator {
            graph,
            weight: [(log_weight[0] - shift).exp(), (log_weight[1] - shift).exp()],
            log_shift: shift,
            low_bits: graph.low_bits().map(|b| b as u8).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    /// Rescaled weight of edges into `node`.
    pub fn weight_into(&self, node: usize) -> f64 {
        self.weight[self.low_bits[node] as usize]
    }

    pub fn log_shift(&self) -> f64 {
        self.log_shift
    }

    pub fn apply(&self, side: Side, x: &[f64], y: &mut [f64]) {
        match side {
            Side::Right => {
                let succ = self.graph.succ_table();
                let w = self.weight;
                let row = |(u, out): (usize, &mut f64)| {
                    let [a, b] = succ[u];
                    let mut acc = 0.0;
                    if a != NONE {
                        acc += w[0] * x[a as usize];
                    }
                    if b != NONE {
                        acc += w[1] * x[b as usize];
                    }
                    *out = acc;
                };
                if y.len() >= PAR_THRESHOLD {
                    y.par_iter_mut().enumerate().for_each(row);
                } else {
                    y.iter_mut().enumerate().for_each(row);
                }
            }
            Side::Left => {
                let pred = self.graph.pred_table();
                let col = |(v, out): (usize, &mut f64)| {
                    let [a, b] = pred[v];
                    let mut acc = 0.0;
                    if a != NONE {
                        acc += x[a as usize];
                    }
                    if b != NONE {
                        acc += x[b as usize];
                    }
                    *out = acc * self.weight[self.low_bits[v] as usize];
                };
                if y.len() >= PAR_THRESHOLD {
                    y.par_iter_mut().enumerate().for_each(col);
                } else {
                    y.iter_mut().enumerate().for_each(col);
                }
            }
        }
    }
}

/// Collatz-Wielandt bounds `(min, max)` of `y / x`; `None` if some `x` entry
/// is not strictly positive.
fn cw_bounds(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        if a <= 0.0 || !a.is_finite() {
            return None;
        }
        let r = b / a;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Some((lo, hi))
}

fn normalize_max(x: &mut [f64]) {
    let m = x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v /= m);
    }
}

/// Perron pair of `op` on the requested side, optionally warm-started.
///
/// Power iteration from a positive vector; the Collatz-Wielandt bracket is
/// evaluated every `check_every` steps and the iteration stops once its width
/// is at most `tol`, or, when `decide` is set, once the bracket excludes that
/// value of `log rho`.
pub fn perron(op: &Operator<'_>, side: Side, opts: &SolverOptions, warm: Option<&[f64]>) -> PerronPair {
    let n = op.len();
    let mut x: Vec<f64> = match warm {
        Some(w) if w.len() == n && w.iter().all(|&v| v > 0.0 && v.is_finite()) => w.to_vec(),
        _ => vec![1.0; n],
    };
    normalize_max(&mut x);
    let mut y = vec![0.0; n];
    let mut matvecs = 0usize;
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best_vec = x.clone();
    let mut stall = 0usize;
    let decide = opts.decide.map(|d| d - op.log_shift());
    let every = opts.check_every.max(1);

    loop {
        op.apply(side, &x, &mut y);
        matvecs += 1;
        if matvecs % every == 0 || matvecs == 1 {
            if let Some((lo, hi)) = cw_bounds(&x, &y).filter(|b| b.0 > 0.0) {
                let (llo, lhi) = (lo.ln(), hi.ln());
                if lhi - llo < best.1 - best.0 {
                    best = (llo, lhi);
                    best_vec.copy_from_slice(&x);
                    stall = 0;
                } else {
                    stall += 1;
                }
                let decided = decide.is_some_and(|d| llo > d || lhi < d);
                if lhi - llo <= opts.tol || decided {
                    break;
                }
            }
            if matvecs >= opts.max_matvecs || stall > 20 {
                break;
            }
            std::mem::swap(&mut x, &mut y);
            normalize_max(&mut x);
        } else {
            std::mem::swap(&mut x, &mut y);
        }
    }
    normalize_max(&mut best_vec);
    let converged = best.1 - best.0 <= opts.tol;
    PerronPair {
        log_rho: 0.5 * (best.0 + best.1) + op.log_shift(),
        log_lower: best.0 + op.log_shift(),
        log_upper: best.1 + op.log_shift(),
        vector: best_vec,
        matvecs,
        converged,
    }
}
