//! Choice of the window constraints of the `k` pieces, and the quantities
//! that order them: exponent ranges, entropies, kink windows and the
//! threshold parameter.
//!
//! Schedule triples bound the number of symbols `0` per window. Each piece is
//! realized as the sub-shift of the complementary symbol-2 constraint
//! ([`Triple::complement`]), so piece 1 consists of words rich in `2` and has
//! the smallest exponents, and later pieces are increasingly rich in `0`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kv::KvDocument;
use crate::params::PotentialParams;
use crate::transfer::{perron, BlockGraph, Operator, Side, SolverOptions, DEFAULT_NODE_CAP};
use crate::words::{Triple, MAX_WINDOW};

/// `|t0|` above this is clamped (with a warning).
pub const THRESHOLD_MAGNITUDE_CAP: f64 = 1e6;

/// `(min, max)` over admissible symbol-2 counts `c` of the window exponent
/// `((L - c) log beta0 + c log beta2) / L`.
pub fn exponent_range(t: Triple, p: &PotentialParams) -> (f64, f64) {
    let ends = [p.window_exponent(t.i, t.len), p.window_exponent(t.j, t.len)];
    (ends[0].min(ends[1]), ends[0].max(ends[1]))
}

/// Exponent range read directly off a schedule triple (bounds on the count
/// of `0`): `log beta0 + (L - i)/L log(beta2/beta0)` and the same with `j`.
pub fn zero_count_exponent_range(t: Triple, p: &PotentialParams) -> (f64, f64) {
    let ratio = (p.beta2 / p.beta0).ln();
    let l = t.len as f64;
    (
        p.beta0.ln() + (l - t.i as f64) / l * ratio,
        p.beta0.ln() + (l - t.j as f64) / l * ratio,
    )
}

/// Region between the lines `h - a t` and `h - b t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cone {
    pub entropy: f64,
    pub slopes: (f64, f64),
}

impl Cone {
    pub fn contains(&self, t: f64, value: f64) -> bool {
        self.contains_with_tol(t, value, 0.0)
    }

    pub fn contains_with_tol(&self, t: f64, value: f64, tol: f64) -> bool {
        let a = self.entropy - self.slopes.0 * t;
        let b = self.entropy - self.slopes.1 * t;
        a.min(b) - tol <= value && value <= a.max(b) + tol
    }
}

/// Interval where the pieces `l` and `l + 1` must cross.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauWindow {
    pub minus: f64,
    pub plus: f64,
    /// `false` when the entropies are not strictly decreasing.
    pub valid: bool,
}

/// Kink window from the entropies and exponent ranges of two consecutive
/// pieces (`upper` has the larger exponents).
pub fn tau_window(
    entropy_lower: f64,
    entropy_upper: f64,
    range_lower: (f64, f64),
    range_upper: (f64, f64),
) -> Result<TauWindow> {
    let near = (range_upper.0 - range_lower.1).abs();
    let far = (range_upper.1 - range_lower.0).abs();
    if near == 0.0 || far == 0.0 {
        return Err(Error::ScheduleInvalid(
            "exponent ranges touch; kink window undefined".into(),
        ));
    }
    let gap = entropy_lower - entropy_upper;
    if gap <= 0.0 {
        return Ok(TauWindow {
            minus: 0.0,
            plus: 0.0,
            valid: false,
        });
    }
    Ok(TauWindow {
        minus: -gap / near,
        plus: -gap / far,
        valid: true,
    })
}

/// Parameter where `log 2 - t log beta0` meets `log 3 - t log beta_tilde`.
pub fn compute_t0(p: &PotentialParams) -> Result<f64> {
    if !(p.beta_tilde < p.beta0) || p.beta_tilde <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "beta_tilde={} must lie below beta0={}",
            p.beta_tilde, p.beta0
        )));
    }
    let t0 = (3f64.ln() - 2f64.ln()) / (p.beta_tilde.ln() - p.beta0.ln());
    if t0.abs() > THRESHOLD_MAGNITUDE_CAP {
        log::warn!("threshold {t0:e} clamped to -{THRESHOLD_MAGNITUDE_CAP:e}");
        return Ok(-THRESHOLD_MAGNITUDE_CAP);
    }
    Ok(t0)
}

/// One piece of a schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    /// Bounds on the number of `0`s per window.
    pub zeros: Triple,
    pub exponents: (f64, f64),
    pub entropy: f64,
}

impl Piece {
    /// Equivalent symbol-2 constraint defining the sub-shift.
    pub fn constraint(&self) -> Triple {
        self.zeros.complement()
    }

    pub fn cone(&self) -> Cone {
        Cone {
            entropy: self.entropy,
            slopes: self.exponents,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub k: usize,
    pub params: PotentialParams,
    pub pieces: Vec<Piece>,
    /// Kink windows of consecutive pieces, `k - 1` entries.
    pub windows: Vec<TauWindow>,
    pub t0: f64,
}

/// Offset `L - j` of piece `ell` (1-based) in a `k`-schedule.
fn zero_offset(k: usize, ell: usize) -> usize {
    3 * k + 1 - 3 * (ell - 1)
}

/// Schedule triple of piece `ell` with window length `len`.
pub fn piece_triple(k: usize, ell: usize, len: usize) -> Result<Triple> {
    let off = zero_offset(k, ell);
    if ell == 1 {
        if len <= off {
            return Err(Error::ScheduleInvalid(format!(
                "first window length {len} must exceed {off}"
            )));
        }
        Triple::new(0, len - off, len)
    } else {
        if len < off + 1 {
            return Err(Error::ScheduleInvalid(format!(
                "window length {len} of piece {ell} too short"
            )));
        }
        Triple::new(len - off - 1, len - off, len)
    }
}

impl Schedule {
    /// Assembles a schedule from its triples and entropies.
    pub fn from_parts(k: usize, params: PotentialParams, triples: &[Triple], entropies: &[f64]) -> Result<Self> {
        if k == 0 || triples.len() != k || entropies.len() != k {
            return Err(Error::ScheduleInvalid(format!(
                "expected {k} pieces, got {} triples and {} entropies",
                triples.len(),
                entropies.len()
            )));
        }
        let pieces: Vec<Piece> = triples
            .iter()
            .zip(entropies)
            .map(|(&zeros, &entropy)| Piece {
                zeros,
                exponents: exponent_range(zeros.complement(), &params),
                entropy,
            })
            .collect();
        let windows = pieces
            .windows(2)
            .map(|w| tau_window(w[0].entropy, w[1].entropy, w[0].exponents, w[1].exponents))
            .collect::<Result<Vec<_>>>()?;
        let t0 = compute_t0(&params)?;
        Ok(Schedule {
            k,
            params,
            pieces,
            windows,
            t0,
        })
    }

    pub fn triples(&self) -> Vec<Triple> {
        self.pieces.iter().map(|p| p.zeros).collect()
    }

    pub fn constraints(&self) -> Vec<Triple> {
        self.pieces.iter().map(Piece::constraint).collect()
    }

    /// 1-based.
    pub fn cone(&self, ell: usize) -> Cone {
        self.pieces[ell - 1].cone()
    }

    /// 1-based.
    pub fn tau_window(&self, ell: usize) -> TauWindow {
        self.windows[ell - 1]
    }

    /// Whether the first kink window lies left of the threshold `t0`.
    pub fn threshold_met(&self) -> bool {
        self.windows.first().is_none_or(|w| w.plus < self.t0)
    }

    /// Every violated ordering constraint except the threshold one.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k = self.k;
        for (idx, piece) in self.pieces.iter().enumerate() {
            let ell = idx + 1;
            let z = piece.zeros;
            match piece_triple(k, ell, z.len) {
                Ok(expected) if expected == z => {}
                _ => out.push(format!("piece {ell}: triple {z} does not follow the recursion")),
            }
            if ell > 1 {
                let prev = &self.pieces[idx - 1];
                if prev.zeros.len >= z.i {
                    out.push(format!(
                        "piece {ell}: previous window length {} not below lower bound {}",
                        prev.zeros.len, z.i
                    ));
                }
                let min_gap = self.pieces[..idx]
                    .iter()
                    .map(|p| p.zeros.len - p.zeros.j)
                    .min()
                    .unwrap();
                if z.len - z.i + 1 >= min_gap {
                    out.push(format!(
                        "piece {ell}: L - i = {} not below {} - 1",
                        z.len - z.i,
                        min_gap
                    ));
                }
                if piece.entropy >= prev.entropy {
                    out.push(format!(
                        "piece {ell}: entropy {} not below {}",
                        piece.entropy, prev.entropy
                    ));
                }
                if prev.exponents.1 >= piece.exponents.0 {
                    out.push(format!("pieces {} and {ell}: exponent ranges overlap", ell - 1));
                }
            }
        }
        for (idx, w) in self.windows.iter().enumerate() {
            if !w.valid || !(w.minus < w.plus && w.plus < 0.0) {
                out.push(format!("window {}: [{}, {}] is not a negative interval", idx + 1, w.minus, w.plus));
            }
            if idx > 0 && self.windows[idx].plus >= self.windows[idx - 1].minus {
                out.push(format!("windows {} and {}: out of order", idx, idx + 1));
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn to_document(&self) -> KvDocument {
        let mut d = KvDocument::new();
        d.set("k", self.k);
        d.set_f64("params.beta0", self.params.beta0);
        d.set_f64("params.beta2", self.params.beta2);
        d.set_f64("params.gamma", self.params.gamma);
        d.set_f64("params.lambda0", self.params.lambda0);
        d.set_f64("params.beta_tilde", self.params.beta_tilde);
        for (idx, p) in self.pieces.iter().enumerate() {
            let pre = format!("piece.{}", idx + 1);
            d.set(format!("{pre}.i"), p.zeros.i);
            d.set(format!("{pre}.j"), p.zeros.j);
            d.set(format!("{pre}.len"), p.zeros.len);
            d.set_f64(format!("{pre}.entropy"), p.entropy);
            d.set_f64(format!("{pre}.exponent_min"), p.exponents.0);
            d.set_f64(format!("{pre}.exponent_max"), p.exponents.1);
        }
        for (idx, w) in self.windows.iter().enumerate() {
            d.set_f64(format!("window.{}.minus", idx + 1), w.minus);
            d.set_f64(format!("window.{}.plus", idx + 1), w.plus);
        }
        d.set_f64("t0", self.t0);
        d.set("t0_met", self.threshold_met());
        d
    }

    /// Reads a schedule document; derived fields are recomputed from the
    /// triples, entropies and parameters.
    pub fn from_document(d: &KvDocument) -> Result<Self> {
        let k: usize = d.require("k")?;
        if k == 0 {
            return Err(Error::ScheduleInvalid("k must be positive".into()));
        }
        let params = PotentialParams {
            beta0: d.require("params.beta0")?,
            beta2: d.require("params.beta2")?,
            gamma: d.require("params.gamma")?,
            lambda0: d.require("params.lambda0")?,
            beta_tilde: d.require("params.beta_tilde")?,
        };
        params.validate()?;
        let mut triples = Vec::with_capacity(k);
        let mut entropies = Vec::with_capacity(k);
        for ell in 1..=k {
            let pre = format!("piece.{ell}");
            triples.push(Triple::new(
                d.require(&format!("{pre}.i"))?,
                d.require(&format!("{pre}.j"))?,
                d.require(&format!("{pre}.len"))?,
            )?);
            entropies.push(d.require(&format!("{pre}.entropy"))?);
        }
        Schedule::from_parts(k, params, &triples, &entropies)
    }
}

/// Bounds for [`build_schedule`].
#[derive(Clone, Copy, Debug)]
pub struct SearchLimits {
    /// Smallest first window length to try (raised to `3k + 2` if lower).
    pub first_len_min: usize,
    pub len_max: usize,
    pub node_cap: f64,
    pub growth: f64,
    pub solver: SolverOptions,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            first_len_min: 0,
            len_max: MAX_WINDOW,
            node_cap: DEFAULT_NODE_CAP,
            growth: 1.5,
            solver: SolverOptions::default(),
        }
    }
}

struct EntropyOracle {
    limits: SearchLimits,
    exact: HashMap<Triple, f64>,
}

impl EntropyOracle {
    fn graph(&self, constraint: Triple) -> Result<BlockGraph> {
        BlockGraph::build(constraint, self.limits.node_cap)
    }

    fn exact(&mut self, constraint: Triple) -> Result<f64> {
        if let Some(&h) = self.exact.get(&constraint) {
            return Ok(h);
        }
        let g = self.graph(constraint)?;
        let op = Operator::new(&g, [0.0, 0.0]);
        let pair = perron(&op, Side::Right, &self.limits.solver, None);
        if !pair.converged {
            log::warn!(
                "entropy of {constraint} not converged: bracket width {:e}",
                pair.width()
            );
        }
        self.exact.insert(constraint, pair.log_rho);
        Ok(pair.log_rho)
    }

    /// Whether the entropy of `constraint` is strictly below `bound`, deciding
    /// from the eigenvalue bracket as early as possible.
    fn below(&mut self, constraint: Triple, bound: f64) -> Result<bool> {
        if let Some(&h) = self.exact.get(&constraint) {
            return Ok(h < bound);
        }
        let g = self.graph(constraint)?;
        let op = Operator::new(&g, [0.0, 0.0]);
        let pair = perron(&op, Side::Right, &self.limits.solver.deciding(bound), None);
        if pair.converged {
            self.exact.insert(constraint, pair.log_rho);
        }
        Ok(pair.log_rho < bound)
    }
}

enum Verdict {
    Feasible,
    Fails(String),
    OutOfLimits(String),
}

/// Finds, for each piece in turn, the smallest admissible window length and
/// returns the resulting schedule.
///
/// The threshold constraint `window(1).plus < t0` is not enforced; check
/// [`Schedule::threshold_met`].
pub fn build_schedule(k: usize, p: &PotentialParams, limits: &SearchLimits) -> Result<Schedule> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    p.validate()?;
    let mut oracle = EntropyOracle {
        limits: *limits,
        exact: HashMap::new(),
    };
    let first_min = limits.first_len_min.max(3 * k + 2);
    let mut diagnostics = Vec::new();
    for first_len in first_min..=limits.len_max.min(MAX_WINDOW) {
        let first = piece_triple(k, 1, first_len)?;
        if first.complement().window_count() > limits.node_cap {
            diagnostics.push(format!("L1={first_len}: node cap exceeded"));
            break;
        }
        match extend(k, first, p, &mut oracle) {
            Ok((triples, entropies)) => {
                return Schedule::from_parts(k, *p, &triples, &entropies);
            }
            Err(reason) => {
                log::info!("L1={first_len} rejected: {reason}");
                diagnostics.push(format!("L1={first_len}: {reason}"));
            }
        }
    }
    if diagnostics.is_empty() {
        diagnostics.push(format!(
            "no first window length in [{first_min}, {}]",
            limits.len_max
        ));
    }
    Err(Error::Infeasible(diagnostics.join("; ")))
}

fn extend(
    k: usize,
    first: Triple,
    p: &PotentialParams,
    oracle: &mut EntropyOracle,
) -> std::result::Result<(Vec<Triple>, Vec<f64>), String> {
    let fail = |e: Error| e.to_string();
    let mut triples = vec![first];
    let mut entropies = vec![oracle.exact(first.complement()).map_err(fail)?];
    for ell in 2..=k {
        let prev = *triples.last().unwrap();
        let prev_h = *entropies.last().unwrap();
        let prev_range = exponent_range(prev.complement(), p);
        let off = zero_offset(k, ell);
        let len_min = prev.len + off + 2;

        let verdict = |len: usize, oracle: &mut EntropyOracle| -> std::result::Result<Verdict, String> {
            if len > oracle.limits.len_max.min(MAX_WINDOW) {
                return Ok(Verdict::OutOfLimits(format!(
                    "piece {ell}: window length {len} exceeds limit {}",
                    oracle.limits.len_max
                )));
            }
            let cand = piece_triple(k, ell, len).map_err(fail)?;
            let constraint = cand.complement();
            if constraint.window_count() > oracle.limits.node_cap {
                return Ok(Verdict::OutOfLimits(format!(
                    "piece {ell}: L={len} needs {:.3e} nodes, above the cap",
                    constraint.window_count()
                )));
            }
            let range = exponent_range(constraint, p);
            if !(prev_range.1 < range.0) {
                return Ok(Verdict::Fails(format!("piece {ell}: exponent ranges overlap at L={len}")));
            }
            if !oracle.below(constraint, prev_h).map_err(fail)? {
                return Ok(Verdict::Fails(format!("piece {ell}: entropy not decreasing at L={len}")));
            }
            if ell >= 3 {
                let h = oracle.exact(constraint).map_err(fail)?;
                let before = &triples[triples.len() - 2];
                let h_before = entropies[entropies.len() - 2];
                let w_prev = tau_window(h_before, prev_h, exponent_range(before.complement(), p), prev_range)
                    .map_err(fail)?;
                let w_new = tau_window(prev_h, h, prev_range, range).map_err(fail)?;
                if !(w_new.plus < w_prev.minus) {
                    return Ok(Verdict::Fails(format!("piece {ell}: kink windows out of order at L={len}")));
                }
            }
            Ok(Verdict::Feasible)
        };

        // Geometric growth until feasible, then bisection back.
        let mut lo = len_min - 1;
        let mut len = len_min;
        let mut last_reason;
        let hi = loop {
            match verdict(len, oracle)? {
                Verdict::Feasible => break len,
                Verdict::Fails(r) => {
                    last_reason = r;
                    lo = len;
                    let grown = ((len as f64) * oracle.limits.growth).round() as usize;
                    let next = grown.max(len + 1);
                    let cap = largest_len_within(k, ell, oracle.limits);
                    if len >= cap {
                        return Err(last_reason);
                    }
                    len = next.min(cap);
                }
                Verdict::OutOfLimits(r) => {
                    return Err(if lo >= len_min { format!("{r} (last failure before limits)") } else { r });
                }
            }
        };
        let mut hi = hi;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            match verdict(mid, oracle)? {
                Verdict::Feasible => hi = mid,
                _ => lo = mid,
            }
        }
        let chosen = piece_triple(k, ell, hi).map_err(fail)?;
        let h = oracle.exact(chosen.complement()).map_err(fail)?;
        triples.push(chosen);
        entropies.push(h);
    }
    Ok((triples, entropies))
}

/// Largest window length of piece `ell` within the node cap and length limit.
fn largest_len_within(k: usize, ell: usize, limits: SearchLimits) -> usize {
    let max = limits.len_max.min(MAX_WINDOW);
    let mut best = 0;
    for len in 1..=max {
        if let Ok(t) = piece_triple(k, ell, len) {
            if t.complement().window_count() <= limits.node_cap {
                best = len;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_range_examples() {
        let p = PotentialParams::default();
        let (lo, hi) = exponent_range(Triple::new(0, 1, 3).unwrap(), &p);
        assert!((lo - 0.045600).abs() < 1e-6);
        assert!((hi - 0.048790).abs() < 1e-6);
        let (lo, hi) = exponent_range(Triple::new(0, 7, 7).unwrap(), &p);
        assert!((lo - 1.04f64.ln()).abs() < 1e-15 && (hi - 1.05f64.ln()).abs() < 1e-15);
        let (lo, hi) = exponent_range(Triple::new(3, 3, 7).unwrap(), &p);
        assert_eq!(lo, hi);
        assert_eq!(lo, p.window_exponent(3, 7));
    }

    #[test]
    fn zero_count_formula_agrees_on_complement() {
        let p = PotentialParams::default();
        for len in 2..20 {
            for i in 0..len {
                for j in i..=len {
                    let t = Triple::new(i, j, len).unwrap();
                    let a = zero_count_exponent_range(t, &p);
                    let b = exponent_range(t.complement(), &p);
                    assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn tau_window_arithmetic() {
        let w = tau_window(0.5, 0.4, (0.0, 0.03), (0.05, 0.08)).unwrap();
        assert!((w.minus + 5.0).abs() < 1e-12 && (w.plus + 0.1 / 0.08).abs() < 1e-12);
        // Ranges chosen so the gaps are 0.02 and 0.05.
        let w = tau_window(0.5, 0.4, (0.0, 0.01), (0.03, 0.05)).unwrap();
        assert!((w.minus + 5.0).abs() < 1e-12);
        assert!((w.plus + 2.0).abs() < 1e-12);
        let w = tau_window(0.4, 0.4, (0.0, 0.01), (0.03, 0.05)).unwrap();
        assert_eq!((w.minus, w.plus, w.valid), (0.0, 0.0, false));
        assert!(tau_window(0.5, 0.4, (0.0, 0.03), (0.03, 0.05)).is_err());
    }

    #[test]
    fn threshold_examples() {
        let p = PotentialParams::default();
        let t0 = compute_t0(&p).unwrap();
        assert!((t0 - 1.5f64.ln() / (1.02f64.ln() - 1.05f64.ln())).abs() < 1e-12);
        assert!((t0 + 13.99).abs() < 0.01);
        let p2 = PotentialParams {
            beta0: 3.0,
            beta_tilde: 2.0,
            ..p
        };
        assert!((compute_t0(&p2).unwrap() + 1.0).abs() < 1e-12);
        assert!(compute_t0(&p.with_beta_tilde(1.05)).is_err());
        let near = p.with_beta_tilde(1.05 * (1.0 - 1e-12));
        assert_eq!(compute_t0(&near).unwrap(), -THRESHOLD_MAGNITUDE_CAP);
    }

    #[test]
    fn cone_membership() {
        let c = Cone {
            entropy: 0.3,
            slopes: (0.04, 0.045),
        };
        assert!(c.contains(0.0, 0.3));
        assert!(!c.contains(0.0, 0.31));
        assert!(c.contains(-10.0, 0.3 + 0.42));
        assert!(!c.contains(-10.0, 0.3 + 0.46));
    }

    #[test]
    fn piece_triples_follow_recursion() {
        assert_eq!(piece_triple(1, 1, 6).unwrap(), Triple::new(0, 2, 6).unwrap());
        let t = piece_triple(2, 2, 20).unwrap();
        assert_eq!((t.i, t.j), (15, 16));
        assert!(piece_triple(1, 1, 4).is_err());
    }

    #[test]
    fn k1_schedule() {
        let s = build_schedule(
            1,
            &PotentialParams::default(),
            &SearchLimits {
                first_len_min: 6,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(s.triples(), vec![Triple::new(0, 2, 6).unwrap()]);
        assert!(s.is_valid());
        assert!(s.windows.is_empty());
    }

    #[test]
    fn tight_limits_report_first_failure() {
        let err = build_schedule(
            2,
            &PotentialParams::default(),
            &SearchLimits {
                len_max: 8,
                ..Default::default()
            },
        )
        .unwrap_err();
        match err {
            Error::Infeasible(msg) => assert!(msg.contains("exceeds limit"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn k0_rejected() {
        assert!(matches!(
            build_schedule(0, &PotentialParams::default(), &SearchLimits::default()),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn document_round_trip() {
        let p = PotentialParams::default();
        let triples = [piece_triple(2, 1, 9).unwrap(), piece_triple(2, 2, 20).unwrap()];
        let s = Schedule::from_parts(2, p, &triples, &[0.35, 0.34]).unwrap();
        let back = Schedule::from_document(&KvDocument::parse(&s.to_document().render()).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
