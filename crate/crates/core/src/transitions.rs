//! The envelope `P(t) = max_l P_l(t)` of the piece pressures, its kinks and
//! the certificates of the coexisting equilibrium states there.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kv::{fmt_f64, KvDocument};
use crate::schedule::Schedule;
use crate::transfer::{BlockGraph, EquilibriumMeasure, PieceSolver, SolverOptions};

/// Bisection stops once the bracket is this narrow.
pub const KINK_TOL: f64 = 1e-10;
const MAX_EXPANSIONS: usize = 60;

/// Block graphs of all pieces of a schedule, in order.
pub fn build_graphs(schedule: &Schedule, node_cap: f64) -> Result<Vec<BlockGraph>> {
    schedule
        .constraints()
        .into_iter()
        .map(|t| BlockGraph::build(t, node_cap))
        .collect()
}

/// One warm-started solver per piece.
pub fn solvers<'a>(schedule: &Schedule, graphs: &'a [BlockGraph], opts: SolverOptions) -> Vec<PieceSolver<'a>> {
    graphs
        .iter()
        .map(|g| PieceSolver::new(g, schedule.params, opts))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub t: f64,
    /// Final bracket `[lo, hi]` with `d(lo) < 0 <= d(hi)`.
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Root of an increasing function by bisection, starting from `window` and
/// expanding it geometrically until `d` changes sign.
pub fn bisect_increasing(mut d: impl FnMut(f64) -> Result<f64>, window: (f64, f64), tol: f64) -> Result<Root> {
    let (mut lo, mut hi) = window;
    let mut d_lo = d(lo)?;
    let mut d_hi = d(hi)?;
    let mut evaluations = 2;
    let mut width = hi - lo;
    for _ in 0..MAX_EXPANSIONS {
        if d_lo < 0.0 && d_hi >= 0.0 {
            break;
        }
        width *= 2.0;
        if d_lo >= 0.0 {
            lo -= width;
            d_lo = d(lo)?;
        } else {
            hi += width;
            d_hi = d(hi)?;
        }
        evaluations += 1;
    }
    if !(d_lo < 0.0 && d_hi >= 0.0) {
        return Err(Error::NoSignChange { lo, hi, d_lo, d_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = d(mid)?;
        evaluations += 1;
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Root {
        t: 0.5 * (lo + hi),
        bracket: (lo, hi),
        evaluations,
    })
}

/// Crossing of pieces `ell` and `ell + 1` (1-based).
///
/// `D(t) = P_ell(t) - P_{ell+1}(t)` is strictly increasing when the exponent
/// ranges are disjoint, which is checked first.
pub fn locate_kink(ell: usize, schedule: &Schedule, solvers: &mut [PieceSolver<'_>]) -> Result<Root> {
    locate_kink_with(ell, schedule, solvers, KINK_TOL)
}

/// [`locate_kink`] with bisection tolerance `tol`.
pub fn locate_kink_with(ell: usize, schedule: &Schedule, solvers: &mut [PieceSolver<'_>], tol: f64) -> Result<Root> {
    if schedule.k < 2 {
        return Err(Error::Precondition("k >= 2 required for inter-piece kinks".into()));
    }
    if ell == 0 || ell >= schedule.k {
        return Err(Error::Precondition(format!("kink index {ell} outside 1..{}", schedule.k - 1)));
    }
    let lower = &schedule.pieces[ell - 1];
    let upper = &schedule.pieces[ell];
    if !(lower.exponents.1 < upper.exponents.0) {
        return Err(Error::Precondition(format!(
            "exponent ranges of pieces {ell} and {} are not disjoint; the pressure difference need not be monotone",
            ell + 1
        )));
    }
    let w = schedule.tau_window(ell);
    let (a, b) = solvers.split_at_mut(ell);
    let (sa, sb) = (&mut a[ell - 1], &mut b[0]);
    bisect_increasing(
        |t| Ok(sa.pressure(t).value - sb.pressure(t).value),
        (w.minus - 1.0, w.plus + 1.0),
        tol,
    )
}

#[derive(Clone, Debug)]
pub struct TransitionCertificate {
    pub ell: usize,
    pub t: f64,
    pub bracket: (f64, f64),
    /// Derivative of the envelope from the left (piece `ell + 1`).
    pub left_slope: f64,
    /// Derivative of the envelope from the right (piece `ell`).
    pub right_slope: f64,
    pub mu_minus: EquilibriumMeasure,
    pub mu_plus: EquilibriumMeasure,
    pub envelope: f64,
    pub containment: bool,
    /// Names of failed checks; empty for a valid certificate.
    pub failures: Vec<String>,
}

impl TransitionCertificate {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn slope_jump(&self) -> f64 {
        self.right_slope - self.left_slope
    }
}

/// Equilibrium states of the two pieces meeting at the kink `ell`, with the
/// checks that make it a first-order transition between positive-entropy
/// states.
pub fn certify_transition(
    ell: usize,
    schedule: &Schedule,
    solvers: &mut [PieceSolver<'_>],
    root: &Root,
) -> Result<TransitionCertificate> {
    if schedule.k < 2 {
        return Err(Error::Precondition("k >= 2 required for inter-piece kinks".into()));
    }
    let t = root.t;
    let mu_plus = solvers[ell - 1].equilibrium(t)?;
    let mu_minus = solvers[ell].equilibrium(t)?;
    let mut envelope = f64::NEG_INFINITY;
    for s in solvers.iter_mut() {
        envelope = envelope.max(s.pressure(t).value);
    }
    let lower = &schedule.pieces[ell - 1];
    let upper = &schedule.pieces[ell];
    let w = schedule.tau_window(ell);
    let mut failures = Vec::new();
    for (name, m) in [("plus", &mu_plus), ("minus", &mu_minus)] {
        if (m.pressure - envelope).abs() > 1e-8 {
            failures.push(format!("mu_{name} pressure {} misses envelope {envelope}", m.pressure));
        }
        if m.gibbs_residual > 1e-8 {
            failures.push(format!("mu_{name} Gibbs residual {:e}", m.gibbs_residual));
        }
        if !(m.entropy > 0.0) {
            failures.push(format!("mu_{name} entropy {} not positive", m.entropy));
        }
    }
    let slack = 1e-9;
    if !(lower.exponents.0 - slack <= mu_plus.chi_average && mu_plus.chi_average <= lower.exponents.1 + slack) {
        failures.push(format!("mu_plus exponent {} outside its range", mu_plus.chi_average));
    }
    if !(upper.exponents.0 - slack <= mu_minus.chi_average && mu_minus.chi_average <= upper.exponents.1 + slack) {
        failures.push(format!("mu_minus exponent {} outside its range", mu_minus.chi_average));
    }
    let left_slope = mu_minus.phi_average;
    let right_slope = mu_plus.phi_average;
    let gap = upper.exponents.0 - lower.exponents.1;
    if !(right_slope - left_slope >= 0.9 * gap) {
        failures.push(format!(
            "slope jump {} below 0.9 * exponent gap {gap}",
            right_slope - left_slope
        ));
    }
    let containment = w.minus <= t && t <= w.plus;
    if !containment {
        failures.push(format!("kink {t} outside window [{}, {}]", w.minus, w.plus));
    }
    Ok(TransitionCertificate {
        ell,
        t,
        bracket: root.bracket,
        left_slope,
        right_slope,
        mu_minus,
        mu_plus,
        envelope,
        containment,
        failures,
    })
}

/// Key-value document of a list of certificates.
pub fn certificates_document(certs: &[TransitionCertificate]) -> KvDocument {
    let mut d = KvDocument::new();
    d.set("count", certs.len());
    for c in certs {
        let pre = format!("kink.{}", c.ell);
        d.set_f64(format!("{pre}.t"), c.t);
        d.set_f64(format!("{pre}.bracket_lo"), c.bracket.0);
        d.set_f64(format!("{pre}.bracket_hi"), c.bracket.1);
        d.set_f64(format!("{pre}.left_slope"), c.left_slope);
        d.set_f64(format!("{pre}.right_slope"), c.right_slope);
        d.set_f64(format!("{pre}.entropy_minus"), c.mu_minus.entropy);
        d.set_f64(format!("{pre}.entropy_plus"), c.mu_plus.entropy);
        d.set_f64(format!("{pre}.chi_minus"), c.mu_minus.chi_average);
        d.set_f64(format!("{pre}.chi_plus"), c.mu_plus.chi_average);
        d.set(format!("{pre}.containment"), c.containment);
        d.set(format!("{pre}.passed"), c.passed());
    }
    d
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub t: f64,
    /// Pressure of each piece.
    pub pieces: Vec<f64>,
    pub envelope: f64,
    /// 1-based index of the maximizing piece.
    pub active: usize,
    /// Derivative of the active piece (`None` when measures were skipped).
    pub slope: Option<f64>,
    pub entropy: Option<f64>,
    pub chi_average: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PressureCurve {
    pub rows: Vec<CurveRow>,
}

/// Grid `t_min, t_min + step, ...` up to `t_max` (inclusive within 1e-9 steps).
pub fn grid(t_min: f64, t_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParams(format!("step must be positive, got {step}")));
    }
    if !(t_min <= t_max) {
        return Err(Error::InvalidParams(format!("empty range [{t_min}, {t_max}]")));
    }
    let n = ((t_max - t_min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| t_min + k as f64 * step).collect())
}

/// Evaluates every piece on `grid`; with `measures`, also the equilibrium
/// data of the active piece.
pub fn envelope_scan(solvers: &mut [PieceSolver<'_>], grid: &[f64], measures: bool) -> Result<PressureCurve> {
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let pieces: Vec<f64> = solvers.iter_mut().map(|s| s.pressure(t).value).collect();
        let (mut active, mut envelope) = (0, f64::NEG_INFINITY);
        for (idx, &v) in pieces.iter().enumerate() {
            if v > envelope {
                envelope = v;
                active = idx;
            }
        }
        let (slope, entropy, chi) = if measures {
            let m = solvers[active].equilibrium(t)?;
            (Some(m.phi_average), Some(m.entropy), Some(m.chi_average))
        } else {
            (None, None, None)
        };
        rows.push(CurveRow {
            t,
            pieces,
            envelope,
            active: active + 1,
            slope,
            entropy,
            chi_average: chi,
        });
    }
    Ok(PressureCurve { rows })
}

impl PressureCurve {
    pub fn active_changes(&self) -> usize {
        self.rows.windows(2).filter(|w| w[0].active != w[1].active).count()
    }

    /// Grid cells `(t_a, t_b)` where the active piece changes.
    pub fn change_cells(&self) -> Vec<(f64, f64)> {
        self.rows
            .windows(2)
            .filter(|w| w[0].active != w[1].active)
            .map(|w| (w[0].t, w[1].t))
            .collect()
    }

    pub fn active_non_increasing_in_t(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].active <= w[0].active)
    }

    /// Smallest discrete second difference of the envelope (uniform grid).
    pub fn min_second_difference(&self) -> f64 {
        self.rows
            .windows(3)
            .map(|w| w[0].envelope - 2.0 * w[1].envelope + w[2].envelope)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,P,dP_dt,entropy,chi_average,piece_index\n");
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.envelope),
                opt(r.slope),
                opt(r.entropy),
                opt(r.chi_average),
                r.active
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct DominationReport {
    pub beta_tilde: f64,
    pub t0: f64,
    /// `(t, P(t) - (log 3 - t log beta_tilde))` on the grid.
    pub margins: Vec<(f64, f64)>,
    /// Largest `t` with non-negative margin at and left of it (interpolated);
    /// `None` if the margin is negative at the left end of the grid.
    pub crossover: Option<f64>,
    /// Some grid point lies at or left of `t0`.
    pub covers_t0: bool,
    /// Margin non-negative at every grid point `t <= t0`.
    pub holds_below_t0: bool,
    /// The schedule does not place its first kink window left of `t0`.
    pub t0_shortfall: bool,
}

impl DominationReport {
    /// Either the bound holds up to `t0`, or the shortfall is flagged and a
    /// crossover was found.
    pub fn acceptable(&self) -> bool {
        (self.covers_t0 && self.holds_below_t0) || (self.t0_shortfall && self.crossover.is_some())
    }
}

/// Compares the envelope with `log 3 - t log beta_tilde` on the curve grid.
pub fn check_domination(curve: &PressureCurve, schedule: &Schedule) -> DominationReport {
    let beta_tilde = schedule.params.beta_tilde;
    let t0 = schedule.t0;
    let bound = |t: f64| 3f64.ln() - t * beta_tilde.ln();
    let margins: Vec<(f64, f64)> = curve.rows.iter().map(|r| (r.t, r.envelope - bound(r.t))).collect();
    let mut crossover = None;
    if margins.first().is_some_and(|m| m.1 >= 0.0) {
        let mut last = margins[0];
        crossover = Some(last.0);
        for &m in &margins[1..] {
            if m.1 < 0.0 {
                // Linear interpolation inside the cell.
                let frac = last.1 / (last.1 - m.1);
                crossover = Some(last.0 + frac * (m.0 - last.0));
                break;
            }
            crossover = Some(m.0);
            last = m;
        }
    }
    let below: Vec<&(f64, f64)> = margins.iter().filter(|m| m.0 <= t0).collect();
    DominationReport {
        beta_tilde,
        t0,
        covers_t0: !below.is_empty(),
        holds_below_t0: below.iter().all(|m| m.1 >= 0.0),
        crossover,
        margins,
        t0_shortfall: !schedule.threshold_met(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_pieces_cross_exactly() {
        let (h1, a1, h2, a2) = (0.5, 0.04, 0.3, 0.05);
        let d = |t: f64| Ok((h1 - a1 * t) - (h2 - a2 * t));
        let r = bisect_increasing(d, (-30.0, -10.0), 1e-12).unwrap();
        let exact = (h2 - h1) / (a2 - a1);
        assert!((r.t - exact).abs() < 1e-11, "{} vs {exact}", r.t);
    }

    #[test]
    fn bracket_expands_until_sign_change() {
        let r = bisect_increasing(|t| Ok(t - 100.0), (0.0, 1.0), 1e-10).unwrap();
        assert!((r.t - 100.0).abs() < 1e-9);
        let r = bisect_increasing(|t| Ok(t + 100.0), (0.0, 1.0), 1e-10).unwrap();
        assert!((r.t + 100.0).abs() < 1e-9);
    }

    #[test]
    fn no_sign_change_reports_values() {
        match bisect_increasing(|_| Ok(1.0), (0.0, 1.0), 1e-10) {
            Err(Error::NoSignChange { d_lo, d_hi, .. }) => assert_eq!((d_lo, d_hi), (1.0, 1.0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_rows() {
        assert_eq!(grid(-30.0, 2.0, 0.05).unwrap().len(), 641);
        assert!(grid(0.0, 1.0, 0.0).is_err());
        assert!(grid(0.0, 1.0, -1.0).is_err());
        assert_eq!(grid(0.0, 0.0, 1.0).unwrap(), vec![0.0]);
    }
}
