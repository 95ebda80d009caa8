//! End-to-end checks of the whole pipeline, one line per check.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fiber::{
    estimate_beta_tilde, expanding_itinerary, horseshoe_exponents, periodic_point, validate_conditions, FiberSystem,
    SamplingOptions,
};
use crate::kv::fmt_f64;
use crate::mixing::mixing_witness;
use crate::schedule::{build_schedule, Schedule};
use crate::transfer::{equilibrium, pressure, BlockGraph, SolverOptions};
use crate::transitions::{
    build_graphs, certify_transition, check_domination, envelope_scan, grid, locate_kink, locate_kink_with, solvers,
    PressureCurve,
};
use crate::words::{count_admissible, verify_union_disjointness, Triple, DEFAULT_ENUM_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub status: Status,
    pub metric: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CHECK {} {} {} seconds={:.1}", self.name, self.status, self.metric, self.seconds)
    }
}

/// Scale knobs of the suite.
#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub census_orbits: usize,
    pub census_steps: usize,
    /// Run the three-piece check (several minutes on one core).
    pub three_pieces: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            census_orbits: 10_000,
            census_steps: 10_000,
            three_pieces: true,
        }
    }
}

/// The suite's check names, in order.
pub const CHECKS: &[&str] = &[
    "params",
    "pressure_oracle",
    "entropy_oracle",
    "gibbs_identity",
    "two_piece_pipeline",
    "three_piece_structure",
    "connectors",
    "disjointness",
    "fiber_conditions",
    "itinerary",
    "spectral_gap",
    "domination",
];

fn outcome(name: &'static str, start: Instant, res: Result<(bool, String)>) -> Outcome {
    let (status, metric) = match res {
        Ok((true, m)) => (Status::Pass, m),
        Ok((false, m)) => (Status::Fail, m),
        Err(Error::CapExceeded { what, estimate, cap }) => (
            Status::Skip,
            format!("cap_exceeded what={what} estimate={estimate:e} cap={cap:e}"),
        ),
        Err(e) => (Status::Fail, format!("error=\"{e}\"")),
    };
    Outcome {
        name,
        status,
        metric,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn skipped(name: &'static str, why: &str) -> Outcome {
    Outcome {
        name,
        status: Status::Skip,
        metric: format!("reason=\"{why}\""),
        seconds: 0.0,
    }
}

/// Runs every check, calling `report` as each one finishes. Failures never
/// stop the suite; checks whose inputs are missing are skipped.
pub fn run_suite(config: &Config, opts: &SuiteOptions, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let mut out = Vec::new();
    let mut push = |o: Outcome, out: &mut Vec<Outcome>| {
        report(&o);
        out.push(o);
    };

    let start = Instant::now();
    let fs = config
        .params
        .validate()
        .and_then(|_| FiberSystem::new(config.params, config.fiber));
    let params_ok = fs.is_ok();
    push(
        outcome(
            "params",
            start,
            fs.as_ref()
                .map(|_| (true, "valid=true".into()))
                .map_err(Clone::clone),
        ),
        &mut out,
    );
    if !params_ok {
        for &name in &CHECKS[1..] {
            push(skipped(name, "invalid parameters"), &mut out);
        }
        return out;
    }
    let fs = fs.expect("checked above");

    let start = Instant::now();
    push(outcome("pressure_oracle", start, pressure_oracle(config)), &mut out);
    let start = Instant::now();
    push(outcome("entropy_oracle", start, entropy_oracle(config)), &mut out);
    let start = Instant::now();
    push(outcome("gibbs_identity", start, gibbs_identity(config, opts.seed)), &mut out);

    let start = Instant::now();
    let two = two_piece(config);
    let (schedule, curve) = match &two {
        Ok(t) => (Some(t.schedule.clone()), Some(t.curve.clone())),
        Err(_) => (None, None),
    };
    push(
        outcome("two_piece_pipeline", start, two.map(|t| (t.passed, t.metric))),
        &mut out,
    );

    if opts.three_pieces {
        let start = Instant::now();
        push(outcome("three_piece_structure", start, three_piece(config)), &mut out);
    } else {
        push(skipped("three_piece_structure", "disabled by options"), &mut out);
    }

    let Some(schedule) = schedule else {
        for &name in &["connectors", "disjointness"] {
            push(skipped(name, "no two-piece schedule"), &mut out);
        }
        let start = Instant::now();
        push(outcome("fiber_conditions", start, fiber_conditions(&fs)), &mut out);
        let start = Instant::now();
        push(outcome("itinerary", start, itinerary(&fs)), &mut out);
        for &name in &["spectral_gap", "domination"] {
            push(skipped(name, "no two-piece schedule"), &mut out);
        }
        return out;
    };

    let start = Instant::now();
    push(outcome("connectors", start, connectors(config, &schedule, opts.seed)), &mut out);
    let start = Instant::now();
    push(outcome("disjointness", start, disjointness(&schedule, opts.seed)), &mut out);
    let start = Instant::now();
    push(outcome("fiber_conditions", start, fiber_conditions(&fs)), &mut out);
    let start = Instant::now();
    push(outcome("itinerary", start, itinerary(&fs)), &mut out);

    let start = Instant::now();
    let sampling = SamplingOptions {
        n_orbits: opts.census_orbits,
        n_steps: opts.census_steps,
        seed: opts.seed,
        ..config.sampling
    };
    let gap = spectral_gap(&fs, &schedule, &sampling);
    let beta_tilde_hat = gap.as_ref().ok().and_then(|g| g.2);
    push(outcome("spectral_gap", start, gap.map(|g| (g.0, g.1))), &mut out);

    match (beta_tilde_hat, curve) {
        (Some(bt), Some(_)) => {
            let start = Instant::now();
            push(outcome("domination", start, domination(config, &schedule, bt)), &mut out);
        }
        _ => push(skipped("domination", "no spectral-gap estimate"), &mut out),
    }
    out
}

/// No check failed. Skipped checks (over a cap, or disabled) do not count
/// against the run.
pub fn all_passed(outcomes: &[Outcome]) -> bool {
    outcomes.iter().all(|o| o.status != Status::Fail)
}

fn pressure_oracle(config: &Config) -> Result<(bool, String)> {
    let p = config.params;
    let g = BlockGraph::build(Triple::new(0, 1, 2)?, 1e6)?;
    let mut worst = 0.0f64;
    for t in [-20.0, -10.0, -5.0, -1.0, 0.0, 1.0] {
        let [l0, l2] = p.log_weights(t);
        let (w0, w2) = (l0.exp(), l2.exp());
        let exact = ((w0 + (w0 * w0 + 4.0 * w0 * w2).sqrt()) / 2.0).ln();
        worst = worst.max((pressure(&g, &p, t).value - exact).abs());
    }
    Ok((worst <= 1e-10, format!("max_error={}", fmt_f64(worst))))
}

fn entropy_oracle(config: &Config) -> Result<(bool, String)> {
    let p = config.params;
    let t = Triple::new(0, 1, 3)?;
    let g = BlockGraph::build(t, 1e6)?;
    let h = pressure(&g, &p, 0.0).value;
    // Root of x^3 = x^2 + 1 on [1, 2].
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid * mid - mid * mid - 1.0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root_error = (h - lo.ln()).abs();
    let c31 = count_admissible(t, 31, DEFAULT_ENUM_CAP)? as f64;
    let c30 = count_admissible(t, 30, DEFAULT_ENUM_CAP)? as f64;
    let count_error = (h - (c31.ln() - c30.ln())).abs();
    Ok((
        root_error <= 1e-10 && count_error <= 1e-2,
        format!("root_error={} count_error={}", fmt_f64(root_error), fmt_f64(count_error)),
    ))
}

fn gibbs_identity(config: &Config, seed: u64) -> Result<(bool, String)> {
    let p = config.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolverOptions::default();
    let (mut gibbs, mut deriv) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let len = rng.gen_range(2..=10);
        let i = rng.gen_range(0..len);
        let j = rng.gen_range(i + 1..=len);
        let t = rng.gen_range(-20.0..5.0);
        let g = BlockGraph::build(Triple::new(i, j, len)?, 1e6)?;
        let m = equilibrium(&g, &p, t, &opts)?;
        gibbs = gibbs.max((m.entropy + t * m.phi_average - m.pressure).abs());
        let h = 1e-4;
        let fd = (pressure(&g, &p, t + h).value - pressure(&g, &p, t - h).value) / (2.0 * h);
        deriv = deriv.max((fd - m.phi_average).abs());
    }
    Ok((
        gibbs <= 1e-8 && deriv <= 1e-6,
        format!("gibbs_residual={} derivative_error={}", fmt_f64(gibbs), fmt_f64(deriv)),
    ))
}

struct TwoPiece {
    schedule: Schedule,
    curve: PressureCurve,
    passed: bool,
    metric: String,
}

fn two_piece(config: &Config) -> Result<TwoPiece> {
    let limits = config.limits;
    let schedule = build_schedule(2, &config.params, &limits)?;
    let graphs = build_graphs(&schedule, limits.node_cap)?;
    let mut solvers = solvers(&schedule, &graphs, limits.solver);
    let w = schedule.tau_window(1);
    let g = grid(w.minus - 2.0, 0.0, 0.01)?;
    let curve = envelope_scan(&mut solvers, &g, false)?;
    let root = locate_kink(1, &schedule, &mut solvers)?;
    let cert = certify_transition(1, &schedule, &mut solvers, &root)?;
    let gap = schedule.pieces[1].exponents.0 - schedule.pieces[0].exponents.1;
    let changes = curve.active_changes();
    let entropies = (cert.mu_minus.entropy, cert.mu_plus.entropy);
    let passed = changes == 1
        && cert.containment
        && cert.slope_jump() >= 0.9 * gap
        && entropies.0 > 0.005
        && entropies.1 > 0.005;
    let metric = format!(
        "triples={:?} changes={changes} t1={} window=[{},{}] slope_jump={} gap={} entropies=({},{}) certificate={}",
        schedule.triples().iter().map(|t| (t.i, t.j, t.len)).collect::<Vec<_>>(),
        fmt_f64(root.t),
        fmt_f64(w.minus),
        fmt_f64(w.plus),
        fmt_f64(cert.slope_jump()),
        fmt_f64(gap),
        fmt_f64(entropies.0),
        fmt_f64(entropies.1),
        cert.passed()
    );
    Ok(TwoPiece {
        schedule,
        curve,
        passed,
        metric,
    })
}

fn three_piece(config: &Config) -> Result<(bool, String)> {
    let limits = config.limits;
    let schedule = match build_schedule(3, &config.params, &limits) {
        Err(Error::Infeasible(why)) => {
            return Err(Error::CapExceeded {
                what: if why.contains("cap") { "three-piece schedule nodes" } else { "three-piece schedule window" },
                estimate: f64::NAN,
                cap: limits.node_cap,
            })
        }
        other => other?,
    };
    let graphs = build_graphs(&schedule, limits.node_cap)?;
    let mut solvers = solvers(&schedule, &graphs, limits.solver);
    let t1 = locate_kink_with(1, &schedule, &mut solvers, 1e-6)?.t;
    let t2 = locate_kink_with(2, &schedule, &mut solvers, 1e-6)?.t;
    let lo = schedule.tau_window(2).minus - 2.0;
    let points: Vec<f64> = (0..16).map(|k| lo * (1.0 - k as f64 / 15.0)).collect();
    let curve = envelope_scan(&mut solvers, &points, false)?;
    let changes = curve.active_changes();
    let ordered = t2 < t1 && t1 < 0.0;
    let cells_hold = curve
        .change_cells()
        .iter()
        .zip([t2, t1])
        .all(|(&(a, b), t)| a <= t && t <= b);
    Ok((
        changes == 2 && ordered && cells_hold && curve.active_non_increasing_in_t(),
        format!(
            "triples={:?} nodes={:?} changes={changes} t2={} t1={}",
            schedule.triples().iter().map(|t| (t.i, t.j, t.len)).collect::<Vec<_>>(),
            graphs.iter().map(BlockGraph::len).collect::<Vec<_>>(),
            fmt_f64(t2),
            fmt_f64(t1)
        ),
    ))
}

fn connectors(config: &Config, schedule: &Schedule, seed: u64) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (idx, t) in schedule.constraints().into_iter().enumerate() {
        let r = mixing_witness(t, 1000, config.limits.node_cap, seed.wrapping_add(idx as u64))?;
        ok &= r.failures.is_empty() && r.max_connector <= r.bound && r.period == 1;
        parts.push(format!(
            "piece{}:max={}/bound={}/failures={}/period={}",
            idx + 1,
            r.max_connector,
            r.bound,
            r.failures.len(),
            r.period
        ));
    }
    Ok((ok, parts.join(" ")))
}

fn disjointness(schedule: &Schedule, seed: u64) -> Result<(bool, String)> {
    let pieces = schedule.constraints();
    let horizon = pieces.iter().map(|t| t.len).sum();
    let r = verify_union_disjointness(&pieces, horizon, 1 << 32, 100_000, seed)?;
    if !r.exhaustive {
        return Err(Error::CapExceeded {
            what: "disjointness search nodes",
            estimate: f64::NAN,
            cap: (1u64 << 32) as f64,
        });
    }
    Ok((
        r.is_disjoint(),
        format!(
            "horizon={horizon} words={} exhaustive={} counterexample={}",
            r.words_checked,
            r.exhaustive,
            r.counterexample.map(|c| c.word.to_string()).unwrap_or_else(|| "none".into())
        ),
    ))
}

fn fiber_conditions(fs: &FiberSystem) -> Result<(bool, String)> {
    let r = validate_conditions(fs, 10_001);
    let f01 = r.get("F01").map(|c| c.margin).unwrap_or(f64::NAN);
    let worst = r.checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    Ok((
        r.passed() && worst > 0.0 && (f01 - 0.18).abs() <= 0.01,
        format!(
            "f01_margin={} worst_margin={} failed={failed:?}",
            fmt_f64(f01),
            fmt_f64(worst)
        ),
    ))
}

fn itinerary(fs: &FiberSystem) -> Result<(bool, String)> {
    let d = fs.fundamental_domain();
    let it = expanding_itinerary(d, fs)?;
    let q = periodic_point(fs, &it)?;
    let min_leg = it.legs.iter().map(|l| l.expansion).fold(f64::INFINITY, f64::min);
    let covers = it.image().contains(&d);
    Ok((
        covers && min_leg >= 1.1 && q.residual <= 1e-12,
        format!(
            "legs={} word_len={} min_leg_expansion={} covers={covers} q_star={} residual={} derivative={}",
            it.legs.len(),
            it.symbol_word.len(),
            fmt_f64(min_leg),
            fmt_f64(q.q_star),
            fmt_f64(q.residual),
            fmt_f64(q.derivative)
        ),
    ))
}

/// `(passed, metric, beta_tilde_hat)`.
fn spectral_gap(fs: &FiberSystem, schedule: &Schedule, opts: &SamplingOptions) -> Result<(bool, String, Option<f64>)> {
    let log_beta2 = fs.params().beta2.ln();
    let est = match estimate_beta_tilde(fs, schedule, opts) {
        Ok(e) => e,
        Err(Error::LemmaViolation(why)) => return Ok((false, format!("gap_violation=\"{why}\""), None)),
        Err(e) => return Err(e),
    };
    let rows = horseshoe_exponents(fs, schedule, 8, opts.n_steps, opts.seed)?;
    let mut worst = f64::INFINITY;
    for (piece, row) in &rows {
        let (lo, hi) = schedule.pieces[piece - 1].exponents;
        worst = worst.min((row.exponent - lo + 1e-3).min(hi + 1e-3 - row.exponent));
    }
    let passed = est.max_exponent < log_beta2 && worst >= 0.0;
    Ok((
        passed,
        format!(
            "orbits={} max_exponent={} log_beta2={} margin={} beta_tilde_hat={} horseshoe_orbits={} horseshoe_slack={}",
            est.census.len(),
            fmt_f64(est.max_exponent),
            fmt_f64(log_beta2),
            fmt_f64(est.margin),
            fmt_f64(est.beta_tilde_hat),
            rows.len(),
            fmt_f64(worst)
        ),
        Some(est.beta_tilde_hat),
    ))
}

fn domination(config: &Config, schedule: &Schedule, beta_tilde: f64) -> Result<(bool, String)> {
    // Only the threshold depends on beta_tilde; pieces and windows are kept.
    let params = schedule.params.with_beta_tilde(beta_tilde);
    let entropies: Vec<f64> = schedule.pieces.iter().map(|p| p.entropy).collect();
    let rescheduled = Schedule::from_parts(schedule.k, params, &schedule.triples(), &entropies)?;
    let graphs = build_graphs(&rescheduled, config.limits.node_cap)?;
    let mut solvers = solvers(&rescheduled, &graphs, config.limits.solver);
    let t_min = rescheduled.t0.min(rescheduled.tau_window(1).minus) - 30.0;
    let g = grid(t_min, 0.0, 0.1)?;
    let curve = envelope_scan(&mut solvers, &g, false)?;
    let r = check_domination(&curve, &rescheduled);
    Ok((
        r.acceptable(),
        format!(
            "beta_tilde={} t0={} crossover={} covers_t0={} holds_below_t0={} t0_shortfall={}",
            fmt_f64(beta_tilde),
            fmt_f64(r.t0),
            r.crossover.map(fmt_f64).unwrap_or_else(|| "none".into()),
            r.covers_t0,
            r.holds_below_t0,
            r.t0_shortfall
        ),
    ))
}
