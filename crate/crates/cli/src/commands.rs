use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use log::{info, warn};

use porcupine::acceptance::{all_passed, run_suite, SuiteOptions};
use porcupine::fiber::{
    census_csv, estimate_beta_tilde, expanding_itinerary, periodic_point, validate_conditions, FiberSystem,
};
use porcupine::kv::{fmt_f64, KvDocument};
use porcupine::mixing::mixing_witness;
use porcupine::schedule::{build_schedule, Schedule};
use porcupine::transitions::{
    build_graphs, certificates_document, certify_transition, envelope_scan, grid, locate_kink, solvers,
};
use porcupine::{Config, Error};

use crate::exit::{self, Failure};

pub fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = read(p)?;
            Config::parse(&text).map_err(|e| Failure::data(format!("{}: {e}", p.display())))
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::internal(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::internal(format!("stdout: {e}"))),
    }
}

fn load_schedule(path: &Path) -> Result<Schedule, Failure> {
    let text = read(path)?;
    KvDocument::parse(&text)
        .and_then(|d| Schedule::from_document(&d))
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Number of pieces; overrides `schedule.k`.
    #[arg(long)]
    k: Option<usize>,
    /// Output file (stdout if absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Report a missed threshold constraint as a warning instead of failing.
    #[arg(long)]
    allow_t0_shortfall: bool,
}

pub fn schedule(config: &Config, args: &ScheduleArgs) -> Result<(), Failure> {
    let k = args.k.unwrap_or(config.k);
    if k == 0 {
        return Err(Failure::usage("k must be at least 1"));
    }
    let s = build_schedule(k, &config.params, &config.limits)?;
    emit(args.out.as_deref(), &s.to_document().render())?;
    let violations = s.violations();
    if !violations.is_empty() {
        return Err(Failure::new(exit::INFEASIBLE, violations.join("; ")));
    }
    if !s.threshold_met() {
        let msg = format!(
            "first kink window ends at {} which is not below t0 = {}",
            fmt_f64(s.windows[0].plus),
            fmt_f64(s.t0)
        );
        if args.allow_t0_shortfall {
            warn!("t0 shortfall: {msg}");
        } else {
            return Err(Failure::new(exit::INFEASIBLE, format!("t0 shortfall: {msg}")));
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct PressureArgs {
    /// Schedule document.
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    t_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    t_max: f64,
    #[arg(long, allow_hyphen_values = true)]
    step: f64,
    /// Leave the slope, entropy and chi columns empty.
    #[arg(long)]
    no_measures: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

pub fn pressure(config: &Config, args: &PressureArgs) -> Result<(), Failure> {
    let points = grid(args.t_min, args.t_max, args.step).map_err(|e| Failure::usage(e.to_string()))?;
    let s = load_schedule(&args.schedule)?;
    let graphs = build_graphs(&s, config.limits.node_cap)?;
    let mut solvers = solvers(&s, &graphs, config.limits.solver);
    let curve = envelope_scan(&mut solvers, &points, !args.no_measures)?;
    emit(args.out.as_deref(), &curve.to_csv())
}

#[derive(Debug, Args)]
pub struct TransitionsArgs {
    #[arg(long)]
    schedule: PathBuf,
    /// Grid step of the envelope CSV.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Envelope CSV (stdout if absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Certificate document (stderr summary only if absent).
    #[arg(long)]
    certificate: Option<PathBuf>,
}

pub fn transitions(config: &Config, args: &TransitionsArgs) -> Result<(), Failure> {
    let s = load_schedule(&args.schedule)?;
    let graphs = build_graphs(&s, config.limits.node_cap)?;
    let mut solvers = solvers(&s, &graphs, config.limits.solver);
    let mut certs = Vec::new();
    for ell in 1..s.k {
        let root = locate_kink(ell, &s, &mut solvers)?;
        info!("kink {ell} at t = {}", fmt_f64(root.t));
        certs.push(certify_transition(ell, &s, &mut solvers, &root)?);
    }
    let t_min = s.windows.last().map_or(-2.0, |w| w.minus - 2.0);
    let points = grid(t_min, 0.0, args.step).map_err(|e| Failure::usage(e.to_string()))?;
    let curve = envelope_scan(&mut solvers, &points, true)?;
    emit(args.out.as_deref(), &curve.to_csv())?;
    let doc = certificates_document(&certs).render();
    match &args.certificate {
        Some(p) => emit(Some(p), &doc)?,
        None => eprint!("{doc}"),
    }
    let failed: Vec<String> = certs
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("kink {}: {}", c.ell, c.failures.join(", ")))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(exit::CHECK_FAILED, failed.join("; ")))
    }
}

#[derive(Debug, Args)]
pub struct MixingArgs {
    #[arg(long)]
    schedule: PathBuf,
    /// Random admissible pairs per piece.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
}

pub fn mixing(config: &Config, args: &MixingArgs) -> Result<(), Failure> {
    let s = load_schedule(&args.schedule)?;
    let mut doc = KvDocument::new();
    let mut ok = true;
    for (idx, t) in s.constraints().into_iter().enumerate() {
        let seed = config.sampling.seed.wrapping_add(idx as u64);
        let r = mixing_witness(t, args.pairs, config.limits.node_cap, seed)?;
        let pre = format!("piece.{}", idx + 1);
        doc.set(format!("{pre}.constraint"), t);
        doc.set(format!("{pre}.period"), r.period);
        doc.set(format!("{pre}.pairs"), r.pairs);
        doc.set(format!("{pre}.max_connector"), r.max_connector);
        doc.set(format!("{pre}.bound"), r.bound);
        doc.set(format!("{pre}.failures"), r.failures.len());
        for f in &r.failures {
            warn!("piece {}: {f}", idx + 1);
        }
        ok &= r.mixing() && r.max_connector <= r.bound;
    }
    emit(None, &doc.render())?;
    if ok {
        Ok(())
    } else {
        Err(Failure::new(exit::CHECK_FAILED, "connector check failed"))
    }
}

#[derive(Debug, Args)]
pub struct FiberArgs {
    /// Sample points per condition.
    #[arg(long, default_value_t = 10_001)]
    grid: usize,
}

pub fn fiber_validate(config: &Config, args: &FiberArgs) -> Result<(), Failure> {
    if args.grid < 3 {
        return Err(Failure::usage("--grid must be at least 3"));
    }
    let fs = FiberSystem::new(config.params, config.fiber)?;
    let report = validate_conditions(&fs, args.grid);
    let mut out = report.render();
    let mut ok = report.passed();
    match expanding_itinerary(fs.fundamental_domain(), &fs) {
        Ok(it) => {
            let q = periodic_point(&fs, &it)?;
            let min_leg = it.legs.iter().map(|l| l.expansion).fold(f64::INFINITY, f64::min);
            let covers = it.image().contains(&fs.fundamental_domain());
            let pass = covers && min_leg >= fs.kappa() && q.residual <= 1e-12;
            ok &= pass;
            out.push_str(&format!(
                "ITINERARY {} legs={} min_leg_expansion={} q_star={} residual={} derivative={}\n",
                if pass { "PASS" } else { "FAIL" },
                it.legs.len(),
                fmt_f64(min_leg),
                fmt_f64(q.q_star),
                fmt_f64(q.residual),
                fmt_f64(q.derivative)
            ));
        }
        Err(e) => {
            ok = false;
            out.push_str(&format!("ITINERARY FAIL error=\"{e}\"\n"));
        }
    }
    emit(None, &out)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::new(exit::CHECK_FAILED, "fiber conditions failed"))
    }
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[arg(long)]
    schedule: PathBuf,
    /// Number of sampled orbits; overrides `sampling.n_orbits`.
    #[arg(long)]
    orbits: Option<usize>,
    /// Steps per orbit; overrides `sampling.n_steps`.
    #[arg(long)]
    steps: Option<usize>,
    /// Census CSV (stdout if absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

pub fn lyapunov(config: &Config, args: &LyapunovArgs) -> Result<(), Failure> {
    let s = load_schedule(&args.schedule)?;
    let fs = FiberSystem::new(s.params, config.fiber)?;
    let mut opts = config.sampling;
    opts.n_orbits = args.orbits.unwrap_or(opts.n_orbits);
    opts.n_steps = args.steps.unwrap_or(opts.n_steps);
    if opts.n_orbits == 0 || opts.n_steps == 0 {
        return Err(Failure::usage("orbit and step counts must be positive"));
    }
    let est = match estimate_beta_tilde(&fs, &s, &opts) {
        Err(Error::LemmaViolation(why)) => return Err(Failure::new(exit::CHECK_FAILED, why)),
        other => other?,
    };
    emit(args.out.as_deref(), &census_csv(&est.census))?;
    let mut doc = KvDocument::new();
    doc.set("orbits", est.census.len());
    doc.set_f64("max_exponent", est.max_exponent);
    doc.set("argmax", est.argmax);
    doc.set_f64("margin", est.margin);
    doc.set_f64("beta_tilde_hat", est.beta_tilde_hat);
    if args.out.is_some() {
        emit(None, &doc.render())
    } else {
        eprint!("{}", doc.render());
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Skip the three-piece check.
    #[arg(long)]
    quick: bool,
}

pub fn verify(config: &Config, args: &VerifyArgs) -> Result<(), Failure> {
    let opts = SuiteOptions {
        seed: config.sampling.seed,
        census_orbits: config.sampling.n_orbits,
        census_steps: config.sampling.n_steps,
        three_pieces: !args.quick,
    };
    let outcomes = run_suite(config, &opts, |o| {
        println!("{o}");
        let _ = std::io::stdout().flush();
    });
    if all_passed(&outcomes) {
        Ok(())
    } else {
        Err(Failure::new(exit::CHECK_FAILED, "some checks failed"))
    }
}
