//! Central Lyapunov exponents along fibre orbits and the census used to
//! bound them away from the exceptional set.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::fmt_f64;
use crate::mixing::connect;
use crate::schedule::Schedule;
use crate::words::{is_admissible, Triple, Word};

use super::{Branch, FiberSystem, MapTag};

/// Symbol sequence over `{0, 1, 2}` indexed by the integers.
#[derive(Clone, Debug, PartialEq)]
pub enum SymbolSource {
    /// `... past past head . body tail tail ...`, the dot before position 0.
    EventuallyPeriodic {
        past: Word,
        head: Word,
        body: Word,
        tail: Word,
    },
    /// Independent symbols: `1` with probability `rate_one`, otherwise `0`
    /// or `2` with equal odds. Only the forward half is defined.
    Random { seed: u64, rate_one: f64 },
}

/// A point of the skew product: a symbol sequence and a fibre coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSpec {
    pub source: SymbolSource,
    pub x: f64,
    pub template: String,
}

impl OrbitSpec {
    pub fn eventually_periodic(past: Word, head: Word, body: Word, tail: Word, x: f64) -> Result<Self> {
        if past.is_empty() || tail.is_empty() {
            return Err(Error::Precondition("periodic parts must be non-empty".into()));
        }
        Ok(OrbitSpec {
            source: SymbolSource::EventuallyPeriodic { past, head, body, tail },
            x,
            template: "eventually_periodic".into(),
        })
    }

    /// Bi-infinite repetition of `block`.
    pub fn periodic(block: Word, x: f64) -> Result<Self> {
        let mut spec = Self::eventually_periodic(block.clone(), Word::empty(), Word::empty(), block, x)?;
        spec.template = "periodic".into();
        Ok(spec)
    }

    pub fn random(seed: u64, rate_one: f64, x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate_one) {
            return Err(Error::Precondition(format!("rate {rate_one} outside [0, 1]")));
        }
        Ok(OrbitSpec {
            source: SymbolSource::Random { seed, rate_one },
            x,
            template: "random_stream".into(),
        })
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = template.into();
        self
    }

    /// Symbols at positions `0..n`.
    pub fn forward(&self, n: usize) -> Vec<u8> {
        match &self.source {
            SymbolSource::EventuallyPeriodic { body, tail, .. } => {
                let mut out: Vec<u8> = body.symbols().iter().copied().take(n).collect();
                out.extend(tail.symbols().iter().copied().cycle().take(n - out.len()));
                out
            }
            SymbolSource::Random { seed, rate_one } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n).map(|_| random_symbol(&mut rng, *rate_one)).collect()
            }
        }
    }
}

fn random_symbol(rng: &mut impl Rng, rate_one: f64) -> u8 {
    if rng.gen_bool(rate_one) {
        1
    } else if rng.gen_bool(0.5) {
        2
    } else {
        0
    }
}

/// Membership of an orbit in the exceptional set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exceptional {
    /// Sequence in a horseshoe piece, fibre point `0`.
    Horseshoe,
    /// `0^{-N} . 0^k 1 tail`, fibre point `1`.
    StableFromOne,
    /// `0^{-N} 1 w . tail`, fibre point `0`.
    StableFromZero,
    No,
    /// The sequence is not eventually periodic.
    Undecidable,
}

impl Exceptional {
    pub fn is_exceptional(self) -> bool {
        matches!(
            self,
            Exceptional::Horseshoe | Exceptional::StableFromOne | Exceptional::StableFromZero
        )
    }
}

fn repeated(block: &Word, min_len: usize) -> Word {
    let reps = min_len.div_ceil(block.len()) + 1;
    let mut out = Vec::with_capacity(reps * block.len());
    for _ in 0..reps {
        out.extend_from_slice(block.symbols());
    }
    Word::new(out).expect("symbols come from a word")
}

fn all_zero(w: &Word) -> bool {
    w.symbols().iter().all(|&s| s == 0)
}

/// Whether the word lies in one piece. Windows of an eventually periodic
/// sequence repeat, so a long enough expansion decides membership.
fn in_one_piece(w: &Word, constraints: &[Triple]) -> bool {
    w.is_binary()
        && constraints
            .iter()
            .any(|&t| w.len() >= t.len && is_admissible(w, t).unwrap_or(false))
}

/// Decides whether `spec` lies in the exceptional set of `schedule`.
///
/// A right-infinite admissible word always extends to the left inside its
/// piece (join its first window to itself with a connector and repeat), so
/// forward tails only need to be admissible.
pub fn classify_exceptional(spec: &OrbitSpec, schedule: &Schedule) -> Exceptional {
    let SymbolSource::EventuallyPeriodic { past, head, body, tail } = &spec.source else {
        return Exceptional::Undecidable;
    };
    let constraints = schedule.constraints();
    let reach = constraints.iter().map(|t| t.len).max().unwrap_or(1);
    let span = reach + past.len().max(tail.len());
    let left = repeated(past, span).concat(head);
    let right = body.concat(&repeated(tail, span));

    if spec.x == 0.0 && in_one_piece(&left.concat(&right), &constraints) {
        return Exceptional::Horseshoe;
    }
    if spec.x == 1.0 && all_zero(&left) {
        if let Some(k) = body.symbols().iter().position(|&s| s == 1) {
            let eta = right.slice(k + 1, right.len());
            if all_zero(&body.slice(0, k)) && in_one_piece(&eta, &constraints) {
                return Exceptional::StableFromOne;
            }
        }
    }
    if spec.x == 0.0 && all_zero(past) {
        let h = head.symbols();
        let ones: Vec<usize> = (0..h.len()).filter(|&p| h[p] == 1).collect();
        if let [k] = ones[..] {
            let before_zero = h[..k].iter().all(|&s| s == 0);
            let after_binary = h[k + 1..].iter().all(|&s| s != 1);
            if before_zero && after_binary && in_one_piece(&right, &constraints) {
                return Exceptional::StableFromZero;
            }
        }
    }
    Exceptional::No
}

/// Random word of length `len` all of whose windows satisfy `t` (a
/// symbol-2 count constraint).
///
/// From an admissible window one of the two extensions is always
/// admissible, so the greedy walk never stalls.
pub fn random_admissible(t: Triple, len: usize, rng: &mut impl Rng) -> Result<Word> {
    if len < t.len {
        return Err(Error::WordTooShort {
            word_len: len,
            window: t.len,
        });
    }
    let twos = rng.gen_range(t.i..=t.j);
    let mut symbols: Vec<u8> = (0..t.len).map(|p| if p < twos { 2 } else { 0 }).collect();
    symbols.shuffle(rng);
    let mut count = twos;
    while symbols.len() < len {
        let dropped = usize::from(symbols[symbols.len() - t.len] == 2);
        let kept = count - dropped;
        let first = if rng.gen_bool(0.5) { 2u8 } else { 0u8 };
        let next = if t.admits_count(kept + usize::from(first == 2)) {
            first
        } else {
            2 - first
        };
        count = kept + usize::from(next == 2);
        symbols.push(next);
    }
    Word::new(symbols)
}

/// Exponent estimate with Cesàro diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSample {
    /// `(1/n) * sum log |f'|` after all steps.
    pub exponent: f64,
    /// Largest running average over the checkpoints in the second half;
    /// the finite-time stand-in for the upper exponent.
    pub upper: f64,
    pub steps: usize,
    /// `(steps so far, running average)`.
    pub checkpoints: Vec<(usize, f64)>,
    pub plain_steps: usize,
}

/// Tracks the window counts of every piece along a stream.
struct Selector {
    constraints: Vec<Triple>,
    twos: Vec<usize>,
    ones: Vec<usize>,
}

impl Selector {
    fn new(constraints: Vec<Triple>, stream: &[u8]) -> Self {
        let count = |t: &Triple, s: u8| stream[..t.len].iter().filter(|&&x| x == s).count();
        let twos = constraints.iter().map(|t| count(t, 2)).collect();
        let ones = constraints.iter().map(|t| count(t, 1)).collect();
        Selector { constraints, twos, ones }
    }

    fn plain(&self) -> bool {
        (0..self.constraints.len()).any(|p| self.ones[p] == 0 && self.constraints[p].admits_count(self.twos[p]))
    }

    /// Slides every window one position to the right of `pos`.
    fn advance(&mut self, stream: &[u8], pos: usize) {
        for (p, t) in self.constraints.iter().enumerate() {
            let (out, inn) = (stream[pos], stream[pos + t.len]);
            match out {
                2 => self.twos[p] -= 1,
                1 => self.ones[p] -= 1,
                _ => {}
            }
            match inn {
                2 => self.twos[p] += 1,
                1 => self.ones[p] += 1,
                _ => {}
            }
        }
    }
}

fn run_orbit(fs: &FiberSystem, constraints: Vec<Triple>, spec: &OrbitSpec, n_steps: usize) -> Result<LyapunovSample> {
    if n_steps == 0 {
        return Err(Error::Precondition("need at least one step".into()));
    }
    if !(0.0..=1.0).contains(&spec.x) {
        return Err(Error::Precondition(format!("fibre point {} outside [0, 1]", spec.x)));
    }
    let reach = constraints.iter().map(|t| t.len).max().unwrap_or(0);
    let stream = spec.forward(n_steps + reach + 1);
    let mut selector = Selector::new(constraints, &stream);
    let every = (n_steps / 100).max(1);
    let mut x = spec.x;
    let mut sum = 0.0;
    let mut checkpoints = Vec::with_capacity(101);
    let mut plain_steps = 0;
    for (n, &symbol) in stream.iter().enumerate().take(n_steps) {
        let branch = if symbol == 1 || selector.plain() {
            Branch::Plain
        } else {
            Branch::Tilde
        };
        if branch == Branch::Plain && symbol != 1 {
            plain_steps += 1;
        }
        let f = fs.map(MapTag { branch, symbol });
        let d = f.derivative(x);
        if symbol != 1 && !(d > 0.0) {
            return Err(Error::FiberConfig(format!(
                "derivative {d} of {} at {x} is not positive",
                MapTag { branch, symbol }
            )));
        }
        sum += d.abs().ln();
        x = f.value(x);
        selector.advance(&stream, n);
        if (n + 1) % every == 0 || n + 1 == n_steps {
            checkpoints.push((n + 1, sum / (n + 1) as f64));
        }
    }
    let exponent = sum / n_steps as f64;
    let upper = checkpoints
        .iter()
        .filter(|(s, _)| 2 * s >= n_steps)
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovSample {
        exponent,
        upper,
        steps: n_steps,
        checkpoints,
        plain_steps,
    })
}

/// Averages `log |f'|` over `n_steps` steps of the orbit of `spec`, the
/// fibre map chosen by the window rule with lookahead.
pub fn lyapunov_sample(fs: &FiberSystem, schedule: &Schedule, spec: &OrbitSpec, n_steps: usize) -> Result<LyapunovSample> {
    run_orbit(fs, schedule.constraints(), spec, n_steps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusRow {
    pub orbit_id: usize,
    pub exponent: f64,
    pub steps: usize,
    pub exceptional: bool,
    pub template: String,
}

pub fn census_csv(rows: &[CensusRow]) -> String {
    let mut out = String::from("orbit_id,exponent,steps,exceptional_flag,template\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.orbit_id,
            fmt_f64(r.exponent),
            r.steps,
            r.exceptional,
            r.template
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingOptions {
    pub n_orbits: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Probability of symbol `1` in random streams.
    pub rate_one: f64,
    /// Largest climb length `a` of the `(0^a 1)` templates.
    pub climb_max: usize,
    /// Largest length of the piece words in the shadowing templates.
    pub shadow_max: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            n_orbits: 10_000,
            n_steps: 10_000,
            seed: 0,
            rate_one: 0.05,
            climb_max: 400,
            shadow_max: 2_000,
        }
    }
}

fn orbit_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Non-exceptional orbit number `id`. Three families rotate: random
/// streams ending in `1^∞`, `(0^a 1)^∞` and `(w 1)^∞` with `w` a word of
/// one piece.
fn sampled_spec(id: usize, constraints: &[Triple], opts: &SamplingOptions, reach: usize) -> Result<OrbitSpec> {
    let mut rng = orbit_rng(opts.seed, id as u64);
    let x = rng.gen::<f64>();
    let zero = Word::repeat(0, 1);
    let one = Word::repeat(1, 1);
    match id % 3 {
        0 => {
            let body: Vec<u8> = (0..opts.n_steps + reach + 1)
                .map(|_| random_symbol(&mut rng, opts.rate_one))
                .collect();
            Ok(OrbitSpec::eventually_periodic(zero, Word::empty(), Word::new(body)?, one, x)?.with_template("random"))
        }
        1 => {
            let a = rng.gen_range(1..=opts.climb_max.max(1));
            let block = Word::repeat(0, a).concat(&one);
            Ok(OrbitSpec::periodic(block, x)?.with_template("climb_reset"))
        }
        _ => {
            let piece = rng.gen_range(0..constraints.len());
            let t = constraints[piece];
            let len = rng.gen_range(t.len..=opts.shadow_max.max(t.len));
            let block = random_admissible(t, len, &mut rng)?.concat(&one);
            Ok(OrbitSpec::periodic(block, x)?.with_template(format!("shadow_{}", piece + 1)))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaTildeEstimate {
    /// `exp` of the largest sampled upper exponent. Sampling only sees
    /// some orbits, so this is a lower estimate of the true bound.
    pub beta_tilde_hat: f64,
    pub max_exponent: f64,
    pub argmax: usize,
    /// `log beta2 - max_exponent`.
    pub margin: f64,
    pub census: Vec<CensusRow>,
}

/// Samples non-exceptional orbits and bounds their upper exponents.
pub fn estimate_beta_tilde(fs: &FiberSystem, schedule: &Schedule, opts: &SamplingOptions) -> Result<BetaTildeEstimate> {
    if opts.n_orbits == 0 {
        return Err(Error::Precondition("empty census: no orbits requested".into()));
    }
    let constraints = schedule.constraints();
    let reach = constraints.iter().map(|t| t.len).max().unwrap_or(0);
    let census: Vec<CensusRow> = (0..opts.n_orbits)
        .into_par_iter()
        .map(|id| {
            let spec = sampled_spec(id, &constraints, opts, reach)?;
            let exceptional = classify_exceptional(&spec, schedule).is_exceptional();
            let sample = run_orbit(fs, constraints.clone(), &spec, opts.n_steps)?;
            Ok(CensusRow {
                orbit_id: id,
                exponent: sample.upper,
                steps: sample.steps,
                exceptional,
                template: spec.template,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmax, max_exponent) = census
        .iter()
        .filter(|r| !r.exceptional)
        .map(|r| (r.orbit_id, r.exponent))
        .fold((usize::MAX, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    if argmax == usize::MAX {
        return Err(Error::Precondition("empty census: every sampled orbit is exceptional".into()));
    }
    let log_beta2 = fs.params().beta2.ln();
    if max_exponent >= log_beta2 {
        return Err(Error::LemmaViolation(format!(
            "orbit {argmax} has exponent {max_exponent} >= log beta2 = {log_beta2}"
        )));
    }
    Ok(BetaTildeEstimate {
        beta_tilde_hat: max_exponent.exp(),
        max_exponent,
        argmax,
        margin: log_beta2 - max_exponent,
        census,
    })
}

/// Exponents at fibre point `0` over periodic sequences of each piece,
/// `per_piece` orbits per piece. Returns `(piece, row)` pairs, pieces
/// counted from 1.
pub fn horseshoe_exponents(
    fs: &FiberSystem,
    schedule: &Schedule,
    per_piece: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<(usize, CensusRow)>> {
    let constraints = schedule.constraints();
    let jobs: Vec<(usize, usize)> = (0..constraints.len())
        .flat_map(|p| (0..per_piece).map(move |r| (p, r)))
        .collect();
    jobs.into_par_iter()
        .enumerate()
        .map(|(id, (piece, _))| {
            let t = constraints[piece];
            let mut rng = orbit_rng(seed, (1 << 40) + id as u64);
            let len = rng.gen_range(t.len..=3 * t.len);
            let w = random_admissible(t, len, &mut rng)?;
            let c = connect(&w, &w, t)?;
            let spec = OrbitSpec::periodic(w.concat(&c.word), 0.0)?.with_template(format!("horseshoe_{}", piece + 1));
            let kind = classify_exceptional(&spec, schedule);
            if kind != Exceptional::Horseshoe {
                return Err(Error::LemmaViolation(format!(
                    "periodic word of piece {} classified as {kind:?}",
                    piece + 1
                )));
            }
            let sample = run_orbit(fs, constraints.clone(), &spec, n_steps)?;
            Ok((
                piece + 1,
                CensusRow {
                    orbit_id: id,
                    exponent: sample.upper,
                    steps: n_steps,
                    exceptional: true,
                    template: spec.template,
                },
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{select_fiber_map, FiberConfig, IntervalMap};
    use crate::params::PotentialParams;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn setup() -> (FiberSystem, Schedule) {
        let p = PotentialParams::default();
        let triples = [Triple::new(0, 2, 9).unwrap(), Triple::new(15, 16, 20).unwrap()];
        let s = Schedule::from_parts(2, p, &triples, &[0.35, 0.35]).unwrap();
        (FiberSystem::new(p, FiberConfig::default()).unwrap(), s)
    }

    #[test]
    fn classification_templates() {
        let (_, s) = setup();
        let twos = OrbitSpec::periodic(w("2"), 0.0).unwrap();
        assert_eq!(classify_exceptional(&twos, &s), Exceptional::Horseshoe);
        let zeros = OrbitSpec::periodic(w("0"), 0.0).unwrap();
        assert_eq!(classify_exceptional(&zeros, &s), Exceptional::No);
        let alt = OrbitSpec::periodic(w("01"), 0.5).unwrap();
        assert_eq!(classify_exceptional(&alt, &s), Exceptional::No);
        let from_one = OrbitSpec::eventually_periodic(w("0"), Word::empty(), w("1"), w("2"), 1.0).unwrap();
        assert_eq!(classify_exceptional(&from_one, &s), Exceptional::StableFromOne);
        let from_one_k = OrbitSpec::eventually_periodic(w("0"), w("00"), w("0001222"), w("2"), 1.0).unwrap();
        assert_eq!(classify_exceptional(&from_one_k, &s), Exceptional::StableFromOne);
        let wrong_x = OrbitSpec::eventually_periodic(w("0"), Word::empty(), w("1"), w("2"), 0.5).unwrap();
        assert_eq!(classify_exceptional(&wrong_x, &s), Exceptional::No);
        let from_zero = OrbitSpec::eventually_periodic(w("0"), w("0120"), Word::empty(), w("2"), 0.0).unwrap();
        assert_eq!(classify_exceptional(&from_zero, &s), Exceptional::StableFromZero);
        let two_ones = OrbitSpec::eventually_periodic(w("0"), w("1210"), Word::empty(), w("2"), 0.0).unwrap();
        assert_eq!(classify_exceptional(&two_ones, &s), Exceptional::No);
        let random = OrbitSpec::random(3, 0.1, 0.0).unwrap();
        assert_eq!(classify_exceptional(&random, &s), Exceptional::Undecidable);
    }

    #[test]
    fn random_admissible_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for t in [Triple::new(0, 2, 9).unwrap(), Triple::new(4, 5, 20).unwrap(), Triple::new(3, 3, 5).unwrap()] {
            for len in [t.len, t.len + 1, 300] {
                let word = random_admissible(t, len, &mut rng).unwrap();
                assert_eq!(word.len(), len);
                assert!(is_admissible(&word, t).unwrap());
            }
        }
    }

    #[test]
    fn rolling_selection_matches_window_rule() {
        let (_, s) = setup();
        let spec = OrbitSpec::random(11, 0.02, 0.3).unwrap();
        let stream = spec.forward(3000);
        let reach = 21;
        let mut sel = Selector::new(s.constraints(), &stream);
        for n in 0..stream.len() - reach {
            let window = Word::new(stream[n..n + reach].to_vec()).unwrap();
            let tag = select_fiber_map(&window, &s).unwrap();
            let expect = tag.symbol == 1 || tag.branch == Branch::Plain;
            assert_eq!(stream[n] == 1 || sel.plain(), expect, "position {n}");
            sel.advance(&stream, n);
        }
    }

    #[test]
    fn fixed_point_exponents() {
        let (fs, s) = setup();
        let twos = OrbitSpec::periodic(w("2"), 0.0).unwrap();
        let r = lyapunov_sample(&fs, &s, &twos, 1000).unwrap();
        assert!((r.exponent - 1.04f64.ln()).abs() < 1e-15);
        assert_eq!(r.plain_steps, 1000);
        assert_eq!(fs.f0().derivative(0.0).ln(), 1.05f64.ln());
        // 0^∞ uses the tilde map, which pushes the orbit off 0 toward 1.
        let zeros = OrbitSpec::periodic(w("0"), 0.0).unwrap();
        let r = lyapunov_sample(&fs, &s, &zeros, 5000).unwrap();
        assert!((r.exponent - 0.5f64.ln()).abs() < 0.05);
    }

    #[test]
    fn climb_and_reset_is_below_gap() {
        let (fs, s) = setup();
        for a in [5, 50, 200, 800] {
            let spec = OrbitSpec::periodic(Word::repeat(0, a).concat(&w("1")), 0.37).unwrap();
            let r = lyapunov_sample(&fs, &s, &spec, 20_000).unwrap();
            assert!(r.upper < 1.02f64.ln(), "a = {a}: {}", r.upper);
        }
    }

    #[test]
    fn horseshoe_exponents_in_range() {
        let (fs, s) = setup();
        let rows = horseshoe_exponents(&fs, &s, 4, 5000, 1).unwrap();
        assert_eq!(rows.len(), 8);
        for (piece, row) in rows {
            let (lo, hi) = s.pieces[piece - 1].exponents;
            assert!(row.exponent >= lo - 1e-3 && row.exponent <= hi + 1e-3);
            assert!(row.exceptional);
        }
    }

    #[test]
    fn census_is_deterministic() {
        let (fs, s) = setup();
        let opts = SamplingOptions {
            n_orbits: 30,
            n_steps: 2000,
            seed: 4,
            ..Default::default()
        };
        let a = estimate_beta_tilde(&fs, &s, &opts).unwrap();
        let b = estimate_beta_tilde(&fs, &s, &opts).unwrap();
        assert_eq!(census_csv(&a.census), census_csv(&b.census));
        assert!(a.margin > 0.0);
        assert!(a.census.iter().all(|r| !r.exceptional));
        let empty = SamplingOptions { n_orbits: 0, ..opts };
        assert!(estimate_beta_tilde(&fs, &s, &empty).is_err());
    }
}
