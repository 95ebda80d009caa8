use crate::error::{Error, Result};
use crate::words::Word;

use super::maps::IntervalMap;
use super::FiberSystem;

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn meets(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    fn increasing_image(&self, f: &dyn IntervalMap) -> Interval {
        Interval::new(f.value(self.lo), f.value(self.hi))
    }

    fn decreasing_image(&self, f: &dyn IntervalMap) -> Interval {
        Interval::new(f.value(self.hi), f.value(self.lo))
    }
}

/// One block `0^n 1 0^m` of an expanding itinerary.
#[derive(Clone, Debug, PartialEq)]
pub struct Leg {
    pub climb: usize,
    pub settle: usize,
    pub start: Interval,
    pub end: Interval,
    /// Lower bound for the derivative of the leg over `start`.
    pub expansion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Itinerary {
    pub symbol_word: Word,
    pub legs: Vec<Leg>,
    /// Image of the start interval after every single map application.
    pub interval_track: Vec<Interval>,
    /// Product of the per-leg lower bounds.
    pub expansion_factor: f64,
}

impl Itinerary {
    pub fn start(&self) -> Interval {
        self.legs[0].start
    }

    pub fn image(&self) -> Interval {
        self.legs[self.legs.len() - 1].end
    }

    /// Applies the composed map to a point, returning the value and the
    /// derivative.
    pub fn apply(&self, fs: &FiberSystem, x: f64) -> (f64, f64) {
        let mut y = x;
        let mut d = 1.0;
        for &s in self.symbol_word.symbols() {
            let f: &dyn IntervalMap = if s == 0 { fs.f0() } else { fs.f1() };
            d *= f.derivative(y);
            y = f.value(y);
        }
        (y, d)
    }
}

const MAX_LEGS: usize = 10_000;

/// Expanding itinerary of `j` under `f0` and `f1`.
///
/// Each leg climbs with `f0` until the flip `f1` lands inside `(0, b]` with
/// derivative at least `kappa`, then applies `f0` until the image meets
/// `(f0^{-1}(b), b]`. Legs repeat until the image covers the fundamental
/// domain. The same run with `f0` replaced by its tilde map must give an
/// identical track.
pub fn expanding_itinerary(j: Interval, fs: &FiberSystem) -> Result<Itinerary> {
    let domain = fs.itinerary_domain();
    if !(j.lo < j.hi) || !domain.contains(&j) {
        return Err(Error::Precondition(format!(
            "interval [{}, {}] is not a non-degenerate subinterval of [{}, {}]",
            j.lo, j.hi, domain.lo, domain.hi
        )));
    }
    let plain = run(j, fs, fs.f0())?;
    let tilde = run(j, fs, fs.f0_tilde())?;
    if plain.interval_track != tilde.interval_track {
        return Err(Error::LemmaViolation(
            "itinerary track changes when f0 is replaced by its tilde map".into(),
        ));
    }
    Ok(plain)
}

fn run(j: Interval, fs: &FiberSystem, f0: &dyn IntervalMap) -> Result<Itinerary> {
    let d = fs.fundamental_domain();
    let h_prime = fs.h_prime();
    let b = fs.b();
    let kappa = fs.kappa();
    let f1 = fs.f1();
    let top = (0..fs.climb_bound()).fold(b, |x, _| f0.value(x));
    let corridor = Interval::new(f1.value(top), top);

    let mut symbols = Vec::new();
    let mut legs = Vec::new();
    let mut track = Vec::new();
    let mut current = j;
    loop {
        if legs.len() == MAX_LEGS {
            return Err(Error::FiberConfig(format!("no covering after {MAX_LEGS} legs")));
        }
        let start = current;
        let mut climbed = start;
        let mut steps = Vec::new();
        // f0' decreases and f0 preserves order, so over an interval the
        // smallest factor sits at the right end.
        let mut bound = 1.0;
        let mut climb = None;
        for n in 0..=fs.climb_bound() {
            let flip_bound = bound * f1.gamma;
            if h_prime.contains(&climbed) && climbed.hi < 1.0 && flip_bound >= kappa {
                climb = Some(n);
                bound = flip_bound;
                break;
            }
            bound *= f0.derivative(climbed.hi);
            climbed = climbed.increasing_image(f0);
            steps.push(climbed);
        }
        let climb = climb.ok_or_else(|| {
            Error::FiberConfig(format!(
                "no climb count up to N = {} brings [{}, {}] into H' with expansion {kappa}",
                fs.climb_bound(),
                start.lo,
                start.hi
            ))
        })?;
        let mut settled = climbed.decreasing_image(f1);
        steps.push(settled);
        if !(settled.lo > 0.0 && settled.hi <= b) {
            return Err(Error::LemmaViolation(format!(
                "flip image [{}, {}] not inside (0, b]",
                settled.lo, settled.hi
            )));
        }
        let mut settle = 0;
        while settled.hi <= d.hi {
            bound *= f0.derivative(settled.hi);
            settled = settled.increasing_image(f0);
            steps.push(settled);
            settle += 1;
        }
        for s in &steps {
            if !corridor.contains(s) {
                return Err(Error::LemmaViolation(format!(
                    "leg visits [{}, {}] outside [{}, {}]",
                    s.lo, s.hi, corridor.lo, corridor.hi
                )));
            }
        }
        if bound < kappa {
            return Err(Error::LemmaViolation(format!("leg expansion {bound} below {kappa}")));
        }
        symbols.extend(std::iter::repeat_n(0, climb));
        symbols.push(1);
        symbols.extend(std::iter::repeat_n(0, settle));
        track.extend(steps);
        legs.push(Leg {
            climb,
            settle,
            start,
            end: settled,
            expansion: bound,
        });
        current = settled;
        if current.contains(&d) {
            break;
        }
    }
    let expansion_factor = legs.iter().map(|l| l.expansion).product();
    Ok(Itinerary {
        symbol_word: Word::new(symbols)?,
        legs,
        interval_track: track,
        expansion_factor,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicPoint {
    pub q_star: f64,
    pub residual: f64,
    pub derivative: f64,
}

/// Fixed point in `D` of the map composed along the itinerary of `D`.
pub fn periodic_point(fs: &FiberSystem, itinerary: &Itinerary) -> Result<PeriodicPoint> {
    let d = fs.fundamental_domain();
    if !itinerary.image().contains(&d) {
        return Err(Error::LemmaViolation("itinerary image does not cover D".into()));
    }
    let g = |x: f64| itinerary.apply(fs, x).0 - x;
    let (mut lo, mut hi) = (d.lo, d.hi);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo == 0.0 || g_hi == 0.0 {
        let q = if g_lo == 0.0 { lo } else { hi };
        let (_, derivative) = itinerary.apply(fs, q);
        return Ok(PeriodicPoint {
            q_star: q,
            residual: 0.0,
            derivative,
        });
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::LemmaViolation(format!(
            "composed map minus identity keeps one sign on D: {g_lo:e}, {g_hi:e}"
        )));
    }
    let lo_sign = g_lo.signum();
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if v.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    let (value, derivative) = itinerary.apply(fs, q);
    Ok(PeriodicPoint {
        q_star: q,
        residual: (value - q).abs(),
        derivative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::FiberConfig;
    use crate::params::PotentialParams;

    fn system() -> FiberSystem {
        FiberSystem::new(PotentialParams::default(), FiberConfig::default()).unwrap()
    }

    #[test]
    fn fundamental_domain_is_covered() {
        let fs = system();
        let d = fs.fundamental_domain();
        let it = expanding_itinerary(d, &fs).unwrap();
        assert!(it.image().contains(&d));
        for leg in &it.legs {
            assert!(leg.expansion >= fs.kappa());
            assert!(leg.climb <= fs.climb_bound());
        }
        assert_eq!(it.symbol_word.count(2), 0);
        assert_eq!(it.symbol_word.count(1), it.legs.len());
        assert_eq!(it.interval_track.len(), it.symbol_word.len());
    }

    #[test]
    fn track_is_monotone_transport() {
        let fs = system();
        let d = fs.fundamental_domain();
        let it = expanding_itinerary(d, &fs).unwrap();
        let mut cur = d;
        for (s, step) in it.symbol_word.symbols().iter().zip(&it.interval_track) {
            cur = if *s == 0 {
                Interval::new(fs.f0().value(cur.lo), fs.f0().value(cur.hi))
            } else {
                Interval::new(fs.f1().value(cur.hi), fs.f1().value(cur.lo))
            };
            assert_eq!(&cur, step);
        }
    }

    #[test]
    fn sampled_derivative_respects_bound() {
        let fs = system();
        let d = fs.fundamental_domain();
        let it = expanding_itinerary(d, &fs).unwrap();
        for k in 0..=20 {
            let x = d.lo + d.width() * k as f64 / 20.0;
            let (_, deriv) = it.apply(&fs, x);
            assert!(deriv.abs() >= it.expansion_factor * (1.0 - 1e-12));
        }
    }

    #[test]
    fn small_interval_expands() {
        let fs = system();
        let dom = fs.itinerary_domain();
        let j = Interval::new(dom.hi - 1e-6, dom.hi);
        let it = expanding_itinerary(j, &fs).unwrap();
        assert!(it.legs.len() > 1);
        assert!(it.image().contains(&fs.fundamental_domain()));
    }

    #[test]
    fn outside_domain_rejected() {
        let fs = system();
        let j = Interval::new(0.5, 0.6);
        assert!(matches!(expanding_itinerary(j, &fs), Err(Error::Precondition(_))));
    }

    #[test]
    fn q_star() {
        let fs = system();
        let d = fs.fundamental_domain();
        let it = expanding_itinerary(d, &fs).unwrap();
        let q = periodic_point(&fs, &it).unwrap();
        assert!(d.lo < q.q_star && q.q_star < d.hi);
        assert!(q.residual <= 1e-12);
        assert!(q.derivative.abs() >= fs.kappa());
    }
}
