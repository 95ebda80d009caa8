//! The interval maps fibred over the symbolic dynamics: construction,
//! conditions, expanding itineraries and central Lyapunov exponents.

mod conditions;
mod itinerary;
mod maps;
mod orbit;

pub use conditions::{validate_conditions, ConditionCheck, ConditionReport};
pub use itinerary::{expanding_itinerary, periodic_point, Interval, Itinerary, Leg, PeriodicPoint};
pub use maps::{increasing_preimage, Bumped, ClimbMap, FlipMap, IntervalMap, SinkMap};
pub use orbit::{
    census_csv, classify_exceptional, estimate_beta_tilde, horseshoe_exponents, lyapunov_sample, random_admissible,
    BetaTildeEstimate, CensusRow, Exceptional, LyapunovSample, OrbitSpec, SamplingOptions, SymbolSource,
};

use crate::error::{Error, Result};
use crate::params::PotentialParams;
use crate::schedule::Schedule;
use crate::words::{is_admissible, Word};

/// Tunable shape constants of the default maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberConfig {
    /// Decay length of the fast part of `f0'` near `0`.
    pub climb_eps: f64,
    /// Exponent of the slow part of `f0'` near `1`.
    pub climb_power: i32,
    /// Attracting fixed point of `f2`.
    pub sink: f64,
    /// Weight of the `x^6` term of `f2`.
    pub sink_shape: f64,
    /// Right end of `H = [0, b]`.
    pub b: f64,
    pub kappa: f64,
    /// Support `[0, bump_width)` of the lift applied to the tilde maps.
    pub bump_width: f64,
    /// Value added at `0` by the tilde maps.
    pub bump_height: f64,
    /// Extra iterates added to the climb count from `b` into `H'`.
    pub climb_margin: usize,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig {
            climb_eps: 0.01,
            climb_power: 15,
            sink: 0.8,
            sink_shape: 0.3,
            b: 0.05,
            kappa: 1.1,
            bump_width: 0.005,
            bump_height: 0.001,
            climb_margin: 2,
        }
    }
}

/// Which of the two maps over a symbol is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Plain,
    Tilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MapTag {
    pub branch: Branch,
    pub symbol: u8,
}

impl std::fmt::Display for MapTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.branch {
            Branch::Plain => write!(f, "f{}", self.symbol),
            Branch::Tilde => write!(f, "f{}~", self.symbol),
        }
    }
}

/// The five fibre maps and the constants attached to them.
#[derive(Clone, Debug)]
pub struct FiberSystem {
    params: PotentialParams,
    config: FiberConfig,
    f0: ClimbMap,
    f0_tilde: Bumped<ClimbMap>,
    f1: FlipMap,
    f2: SinkMap,
    f2_tilde: Bumped<SinkMap>,
    climb_bound: usize,
}

const MAX_CLIMB: usize = 100_000;

impl FiberSystem {
    pub fn new(params: PotentialParams, config: FiberConfig) -> Result<Self> {
        params.validate()?;
        let c = &config;
        if !(0.0 < c.b && c.b < 1.0) {
            return Err(Error::FiberConfig(format!("b = {} must lie in (0, 1)", c.b)));
        }
        if !(0.0 < c.bump_width && c.bump_width <= c.b) {
            return Err(Error::FiberConfig(format!(
                "bump width {} must lie in (0, b = {}]",
                c.bump_width, c.b
            )));
        }
        if !(c.bump_height > 0.0) || !(c.kappa > 1.0) || !(c.climb_eps > 0.0) || c.climb_power < 2 {
            return Err(Error::FiberConfig(
                "need bump_height > 0, kappa > 1, climb_eps > 0, climb_power >= 2".into(),
            ));
        }
        if !(0.0 < c.sink && c.sink < 1.0) {
            return Err(Error::FiberConfig(format!("sink {} must lie in (0, 1)", c.sink)));
        }
        let f0 = ClimbMap::new(params.beta0, params.lambda0, c.climb_eps, c.climb_power).ok_or_else(|| {
            Error::FiberConfig(format!(
                "no climb map with slopes {} at 0 and {} at 1",
                params.beta0, params.lambda0
            ))
        })?;
        let f1 = FlipMap { gamma: params.gamma };
        let f2 = SinkMap::new(params.beta2, c.sink, c.sink_shape);
        let (height, width) = (c.bump_height, c.bump_width);

        let entry = f1.inverse(c.b);
        let mut x = c.b;
        let mut climb = 0;
        while x < entry {
            x = f0.value(x);
            climb += 1;
            if climb > MAX_CLIMB {
                return Err(Error::FiberConfig(format!("f0 orbit of b does not reach {entry}")));
            }
        }
        Ok(FiberSystem {
            params,
            config,
            f0,
            f0_tilde: Bumped { base: f0, height, width },
            f1,
            f2,
            f2_tilde: Bumped { base: f2, height, width },
            climb_bound: climb + c.climb_margin,
        })
    }

    pub fn params(&self) -> &PotentialParams {
        &self.params
    }

    pub fn config(&self) -> &FiberConfig {
        &self.config
    }

    pub fn f0(&self) -> &ClimbMap {
        &self.f0
    }

    pub fn f0_tilde(&self) -> &Bumped<ClimbMap> {
        &self.f0_tilde
    }

    pub fn f1(&self) -> &FlipMap {
        &self.f1
    }

    pub fn f2(&self) -> &SinkMap {
        &self.f2
    }

    pub fn f2_tilde(&self) -> &Bumped<SinkMap> {
        &self.f2_tilde
    }

    pub fn map(&self, tag: MapTag) -> &dyn IntervalMap {
        match (tag.branch, tag.symbol) {
            (_, 1) => &self.f1,
            (Branch::Plain, 0) => &self.f0,
            (Branch::Tilde, 0) => &self.f0_tilde,
            (Branch::Plain, _) => &self.f2,
            (Branch::Tilde, _) => &self.f2_tilde,
        }
    }

    pub fn b(&self) -> f64 {
        self.config.b
    }

    pub fn kappa(&self) -> f64 {
        self.config.kappa
    }

    /// Largest number of `f0` steps allowed before the flip in one leg.
    pub fn climb_bound(&self) -> usize {
        self.climb_bound
    }

    /// `H = [0, b]`.
    pub fn h(&self) -> Interval {
        Interval::new(0.0, self.config.b)
    }

    /// `H' = f1^{-1}(H) = [1 - b / gamma, 1]`.
    pub fn h_prime(&self) -> Interval {
        Interval::new(self.f1.inverse(self.config.b), 1.0)
    }

    /// `D = [f0^{-2}(b), f0^{-1}(b)]`.
    pub fn fundamental_domain(&self) -> Interval {
        let one = increasing_preimage(&self.f0, self.config.b);
        let two = increasing_preimage(&self.f0, one);
        Interval::new(two, one)
    }

    /// `[f0^{-2}(b), b]`, where expanding itineraries start.
    pub fn itinerary_domain(&self) -> Interval {
        Interval::new(self.fundamental_domain().lo, self.config.b)
    }
}

/// Chooses the fibre map for the symbol sequence starting with `window`.
///
/// The plain map over `window[0]` is used when, for some piece, the first
/// `L` symbols avoid `1` and satisfy that piece's window constraint; the
/// tilde map otherwise. Symbol `1` always selects `f1`.
pub fn select_fiber_map(window: &Word, schedule: &Schedule) -> Result<MapTag> {
    let constraints = schedule.constraints();
    let need = constraints.iter().map(|t| t.len).max().unwrap_or(0) + 1;
    if window.len() < need {
        return Err(Error::WordTooShort {
            word_len: window.len(),
            window: need,
        });
    }
    let symbol = window.symbols()[0];
    if symbol == 1 {
        return Ok(MapTag {
            branch: Branch::Plain,
            symbol,
        });
    }
    for t in constraints {
        let head = window.slice(0, t.len);
        if head.is_binary() && is_admissible(&head, t)? {
            return Ok(MapTag {
                branch: Branch::Plain,
                symbol,
            });
        }
    }
    Ok(MapTag {
        branch: Branch::Tilde,
        symbol,
    })
}
