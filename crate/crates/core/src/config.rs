//! Run configuration read from a flat key-value document.

use crate::error::{Error, Result};
use crate::fiber::{FiberConfig, SamplingOptions};
use crate::kv::KvDocument;
use crate::params::PotentialParams;
use crate::schedule::SearchLimits;

#[derive(Clone, Copy, Debug)]
pub struct Config {
    pub k: usize,
    pub params: PotentialParams,
    pub fiber: FiberConfig,
    pub limits: SearchLimits,
    pub sampling: SamplingOptions,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            k: 2,
            params: PotentialParams::default(),
            fiber: FiberConfig::default(),
            limits: SearchLimits::default(),
            sampling: SamplingOptions::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "schedule.k",
    "params.beta0",
    "params.beta2",
    "params.gamma",
    "params.lambda0",
    "params.beta_tilde",
    "fiber.climb_eps",
    "fiber.climb_power",
    "fiber.sink",
    "fiber.sink_shape",
    "fiber.b",
    "fiber.kappa",
    "fiber.bump_width",
    "fiber.bump_height",
    "fiber.climb_margin",
    "limits.first_len_min",
    "limits.len_max",
    "limits.node_cap",
    "limits.growth",
    "limits.solver_tol",
    "limits.max_matvecs",
    "sampling.n_orbits",
    "sampling.n_steps",
    "sampling.seed",
    "sampling.rate_one",
    "sampling.climb_max",
    "sampling.shadow_max",
];

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_document(&KvDocument::parse(text)?)
    }

    pub fn from_document(d: &KvDocument) -> Result<Self> {
        if let Some(unknown) = d.keys().find(|k| !KEYS.contains(k)) {
            return Err(Error::Parse {
                line: 0,
                message: format!("unknown key {unknown:?}"),
            });
        }
        let base = Config::default();
        let (p, f, l, s) = (base.params, base.fiber, base.limits, base.sampling);
        Ok(Config {
            k: d.get_or("schedule.k", base.k)?,
            params: PotentialParams {
                beta0: d.get_or("params.beta0", p.beta0)?,
                beta2: d.get_or("params.beta2", p.beta2)?,
                gamma: d.get_or("params.gamma", p.gamma)?,
                lambda0: d.get_or("params.lambda0", p.lambda0)?,
                beta_tilde: d.get_or("params.beta_tilde", p.beta_tilde)?,
            },
            fiber: FiberConfig {
                climb_eps: d.get_or("fiber.climb_eps", f.climb_eps)?,
                climb_power: d.get_or("fiber.climb_power", f.climb_power)?,
                sink: d.get_or("fiber.sink", f.sink)?,
                sink_shape: d.get_or("fiber.sink_shape", f.sink_shape)?,
                b: d.get_or("fiber.b", f.b)?,
                kappa: d.get_or("fiber.kappa", f.kappa)?,
                bump_width: d.get_or("fiber.bump_width", f.bump_width)?,
                bump_height: d.get_or("fiber.bump_height", f.bump_height)?,
                climb_margin: d.get_or("fiber.climb_margin", f.climb_margin)?,
            },
            limits: SearchLimits {
                first_len_min: d.get_or("limits.first_len_min", l.first_len_min)?,
                len_max: d.get_or("limits.len_max", l.len_max)?,
                node_cap: d.get_or("limits.node_cap", l.node_cap)?,
                growth: d.get_or("limits.growth", l.growth)?,
                solver: l
                    .solver
                    .with_tol(d.get_or("limits.solver_tol", l.solver.tol)?)
                    .with_max_matvecs(d.get_or("limits.max_matvecs", l.solver.max_matvecs)?),
            },
            sampling: SamplingOptions {
                n_orbits: d.get_or("sampling.n_orbits", s.n_orbits)?,
                n_steps: d.get_or("sampling.n_steps", s.n_steps)?,
                seed: d.get_or("sampling.seed", s.seed)?,
                rate_one: d.get_or("sampling.rate_one", s.rate_one)?,
                climb_max: d.get_or("sampling.climb_max", s.climb_max)?,
                shadow_max: d.get_or("sampling.shadow_max", s.shadow_max)?,
            },
        })
    }

    pub fn to_document(&self) -> KvDocument {
        let mut d = KvDocument::new();
        d.set("schedule.k", self.k);
        let p = &self.params;
        d.set_f64("params.beta0", p.beta0);
        d.set_f64("params.beta2", p.beta2);
        d.set_f64("params.gamma", p.gamma);
        d.set_f64("params.lambda0", p.lambda0);
        d.set_f64("params.beta_tilde", p.beta_tilde);
        let f = &self.fiber;
        d.set_f64("fiber.climb_eps", f.climb_eps);
        d.set("fiber.climb_power", f.climb_power);
        d.set_f64("fiber.sink", f.sink);
        d.set_f64("fiber.sink_shape", f.sink_shape);
        d.set_f64("fiber.b", f.b);
        d.set_f64("fiber.kappa", f.kappa);
        d.set_f64("fiber.bump_width", f.bump_width);
        d.set_f64("fiber.bump_height", f.bump_height);
        d.set("fiber.climb_margin", f.climb_margin);
        let l = &self.limits;
        d.set("limits.first_len_min", l.first_len_min);
        d.set("limits.len_max", l.len_max);
        d.set_f64("limits.node_cap", l.node_cap);
        d.set_f64("limits.growth", l.growth);
        d.set_f64("limits.solver_tol", l.solver.tol);
        d.set("limits.max_matvecs", l.solver.max_matvecs);
        let s = &self.sampling;
        d.set("sampling.n_orbits", s.n_orbits);
        d.set("sampling.n_steps", s.n_steps);
        d.set("sampling.seed", s.seed);
        d.set_f64("sampling.rate_one", s.rate_one);
        d.set("sampling.climb_max", s.climb_max);
        d.set("sampling.shadow_max", s.shadow_max);
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = Config::parse("# nothing\n").unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.params, PotentialParams::default());
        assert_eq!(c.fiber, FiberConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = Config::default();
        c.k = 3;
        c.fiber.b = 0.04;
        c.sampling.seed = 7;
        let back = Config::parse(&c.to_document().render()).unwrap();
        assert_eq!(back.k, 3);
        assert_eq!(back.fiber, c.fiber);
        assert_eq!(back.sampling, c.sampling);
        assert_eq!(back.limits.solver.tol, c.limits.solver.tol);
    }

    #[test]
    fn unknown_and_malformed_keys() {
        assert!(Config::parse("fiber.bb = 0.1\n").is_err());
        assert!(matches!(
            Config::parse("schedule.k = two\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
