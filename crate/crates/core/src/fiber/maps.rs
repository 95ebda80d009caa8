//! Interval self-maps of `[0, 1]` with analytic derivatives.

/// A map of `[0, 1]` into itself together with its derivative.
pub trait IntervalMap: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// Increasing map with repelling fixed point `0`, attracting fixed point `1`
/// and strictly decreasing derivative.
///
/// The derivative is `lambda0 + (beta0 - lambda0) * w(x)` with
/// `w = 1 - c * s(x) - (1 - c) * x^power` and
/// `s(x) = (1 - exp(-x / eps)) / (1 - exp(-1 / eps))`. Both `s` and
/// `x^power` increase from `0` to `1`, so `w` falls from `1` to `0`; the
/// weight `c` is fixed by `f(1) = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClimbMap {
    pub beta0: f64,
    pub lambda0: f64,
    pub eps: f64,
    pub power: i32,
    pub c: f64,
}

impl ClimbMap {
    /// Returns `None` when no weight `c` in `[0, 1]` closes the map at `1`.
    pub fn new(beta0: f64, lambda0: f64, eps: f64, power: i32) -> Option<Self> {
        let gap = beta0 - lambda0;
        let tail = 1.0 / (power as f64 + 1.0);
        let norm = 1.0 - (-1.0 / eps).exp();
        let s_integral = (1.0 - eps * norm) / norm;
        let c = (1.0 - tail - (1.0 - lambda0) / gap) / (s_integral - tail);
        (c.is_finite() && (0.0..=1.0).contains(&c)).then_some(ClimbMap {
            beta0,
            lambda0,
            eps,
            power,
            c,
        })
    }

    fn norm(&self) -> f64 {
        1.0 - (-1.0 / self.eps).exp()
    }

    /// Second derivative; negative on `(0, 1]`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let s_prime = (-x / self.eps).exp() / (self.eps * self.norm());
        let p = self.power as f64;
        -(self.beta0 - self.lambda0) * (self.c * s_prime + (1.0 - self.c) * p * x.powi(self.power - 1))
    }
}

impl IntervalMap for ClimbMap {
    fn value(&self, x: f64) -> f64 {
        let s_int = (x + self.eps * (-x / self.eps).exp_m1()) / self.norm();
        let p = self.power as f64;
        let inner = x - self.c * s_int - (1.0 - self.c) * x.powi(self.power + 1) / (p + 1.0);
        self.lambda0 * x + (self.beta0 - self.lambda0) * inner
    }

    fn derivative(&self, x: f64) -> f64 {
        let s = -(-x / self.eps).exp_m1() / self.norm();
        let w = 1.0 - self.c * s - (1.0 - self.c) * x.powi(self.power);
        self.lambda0 + (self.beta0 - self.lambda0) * w
    }
}

/// `x -> gamma * (1 - x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlipMap {
    pub gamma: f64,
}

impl FlipMap {
    pub fn fixed_point(&self) -> f64 {
        self.gamma / (1.0 + self.gamma)
    }

    /// Preimage of `y` (exact, the map is affine).
    pub fn inverse(&self, y: f64) -> f64 {
        1.0 - y / self.gamma
    }
}

impl IntervalMap for FlipMap {
    fn value(&self, x: f64) -> f64 {
        self.gamma * (1.0 - x)
    }

    fn derivative(&self, _x: f64) -> f64 {
        -self.gamma
    }
}

/// `x -> x + x (sink - x) (d0 + d1 x^6)`: repelling at `0`, attracting at
/// `sink`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkMap {
    pub sink: f64,
    pub d0: f64,
    pub d1: f64,
}

impl SinkMap {
    /// Map with slope `beta2` at `0`.
    pub fn new(beta2: f64, sink: f64, d1: f64) -> Self {
        SinkMap {
            sink,
            d0: (beta2 - 1.0) / sink,
            d1,
        }
    }
}

impl IntervalMap for SinkMap {
    fn value(&self, x: f64) -> f64 {
        x + x * (self.sink - x) * (self.d0 + self.d1 * x.powi(6))
    }

    fn derivative(&self, x: f64) -> f64 {
        let g = self.d0 + self.d1 * x.powi(6);
        1.0 + (self.sink - 2.0 * x) * g + x * (self.sink - x) * 6.0 * self.d1 * x.powi(5)
    }
}

/// `base + height * (1 - x / width)^2` on `[0, width)`, `base` elsewhere.
///
/// Lifts `0` off itself while leaving the map unchanged on `[width, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bumped<M> {
    pub base: M,
    pub height: f64,
    pub width: f64,
}

impl<M: IntervalMap> IntervalMap for Bumped<M> {
    fn value(&self, x: f64) -> f64 {
        let v = self.base.value(x);
        if x < self.width {
            let u = 1.0 - x / self.width;
            v + self.height * u * u
        } else {
            v
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        let d = self.base.derivative(x);
        if x < self.width {
            d - 2.0 * self.height / self.width * (1.0 - x / self.width)
        } else {
            d
        }
    }
}

/// Preimage of `y` under an increasing map, by bisection on `[0, 1]`.
pub fn increasing_preimage(f: &dyn IntervalMap, y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f.value(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: &dyn IntervalMap, x: f64) -> f64 {
        let h = 1e-6;
        (f.value(x + h) - f.value(x - h)) / (2.0 * h)
    }

    #[test]
    fn climb_endpoints() {
        let f = ClimbMap::new(1.05, 0.5, 0.01, 15).unwrap();
        assert!((f.c - 0.0306).abs() < 5e-4, "c = {}", f.c);
        assert_eq!(f.value(0.0), 0.0);
        assert!((f.value(1.0) - 1.0).abs() < 1e-14);
        assert!((f.derivative(0.0) - 1.05).abs() < 1e-15);
        assert!((f.derivative(1.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_differences() {
        let f0 = ClimbMap::new(1.05, 0.5, 0.01, 15).unwrap();
        let f2 = SinkMap::new(1.04, 0.8, 0.3);
        let b0 = Bumped { base: f0, height: 1e-3, width: 5e-3 };
        let maps: [&dyn IntervalMap; 4] = [&f0, &f2, &b0, &FlipMap { gamma: 0.9 }];
        for m in maps {
            for k in 1..100 {
                let x = k as f64 / 100.0 + 1.3e-3;
                assert!((central(m, x) - m.derivative(x)).abs() < 1e-7);
            }
        }
        for k in 1..50 {
            let x = k as f64 / 50.0;
            let h = 1e-6;
            let fd = (f0.derivative(x + h) - f0.derivative(x - h)) / (2.0 * h);
            assert!((fd - f0.second_derivative(x)).abs() < 1e-5);
        }
    }

    #[test]
    fn unreachable_slopes_rejected() {
        assert!(ClimbMap::new(1.05, 0.5, 0.01, 15).is_some());
        assert!(ClimbMap::new(1.02, 0.5, 0.01, 15).is_none());
    }

    #[test]
    fn preimage_inverts() {
        let f = ClimbMap::new(1.05, 0.5, 0.01, 15).unwrap();
        let y = 0.05;
        let x = increasing_preimage(&f, y);
        assert!((f.value(x) - y).abs() < 1e-15);
        assert!((FlipMap { gamma: 0.9 }.inverse(0.05) - (1.0 - 0.05 / 0.9)).abs() < 1e-16);
    }
}
