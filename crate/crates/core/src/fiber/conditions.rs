use std::fmt::Write as _;

use crate::kv::fmt_f64;

use super::maps::IntervalMap;
use super::FiberSystem;

/// One named condition with its worst margin (positive iff satisfied).
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub grid_size: usize,
    pub checks: Vec<ConditionCheck>,
    /// Smallest `L >= 1` satisfying the lower bound of the length condition.
    pub length_condition_len: Option<u64>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{} {} margin={} {}", c.name, status, fmt_f64(c.margin), c.detail);
        }
        out
    }
}

struct Margins {
    worst: f64,
    exact_ok: bool,
    notes: Vec<String>,
}

impl Margins {
    fn new() -> Self {
        Margins {
            worst: f64::INFINITY,
            exact_ok: true,
            notes: Vec::new(),
        }
    }

    /// Identity up to rounding; does not enter the margin.
    fn exact(&mut self, what: &str, error: f64) {
        self.close(what, error, 1e-12);
    }

    fn close(&mut self, what: &str, error: f64, tol: f64) {
        if !(error.abs() <= tol) {
            self.exact_ok = false;
            self.notes.push(format!("{what} (off by {error:.3e})"));
        }
    }

    fn add(&mut self, what: &str, margin: f64) {
        // NaN margins count as failures.
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        self.worst = self.worst.min(m);
        if m <= 0.0 {
            self.notes.push(format!("{what} ({m:.3e})"));
        }
    }

    fn finish(self, name: &str, detail: String) -> ConditionCheck {
        let detail = if self.notes.is_empty() {
            detail
        } else {
            format!("{detail}; failing: {}", self.notes.join(", "))
        };
        ConditionCheck {
            name: name.into(),
            passed: self.exact_ok && self.worst > 0.0,
            margin: self.worst,
            detail,
        }
    }
}

fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn min_over(f: impl Fn(f64) -> f64, xs: &[f64]) -> f64 {
    xs.iter().map(|&x| f(x)).fold(f64::INFINITY, f64::min)
}

fn max_over(f: impl Fn(f64) -> f64, xs: &[f64]) -> f64 {
    xs.iter().map(|&x| f(x)).fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest forward difference quotient over consecutive grid points.
fn min_difference_slope(f: &dyn IntervalMap, xs: &[f64]) -> f64 {
    xs.windows(2)
        .map(|w| (f.value(w[1]) - f.value(w[0])) / (w[1] - w[0]))
        .fold(f64::INFINITY, f64::min)
}

/// Largest gap between difference quotients and derivatives at midpoints.
fn derivative_mismatch(f: &dyn IntervalMap, xs: &[f64]) -> f64 {
    let h = 1e-6;
    xs.iter()
        .filter(|&&x| x > h && x < 1.0 - h)
        .map(|&x| ((f.value(x + h) - f.value(x - h)) / (2.0 * h) - f.derivative(x)).abs())
        .fold(0.0, f64::max)
}

const DERIVATIVE_TOL: f64 = 1e-6;

/// Checks the fibre-map conditions on a grid of `grid_size` points.
pub fn validate_conditions(fs: &FiberSystem, grid_size: usize) -> ConditionReport {
    let n = grid_size.max(16);
    let xs = grid(n, 0.0, 1.0);
    let interior = &xs[1..n - 1];
    let p = fs.params();
    let b = fs.b();
    let f0 = fs.f0();
    let f0t = fs.f0_tilde();
    let f1 = fs.f1();
    let f2 = fs.f2();
    let f2t = fs.f2_tilde();
    let mut checks = Vec::new();

    let mut m = Margins::new();
    m.exact("f0(0) = 0", f0.value(0.0));
    m.exact("f0(1) = 1", f0.value(1.0) - 1.0);
    m.add("beta0 > 1", p.beta0 - 1.0);
    m.exact("f0'(0) = beta0", f0.derivative(0.0) - p.beta0);
    m.add("lambda0 in (0,1)", p.lambda0.min(1.0 - p.lambda0));
    m.exact("f0'(1) = lambda0", f0.derivative(1.0) - p.lambda0);
    m.add("f0' > 0", min_over(|x| f0.derivative(x), &xs));
    m.add("difference quotients > 0", min_difference_slope(f0, &xs));
    m.add("f0(x) > x inside", min_over(|x| f0.value(x) - x, interior));
    m.close("derivative cross-check", derivative_mismatch(f0, &xs), DERIVATIVE_TOL);
    checks.push(m.finish(
        "F0",
        format!("fixed points 0 (slope {}) and 1 (slope {})", f0.derivative(0.0), f0.derivative(1.0)),
    ));

    let mut m = Margins::new();
    m.add("gamma > lambda0", p.gamma - p.lambda0);
    m.add("gamma < 1", 1.0 - p.gamma);
    m.exact("f1(1) = 0", f1.value(1.0));
    let p1 = f1.fixed_point();
    m.exact("f1(p1) = p1", f1.value(p1) - p1);
    checks.push(m.finish("F1", format!("p1 = {p1}")));

    let mut m = Margins::new();
    let sink = fs.config().sink;
    m.exact("f2(0) = 0", f2.value(0.0));
    m.add("beta2 > 1", p.beta2 - 1.0);
    m.exact("f2'(0) = beta2", f2.derivative(0.0) - p.beta2);
    m.exact("f2(p2) = p2", f2.value(sink) - sink);
    m.add("f2'(p2) < 1", 1.0 - f2.derivative(sink));
    m.add("f2' > 0", min_over(|x| f2.derivative(x), &xs));
    m.add("difference quotients > 0", min_difference_slope(f2, &xs));
    let below: Vec<f64> = interior.iter().copied().filter(|&x| x < sink).collect();
    let above: Vec<f64> = interior.iter().copied().filter(|&x| x > sink).collect();
    m.add("f2(x) > x on (0,p2)", min_over(|x| f2.value(x) - x, &below));
    m.add("f2(x) < x on (p2,1]", min_over(|x| x - f2.value(x), &above));
    m.close("derivative cross-check", derivative_mismatch(f2, &xs), DERIVATIVE_TOL);
    checks.push(m.finish("F2", format!("p2 = {sink}, f2'(p2) = {}", f2.derivative(sink))));

    let mut m = Margins::new();
    let inequality = p.gamma * p.lambda0.powi(3) * (1.0 - p.lambda0) / (1.0 - 1.0 / p.beta0);
    m.add("-f0'' > 0", min_over(|x| -f0.second_derivative(x), &xs));
    m.add(
        "f0' decreasing on grid",
        xs.windows(2)
            .map(|w| f0.derivative(w[0]) - f0.derivative(w[1]))
            .fold(f64::INFINITY, f64::min),
    );
    let quotient_noise = 64.0 * f64::EPSILON * (n - 1) as f64;
    m.add(
        "difference quotients decreasing",
        xs.windows(3)
            .map(|w| {
                let left = (f0.value(w[1]) - f0.value(w[0])) / (w[1] - w[0]);
                let right = (f0.value(w[2]) - f0.value(w[1])) / (w[2] - w[1]);
                left - right
            })
            .fold(f64::INFINITY, f64::min)
            + quotient_noise,
    );
    let monotone = m.finish("F01", String::new());
    let mut check = ConditionCheck {
        name: "F01".into(),
        passed: monotone.passed && inequality > 1.0,
        margin: inequality - 1.0,
        detail: format!("gamma lambda0^3 (1-lambda0) / (1-1/beta0) = {inequality}"),
    };
    if !monotone.passed {
        check.detail = format!("{}; f0' not decreasing{}", check.detail, monotone.detail);
    }
    checks.push(check);

    let mut m = Margins::new();
    let above_b: Vec<f64> = xs.iter().copied().filter(|&x| x >= b).collect();
    m.add("f0~(0) > 0", f0t.value(0.0));
    m.exact("f0~(1) = 1", f0t.value(1.0) - 1.0);
    m.add("f2~(0) > 0", f2t.value(0.0));
    let coincide = above_b
        .iter()
        .map(|&x| (f0t.value(x) - f0.value(x)).abs().max((f0t.derivative(x) - f0.derivative(x)).abs()))
        .fold(0.0, f64::max);
    m.exact("f0~ = f0 on [b,1]", coincide);
    m.add("f0~' > 0", min_over(|x| f0t.derivative(x), &xs));
    m.add("f2~' > 0", min_over(|x| f2t.derivative(x), &xs));
    let distance = max_over(|x| (f0t.value(x) - f0.value(x)).abs().max((f2t.value(x) - f2.value(x)).abs()), &xs);
    checks.push(m.finish("F~02", format!("sup distance to plain maps {distance}")));

    let derivs = |x: f64| [f0.derivative(x), f0t.derivative(x), f2.derivative(x), f2t.derivative(x)];
    let mut m = Margins::new();
    let max_deriv = max_over(|x| derivs(x).into_iter().fold(f64::NEG_INFINITY, f64::max), &xs);
    let max_inside = max_over(|x| derivs(x).into_iter().fold(f64::NEG_INFINITY, f64::max), interior);
    // The bound is attained at 0 by f0.
    m.exact("all derivatives <= beta0", (max_deriv - p.beta0).max(0.0));
    m.add("derivatives < beta0 off 0", p.beta0 - max_inside);
    checks.push(m.finish("F012.derivative_bound", format!("max derivative {max_deriv}")));

    let h = fs.h();
    let hp = fs.h_prime();
    let f1_h = (f1.value(h.hi), f1.value(h.lo));
    let f1_hp = (f1.value(hp.hi), f1.value(hp.lo));
    let f2_top = max_over(|x| f2.value(x), &xs);
    let f2t_top = max_over(|x| f2t.value(x), &xs);
    let mut m = Margins::new();
    m.add("f1(H) misses H", f1_h.0 - h.hi);
    m.add("f1(H') misses H'", hp.lo - f1_hp.1);
    m.add("f1([0,1]) misses H'", hp.lo - f1.value(0.0));
    m.add("f2([0,1]) misses H'", hp.lo - f2_top);
    m.add("f2~([0,1]) misses H'", hp.lo - f2t_top);
    checks.push(m.finish(
        "F012.intersections",
        format!("H = [0, {}], H' = [{}, 1]", h.hi, hp.lo),
    ));

    // f0' decreases, so its supremum off H is the value at b; the grid
    // covers the other maps.
    let off_h: Vec<f64> = std::iter::once(b).chain(xs.iter().copied().filter(|&x| x > b)).collect();
    let beta_prime = max_over(|x| derivs(x).into_iter().fold(f64::NEG_INFINITY, f64::max), &off_h);
    let in_h: Vec<f64> = grid(n, 0.0, b);
    let beta_h = min_over(|x| derivs(x).into_iter().fold(f64::INFINITY, f64::min), &in_h);
    let in_hp: Vec<f64> = std::iter::once(hp.lo).chain(grid(n, hp.lo, 1.0)).collect();
    let lambda_prime = max_over(|x| f0.derivative(x).max(f0t.derivative(x)), &in_hp);

    let mut m = Margins::new();
    m.add("beta' < beta2", p.beta2 - beta_prime);
    checks.push(m.finish("F012.beta_prime", format!("beta' = {beta_prime}")));
    let mut m = Margins::new();
    m.add("beta_H < beta2", p.beta2 - beta_h);
    checks.push(m.finish("F012.beta_h", format!("beta_H = {beta_h}")));
    let mut m = Margins::new();
    m.add("lambda' < 1", 1.0 - lambda_prime);
    checks.push(m.finish("F012.lambda_prime", format!("lambda' = {lambda_prime}")));

    let (l0, lb0, lbh, lbp, llp) = (
        p.lambda0.ln().abs(),
        p.beta0.ln(),
        beta_h.ln(),
        beta_prime.ln(),
        lambda_prime.ln().abs(),
    );
    let lhs = l0 * lb0 / lbh - llp + 2.0 / 3.0 * lb0;
    let rhs = 0.75 * lbp;
    let mut m = Margins::new();
    m.add("log inequality", rhs - lhs);
    checks.push(m.finish("F012.log_inequality", format!("lhs = {lhs}, rhs = {rhs}")));

    let lower = 4.0 * l0 * lb0 / (lbh * lbp);
    let length = if lower.is_finite() {
        Some(if lower < 1.0 { 1 } else { lower.floor() as u64 + 1 })
    } else {
        None
    };
    let mut m = Margins::new();
    match length {
        Some(l) => {
            let value = (l as f64 * lb0 + p.gamma.ln()) / (l as f64 + 1.0);
            m.add("length condition", lbp - value);
            checks.push(m.finish(
                "F012.length_condition",
                format!("L = {l} (L > {lower}), log(beta0^L gamma)/(L+1) = {value}"),
            ));
        }
        None => {
            m.add("length bound finite", f64::NEG_INFINITY);
            checks.push(m.finish("F012.length_condition", format!("lower bound {lower}")));
        }
    }

    ConditionReport {
        grid_size: n,
        checks,
        length_condition_len: length,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::FiberConfig;
    use crate::params::PotentialParams;

    #[test]
    fn default_system_passes() {
        let fs = FiberSystem::new(PotentialParams::default(), FiberConfig::default()).unwrap();
        let r = validate_conditions(&fs, 4001);
        assert!(r.passed(), "{}", r.render());
        let f01 = r.get("F01").unwrap();
        assert!((f01.margin - 0.18125).abs() < 1e-12);
        assert_eq!(r.length_condition_len, Some(1));
    }

    #[test]
    fn wide_h_breaks_intersections() {
        let cfg = FiberConfig {
            b: 0.1,
            ..Default::default()
        };
        let fs = FiberSystem::new(PotentialParams::default(), cfg).unwrap();
        let r = validate_conditions(&fs, 1001);
        assert!(!r.get("F012.intersections").unwrap().passed);
    }

    #[test]
    fn weak_contraction_breaks_f01() {
        let p = PotentialParams {
            lambda0: 0.3,
            gamma: 0.5,
            ..Default::default()
        };
        let fs = FiberSystem::new(p, FiberConfig::default()).unwrap();
        let r = validate_conditions(&fs, 1001);
        let f01 = r.get("F01").unwrap();
        assert!(!f01.passed);
        assert!(f01.margin < 0.0);
    }

    #[test]
    fn quadratic_climb_family_fails_f01() {
        // f(x) = x + a x (1 - x) has f'(0) = 1 + a, f'(1) = 1 - a.
        let gamma = 0.9;
        for k in 1..100 {
            let a = k as f64 / 100.0;
            let (beta0, lambda0) = (1.0 + a, 1.0 - a);
            let v = gamma * lambda0.powi(3) * (1.0 - lambda0) / (1.0 - 1.0 / beta0);
            assert!(v < 1.0);
            assert!((v - gamma * (1.0 - a).powi(3) * (1.0 + a)).abs() < 1e-12);
        }
    }
}
