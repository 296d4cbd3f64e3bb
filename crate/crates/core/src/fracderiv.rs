//! Riemann–Liouville integrals and Weyl fractional derivatives of sampled
//! functions. Functions are piecewise linear between grid nodes and every
//! cell is integrated exactly against the power weight, so the singular
//! kernel is never evaluated at the singular node.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::levy::PathGrid;
use crate::quad::kronrod21;
use crate::rng::{Purpose, SeedRecord};
use crate::volterra::McEstimate;

/// Values at the nodes of a uniform grid, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: PathGrid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: PathGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} values on a grid of {} nodes",
                values.len(),
                grid.steps() + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sampled value {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: PathGrid, f: F) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> PathGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn slope(&self, j: usize) -> f64 {
        (self.values[j + 1] - self.values[j]) / self.grid.dt()
    }

    /// Linear interpolant at `x ∈ [0, T]`.
    pub fn eval(&self, x: f64) -> f64 {
        let h = self.grid.dt();
        let j = ((x / h).floor().max(0.0) as usize).min(self.grid.steps() - 1);
        self.values[j] + self.slope(j) * (x - j as f64 * h)
    }

    /// `x -> f(T - x)`.
    pub fn reversed(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().rev().copied().collect(),
        }
    }

    /// Every other node, when the step count is even.
    pub fn coarsened(&self) -> Option<Self> {
        let n = self.grid.steps();
        if n % 2 != 0 || n < 2 {
            return None;
        }
        let grid = PathGrid::new(self.grid.horizon(), n / 2).ok()?;
        Some(Self {
            grid,
            values: self.values.iter().step_by(2).copied().collect(),
        })
    }

    /// Restriction to `[0, t_k]`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.grid.steps() {
            return Err(invalid(format!("cannot truncate at node {k}")));
        }
        let grid = PathGrid::new(self.grid.node(k), k)?;
        Ok(Self {
            grid,
            values: self.values[..=k].to_vec(),
        })
    }
}

/// Endpoint-compensated functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compensation {
    /// `f_{0+}(x) = f(x) - f(0+)`
    Left,
    /// `g_{T-}(x) = g(T-) - g(x)`, with `g(T-)` supplied
    Right { left_limit: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedFunction {
    pub base: SampledFunction,
    pub mode: Compensation,
}

impl CompensatedFunction {
    pub fn left(base: SampledFunction) -> Self {
        Self {
            base,
            mode: Compensation::Left,
        }
    }

    pub fn right(base: SampledFunction, left_limit: f64) -> Self {
        Self {
            base,
            mode: Compensation::Right { left_limit },
        }
    }

    /// The compensated values; the anchoring endpoint is exactly 0.
    pub fn sampled(&self) -> SampledFunction {
        let v = &self.base.values;
        let values = match self.mode {
            Compensation::Left => v.iter().map(|x| x - v[0]).collect(),
            Compensation::Right { left_limit } => {
                let mut out: Vec<f64> = v.iter().map(|x| left_limit - x).collect();
                *out.last_mut().expect("non-empty") = 0.0;
                out
            }
        };
        SampledFunction {
            grid: self.base.grid,
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn check_order(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// `∫_a^b r^k dr` for `0 <= a < b`.
fn power_moment(a: f64, b: f64, k: f64) -> f64 {
    (b.powf(k + 1.0) - a.powf(k + 1.0)) / (k + 1.0)
}

/// `I^α_{0+} f(x) = (1/Γ(α)) ∫_0^x f(y)(x-y)^{α-1} dy` (left) or
/// `I^α_{T-} f(x) = (1/Γ(α)) ∫_x^T f(y)(y-x)^{α-1} dy` (right).
pub fn rl_integral(f: &SampledFunction, alpha: f64, side: Side, x: f64) -> Result<f64> {
    check_order(alpha)?;
    let big_t = f.grid.horizon();
    if !(x > 0.0 && x <= big_t) {
        return Err(invalid(format!("x = {x} is outside (0, {big_t}]")));
    }
    if side == Side::Right {
        if x == big_t {
            return Ok(0.0);
        }
        return rl_integral(&f.reversed(), alpha, Side::Left, big_t - x);
    }
    let h = f.grid.dt();
    let mut acc = 0.0;
    for j in 0..f.grid.steps() {
        let a = j as f64 * h;
        if a >= x {
            break;
        }
        let b = ((j + 1) as f64 * h).min(x);
        // on the cell, f(y) = f(b) - σ (r - r_b) with r = x - y
        let sigma = f.slope(j);
        let fb = f.values[j] + sigma * (b - a);
        let (rb, ra) = (x - b, x - a);
        acc += (fb + sigma * rb) * power_moment(rb, ra, alpha - 1.0)
            - sigma * power_moment(rb, ra, alpha);
    }
    Ok(acc / gamma(alpha))
}

/// [`rl_integral`] on the left at every node, from tabulated cell moments.
pub fn rl_integral_nodes(f: &SampledFunction, alpha: f64) -> Result<Vec<f64>> {
    check_order(alpha)?;
    let n = f.grid.steps();
    let h = f.grid.dt();
    let m0: Vec<f64> = (0..=n)
        .map(|m| {
            if m == 0 {
                0.0
            } else {
                power_moment((m - 1) as f64 * h, m as f64 * h, alpha - 1.0)
            }
        })
        .collect();
    let m1: Vec<f64> = (0..=n)
        .map(|m| {
            if m == 0 {
                0.0
            } else {
                power_moment((m - 1) as f64 * h, m as f64 * h, alpha)
            }
        })
        .collect();
    let slopes: Vec<f64> = (0..n).map(|j| f.slope(j)).collect();
    let g = gamma(alpha);
    Ok((0..=n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..i {
                let m = i - j;
                let rb = (m - 1) as f64 * h;
                let sigma = slopes[j];
                acc += (f.values[j + 1] + sigma * rb) * m0[m] - sigma * m1[m];
            }
            acc / g
        })
        .collect())
}

/// Precomputed cell moments for node-aligned Weyl derivatives of order `α`
/// with step `h`: `P_m = ∫_{(m-1)h}^{mh} r^{-α-1} dr`, `Q_m = ∫ r^{-α} dr`.
#[derive(Debug, Clone)]
pub struct WeylTables {
    alpha: f64,
    h: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    prefactor: f64,
}

impl WeylTables {
    pub fn new(alpha: f64, grid: PathGrid) -> Result<Self> {
        check_order(alpha)?;
        let h = grid.dt();
        let n = grid.steps();
        let mut p = vec![f64::INFINITY; n + 1];
        let mut q = vec![0.0; n + 1];
        for m in 1..=n {
            let (a, b) = ((m - 1) as f64 * h, m as f64 * h);
            if m > 1 {
                p[m] = (a.powf(-alpha) - b.powf(-alpha)) / alpha;
            }
            q[m] = power_moment(a, b, -alpha);
        }
        Ok(Self {
            alpha,
            h,
            p,
            q,
            prefactor: 1.0 / gamma(1.0 - alpha),
        })
    }

    /// `D^α_{0+} f(t_i)` for `i >= 1`.
    pub fn left_at(&self, f: &SampledFunction, i: usize) -> f64 {
        let v = &f.values;
        let s = i as f64 * self.h;
        let mut integral = f.slope(i - 1) * self.q[1];
        for m in 2..=i {
            let j = i - m;
            let sigma = (v[j + 1] - v[j]) / self.h;
            integral += (v[i] - v[j] - sigma * m as f64 * self.h) * self.p[m] + sigma * self.q[m];
        }
        self.prefactor * (v[i] / s.powf(self.alpha) + self.alpha * integral)
    }
}

/// `D^α_{0+} f(s) = (1/Γ(1-α)) (f(s)/s^α + α ∫_0^s (f(s) - f(y))/(s-y)^{α+1} dy)`
/// for any `s ∈ (0, T]`.
pub fn left_frac_deriv(f: &SampledFunction, alpha: f64, s: f64) -> Result<f64> {
    check_order(alpha)?;
    if !(s > 0.0 && s <= f.grid.horizon()) {
        return Err(invalid(format!(
            "s = {s} is outside (0, {}]",
            f.grid.horizon()
        )));
    }
    let h = f.grid.dt();
    let fs = f.eval(s);
    let mut integral = 0.0;
    for j in 0..f.grid.steps() {
        let a = j as f64 * h;
        if a >= s {
            break;
        }
        let b = ((j + 1) as f64 * h).min(s);
        let sigma = f.slope(j);
        // f(s) - f(y) = c + σ r with r = s - y; c = 0 on the cell holding s
        let c = if b < s {
            fs - f.values[j] - sigma * (s - a)
        } else {
            0.0
        };
        let (rb, ra) = (s - b, s - a);
        if c != 0.0 {
            integral += c * (rb.powf(-alpha) - ra.powf(-alpha)) / alpha;
        }
        integral += sigma * power_moment(rb, ra, -alpha);
    }
    Ok((fs / s.powf(alpha) + alpha * integral) / gamma(1.0 - alpha))
}

/// `D^α_{0+} f(t_i)` at every node `i = 1..=n`, in `O(n²)`; index 0 is NaN.
pub fn left_frac_deriv_nodes(f: &SampledFunction, alpha: f64) -> Result<Vec<f64>> {
    let tables = WeylTables::new(alpha, f.grid)?;
    let mut out = vec![f64::NAN; f.grid.steps() + 1];
    out[1..]
        .par_iter_mut()
        .enumerate()
        .for_each(|(k, o)| *o = tables.left_at(f, k + 1));
    Ok(out)
}

/// `D^{1-α}_{t-} Y_{t-}(s)` for `t = t_k`, written for `φ = Y(t-) - Y`:
/// `(1/Γ(α)) (φ(s)/(t-s)^{1-α} + (1-α) ∫_s^t (Y(u) - Y(s))/(u-s)^{2-α} du)`.
/// The sign convention makes `∫_0^t 1 dY = Y(t-) - Y(0)`.
pub fn right_frac_deriv_compensated(
    y: &SampledFunction,
    alpha: f64,
    t: f64,
    s: f64,
    left_limit_value: f64,
) -> Result<f64> {
    check_order(alpha)?;
    let k = y
        .grid
        .index_of(t)
        .filter(|k| *k > 0)
        .ok_or_else(|| invalid(format!("t = {t} is not a grid node")))?;
    if !(s >= 0.0 && s < t) {
        return Err(invalid(format!("s = {s} is outside [0, t)")));
    }
    let phi = CompensatedFunction::right(y.truncated(k)?, left_limit_value)
        .sampled()
        .reversed();
    left_frac_deriv(&phi, 1.0 - alpha, t - s)
}

/// [`right_frac_deriv_compensated`] at every node `i = 0..k-1` for
/// `t = t_k`; index `k` is NaN.
pub fn right_frac_deriv_nodes(
    y: &SampledFunction,
    alpha: f64,
    k: usize,
    left_limit_value: f64,
) -> Result<Vec<f64>> {
    check_order(alpha)?;
    let phi = CompensatedFunction::right(y.truncated(k)?, left_limit_value)
        .sampled()
        .reversed();
    let mut rev = left_frac_deriv_nodes(&phi, 1.0 - alpha)?;
    rev.reverse();
    Ok(rev)
}

/// Derivative trace with `|D on the grid - D on the half grid|` at the
/// shared nodes; odd nodes carry the larger neighbouring diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTrace {
    pub s: Vec<f64>,
    pub value: Vec<f64>,
    pub refinement_diag: Vec<f64>,
}

impl DerivativeTrace {
    pub fn left(f: &SampledFunction, alpha: f64) -> Result<Self> {
        let fine = left_frac_deriv_nodes(f, alpha)?;
        let coarse = match f.coarsened() {
            Some(c) => left_frac_deriv_nodes(&c, alpha)?,
            None => return Err(invalid("refinement diagnostic needs an even step count")),
        };
        let n = f.grid.steps();
        let even: Vec<f64> = (0..=n / 2)
            .map(|k| (fine[2 * k] - coarse[k]).abs())
            .collect();
        let refinement_diag = (0..=n)
            .map(|i| {
                if i % 2 == 0 {
                    even[i / 2]
                } else {
                    even[i / 2].max(even[i / 2 + 1])
                }
            })
            .collect();
        Ok(Self {
            s: f.grid.nodes().collect(),
            value: fine,
            refinement_diag,
        })
    }

    /// CSV `s,value,refinement_diag`, skipping the singular node `s = 0`.
    pub fn to_csv(&self, metadata: &str) -> String {
        let mut out = format!("# {metadata}\ns,value,refinement_diag\n");
        for i in 1..self.s.len() {
            let _ = writeln!(
                out,
                "{},{},{}",
                self.s[i], self.value[i], self.refinement_diag[i]
            );
        }
        out
    }
}

/// `E|D^α B(s)|²` for Brownian `B`, by exact sampling and against the
/// closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmMoment {
    pub mc: McEstimate,
    /// `(1 + 2α²/((1-α)(1-2α)) + 2α/(1-α)) s^{1-2α} / Γ(1-α)²`
    pub reference: f64,
    /// The same bracket without the `1/Γ(1-α)²` prefactor.
    pub bracket: f64,
}

/// Variance of `D^α_{0+}` at a node applied to the Brownian bridges between
/// `i` nodes of width `h`: `(α/Γ(1-α))² h^{1-2α} Σ_m v_m`, where `v_m` is the
/// variance of `Φ_m(x) = ((x+m-1)^{-α} - m^{-α})/α` for `x` uniform on `[0,1]`.
pub fn bridge_variance(alpha: f64, h: f64, i: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(invalid(format!(
            "bridge variance needs alpha in (0, 1/2), got {alpha}"
        )));
    }
    let v1 = {
        let mean = 1.0 / (1.0 - alpha);
        let second = (1.0 / (1.0 - 2.0 * alpha) - 2.0 / (1.0 - alpha) + 1.0) / (alpha * alpha);
        second - mean * mean
    };
    let mut sum = v1;
    for m in 2..=i {
        let mf = m as f64;
        let phi = |x: f64| ((x + mf - 1.0).powf(-alpha) - mf.powf(-alpha)) / alpha;
        let mean = kronrod21(phi, 0.0, 1.0)?;
        sum += kronrod21(|x| (phi(x) - mean).powi(2), 0.0, 1.0)?;
    }
    Ok((alpha / gamma(1.0 - alpha)).powi(2) * h.powf(1.0 - 2.0 * alpha) * sum)
}

pub fn bm_moment_reference(alpha: f64, s: f64) -> (f64, f64) {
    let bracket = (1.0
        + 2.0 * alpha * alpha / ((1.0 - alpha) * (1.0 - 2.0 * alpha))
        + 2.0 * alpha / (1.0 - alpha))
        * s.powf(1.0 - 2.0 * alpha);
    (bracket / gamma(1.0 - alpha).powi(2), bracket)
}

/// Samples `D^α B(s)` exactly: the derivative of the piecewise-linear
/// interpolant of `B` at the nodes, plus an independent Gaussian carrying
/// the bridge variance the interpolant misses.
pub fn frac_deriv_bm_moment(
    alpha: f64,
    s: f64,
    n_paths: usize,
    grid: PathGrid,
    seed: u64,
) -> Result<BmMoment> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(invalid(format!(
            "the Brownian moment needs alpha in (0, 1/2), got {alpha}"
        )));
    }
    if n_paths < 1000 {
        return Err(invalid(format!("need at least 1000 paths, got {n_paths}")));
    }
    let i = grid
        .index_of(s)
        .filter(|i| *i > 0)
        .ok_or_else(|| invalid(format!("s = {s} is not a positive grid node")))?;
    let tables = WeylTables::new(alpha, grid)?;
    let bridge_sd = bridge_variance(alpha, grid.dt(), i)?.sqrt();
    let sd = grid.dt().sqrt();
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = SeedRecord::new(seed, rep, Purpose::Integrand).rng();
            let mut values = Vec::with_capacity(grid.steps() + 1);
            values.push(0.0);
            let mut b = 0.0;
            for _ in 0..i {
                let z: f64 = StandardNormal.sample(&mut rng);
                b += sd * z;
                values.push(b);
            }
            let f = SampledFunction {
                grid: PathGrid::new(grid.node(i), i).expect("valid"),
                values,
            };
            let mut aux = SeedRecord::new(seed, rep, Purpose::Auxiliary).rng();
            let z: f64 = StandardNormal.sample(&mut aux);
            let d = tables.left_at(&f, i) + bridge_sd * z;
            d * d
        })
        .collect();
    let (reference, bracket) = bm_moment_reference(alpha, s);
    Ok(BmMoment {
        mc: McEstimate::from_samples(&samples)?,
        reference,
        bracket,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Quadrature;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PathGrid {
        PathGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn rl_integral_closed_forms() {
        let one = SampledFunction::from_fn(grid(64), |_| 1.0).unwrap();
        for &a in &[0.25, 0.5, 0.8] {
            let v = rl_integral(&one, a, Side::Left, 0.7).unwrap();
            assert!((v - 0.7f64.powf(a) / gamma(1.0 + a)).abs() < 1e-12);
        }
        let lin = SampledFunction::from_fn(grid(64), |t| t).unwrap();
        let v = rl_integral(&lin, 0.5, Side::Left, 1.0).unwrap();
        assert!((v - 4.0 / (3.0 * PI.sqrt())).abs() < 1e-12);
        let zero = SampledFunction::from_fn(grid(8), |_| 0.0).unwrap();
        assert_eq!(rl_integral(&zero, 0.3, Side::Right, 0.2).unwrap(), 0.0);
        assert!(rl_integral(&one, 0.5, Side::Left, 1.5).is_err());
    }

    #[test]
    fn right_rl_integral_of_linear() {
        // (1/Γ(α)) ∫_x^1 y (y-x)^{α-1} dy = ((1-x)^{α+1}/(α+1) + x(1-x)^α/α)/Γ(α)
        let lin = SampledFunction::from_fn(grid(32), |t| t).unwrap();
        let (a, x): (f64, f64) = (0.3, 0.4);
        let exact = ((1.0 - x).powf(a + 1.0) / (a + 1.0) + x * (1.0 - x).powf(a) / a) / gamma(a);
        assert!((rl_integral(&lin, a, Side::Right, x).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn node_rl_integral_matches_pointwise() {
        let f = SampledFunction::from_fn(grid(64), |t| (3.0 * t).sin() + t * t).unwrap();
        let nodes = rl_integral_nodes(&f, 0.35).unwrap();
        assert_eq!(nodes[0], 0.0);
        for k in [1, 7, 33, 64] {
            let v = rl_integral(&f, 0.35, Side::Left, grid(64).node(k)).unwrap();
            assert!((nodes[k] - v).abs() < 1e-13, "{k}: {} vs {v}", nodes[k]);
        }
    }

    #[test]
    fn left_derivative_of_linear_and_constant() {
        let lin = SampledFunction::from_fn(grid(256), |t| t).unwrap();
        let c = SampledFunction::from_fn(grid(256), |_| 2.5).unwrap();
        let a = 0.4;
        assert!((left_frac_deriv(&lin, a, 1.0).unwrap() - 1.0 / gamma(1.6)).abs() < 1e-12);
        assert!(
            (left_frac_deriv(&lin, a, 0.3).unwrap() - 0.3f64.powf(0.6) / gamma(1.6)).abs() < 1e-12
        );
        assert!(
            (left_frac_deriv(&c, a, 0.3).unwrap() - 2.5 * 0.3f64.powf(-a) / gamma(0.6)).abs()
                < 1e-12
        );
        let nodes = left_frac_deriv_nodes(&lin, a).unwrap();
        for i in [1usize, 77, 256] {
            let s = i as f64 / 256.0;
            assert!((nodes[i] - s.powf(0.6) / gamma(1.6)).abs() < 1e-11, "i={i}");
        }
    }

    #[test]
    fn node_and_general_derivatives_agree() {
        let f = SampledFunction::from_fn(grid(128), |t| (5.0 * t).sin() + t * t).unwrap();
        let nodes = left_frac_deriv_nodes(&f, 0.35).unwrap();
        for i in [1usize, 3, 64, 128] {
            let g = left_frac_deriv(&f, 0.35, i as f64 / 128.0).unwrap();
            assert!((nodes[i] - g).abs() < 1e-10 * g.abs().max(1.0), "i={i}");
        }
    }

    #[test]
    fn smooth_derivative_against_series() {
        // D^α e^t = Σ_k t^{k-α}/Γ(k+1-α)
        let f = SampledFunction::from_fn(grid(4096), f64::exp).unwrap();
        let a = 0.3;
        let exact: f64 = (0..40)
            .map(|k| 0.5f64.powf(k as f64 - a) / gamma(k as f64 + 1.0 - a))
            .sum();
        assert!((left_frac_deriv(&f, a, 0.5).unwrap() / exact - 1.0).abs() < 1e-6);
    }

    #[test]
    fn right_derivative_examples() {
        let y = SampledFunction::from_fn(grid(512), |u| u).unwrap();
        for &s in &[0.0, 0.25, 0.5, 0.9] {
            let v = right_frac_deriv_compensated(&y, 0.5, 1.0, s, 1.0).unwrap();
            assert!((v - (1.0 - s).sqrt() / gamma(1.5)).abs() < 1e-11, "s={s}");
        }
        let c = SampledFunction::from_fn(grid(64), |_| 3.0).unwrap();
        let nodes = right_frac_deriv_nodes(&c, 0.4, 64, 3.0).unwrap();
        assert!(nodes[..64].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn compensation_anchors() {
        let f = SampledFunction::from_fn(grid(4), |t| 1.0 + t).unwrap();
        assert_eq!(
            CompensatedFunction::left(f.clone()).sampled().values()[0],
            0.0
        );
        let r = CompensatedFunction::right(f, 1.9).sampled();
        assert_eq!(*r.values().last().unwrap(), 0.0);
        assert!((r.values()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn bm_reference_values() {
        let (r, b) = bm_moment_reference(0.4, 1.0);
        assert!((b - 5.0).abs() < 1e-12);
        assert!((r - 5.0 / gamma(0.6).powi(2)).abs() < 1e-12);
        assert!(bm_moment_reference(0.4, 1e-12).0 < 1e-2);
        assert!(frac_deriv_bm_moment(0.5, 1.0, 1000, grid(8), 1).is_err());
    }

    #[test]
    fn bridge_variance_against_double_integral() {
        // Var ∫_0^1 b(y) (s - y)^{-α-1} dy for a unit bridge with s = 2:
        // ∫∫ K(y)K(y') (min(y,y') - y y') dy dy'
        let a = 0.3;
        let k = |y: f64| (2.0 - y).powf(-a - 1.0);
        let q = Quadrature::default();
        // split at the kink of min(y, z)
        let inner = |y: f64| {
            let c = |z: f64| k(y) * k(z) * (y.min(z) - y * z);
            q.integrate(c, 0.0, y).unwrap().value + q.integrate(c, y, 1.0).unwrap().value
        };
        let dbl = q.integrate(inner, 0.0, 1.0).unwrap().value;
        let v2 = bridge_variance(a, 1.0, 2).unwrap() - bridge_variance(a, 1.0, 1).unwrap();
        let expected = (a / gamma(1.0 - a)).powi(2) * dbl;
        assert!((v2 / expected - 1.0).abs() < 1e-8, "{v2} vs {expected}");
    }

    #[test]
    fn bm_moment_small_run() {
        let r = frac_deriv_bm_moment(0.3, 0.5, 2000, grid(256), 4).unwrap();
        assert!(
            (r.mc.estimate - r.reference).abs() < 3.0 * r.mc.std_error,
            "{r:?}"
        );
    }

    #[test]
    fn trace_csv_and_diagnostic() {
        let f = SampledFunction::from_fn(grid(64), |t| t * t).unwrap();
        let tr = DerivativeTrace::left(&f, 0.5).unwrap();
        assert!(tr.refinement_diag[64] < 1e-2);
        let csv = tr.to_csv("x");
        assert!(csv.starts_with("# x\ns,value,refinement_diag\n0.015625,"));
        assert_eq!(csv.lines().count(), 66);
        assert!(
            DerivativeTrace::left(&SampledFunction::from_fn(grid(3), |t| t).unwrap(), 0.5).is_err()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn derivative_is_linear(
            a in 0.05f64..0.95, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, s in 0.05f64..1.0,
            w in 1.0f64..8.0,
        ) {
            let g = grid(128);
            let f1 = SampledFunction::from_fn(g, |t| (w * t).sin()).unwrap();
            let f2 = SampledFunction::from_fn(g, |t| t.powi(3) - t).unwrap();
            let comb = SampledFunction::from_fn(g, |t| c1 * (w * t).sin() + c2 * (t.powi(3) - t)).unwrap();
            let lhs = left_frac_deriv(&comb, a, s).unwrap();
            let rhs = c1 * left_frac_deriv(&f1, a, s).unwrap() + c2 * left_frac_deriv(&f2, a, s).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn rl_then_derivative_recovers_cubic(
            a in 0.1f64..0.9, c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, c3 in -1.0f64..1.0,
        ) {
            let g = grid(1024);
            let p = |t: f64| c0 + t * (c1 + t * (c2 + t * c3));
            let f = SampledFunction::from_fn(g, p).unwrap();
            let mut iv = vec![0.0];
            for k in 1..=1024 {
                iv.push(rl_integral(&f, a, Side::Left, g.node(k)).unwrap());
            }
            let d = left_frac_deriv_nodes(&SampledFunction::new(g, iv).unwrap(), a).unwrap();
            for k in (103..=1024).step_by(101) {
                prop_assert!((d[k] - p(g.node(k))).abs() < 1e-2);
            }
        }
    }
}
