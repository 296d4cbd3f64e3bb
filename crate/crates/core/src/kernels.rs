//! Deterministic Volterra kernels, their ε-shifts, `L_p` norms and
//! distances, and log-log rate fitting.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::levy::Moment;
use crate::quad::Quadrature;

/// A kernel `g(u)`, evaluated for `u > 0`.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn eval(&self, u: f64) -> f64;

    fn deriv(&self, _u: f64) -> Option<f64> {
        None
    }

    /// Exponent `β` of the leading behaviour `g(u) ~ c u^β` as `u -> 0`, when
    /// the kernel has power-law behaviour there.
    fn power_at_zero(&self) -> Option<f64> {
        None
    }

    fn singular_at_zero(&self) -> bool {
        self.power_at_zero().is_some_and(|b| b < 0.0)
    }

    fn describe(&self) -> String;
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn eval(&self, u: f64) -> f64 {
        (**self).eval(u)
    }
    fn deriv(&self, u: f64) -> Option<f64> {
        (**self).deriv(u)
    }
    fn power_at_zero(&self) -> Option<f64> {
        (**self).power_at_zero()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<K: Kernel + ?Sized> Kernel for Box<K> {
    fn eval(&self, u: f64) -> f64 {
        (**self).eval(u)
    }
    fn deriv(&self, u: f64) -> Option<f64> {
        (**self).deriv(u)
    }
    fn power_at_zero(&self) -> Option<f64> {
        (**self).power_at_zero()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// `g(u) = u^β e^{-λu}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaKernel {
    beta: f64,
    lambda: f64,
}

impl GammaKernel {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        if beta == 0.0 || !(beta > -1.0) || !beta.is_finite() {
            return Err(invalid(format!(
                "Gamma kernel needs beta in (-1, ∞) \\ {{0}}, got {beta}"
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!(
                "Gamma kernel needs lambda >= 0, got {lambda}"
            )));
        }
        Ok(Self { beta, lambda })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn perturbed(self, epsilon: f64) -> Result<PerturbedKernel<GammaKernel>> {
        PerturbedKernel::new(self, epsilon)
    }
}

impl Kernel for GammaKernel {
    fn eval(&self, u: f64) -> f64 {
        u.powf(self.beta) * (-self.lambda * u).exp()
    }

    fn deriv(&self, u: f64) -> Option<f64> {
        Some(u.powf(self.beta - 1.0) * (-self.lambda * u).exp() * (self.beta - self.lambda * u))
    }

    fn power_at_zero(&self) -> Option<f64> {
        Some(self.beta)
    }

    fn describe(&self) -> String {
        format!("gamma(beta={},lambda={})", self.beta, self.lambda)
    }
}

/// `g^ε(u) = g(u + ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedKernel<K> {
    base: K,
    epsilon: f64,
}

impl<K: Kernel> PerturbedKernel<K> {
    pub fn new(base: K, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(format!(
                "perturbation epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        Ok(Self { base, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base(&self) -> &K {
        &self.base
    }
}

impl<K: Kernel> Kernel for PerturbedKernel<K> {
    fn eval(&self, u: f64) -> f64 {
        self.base.eval(u + self.epsilon)
    }

    fn deriv(&self, u: f64) -> Option<f64> {
        self.base.deriv(u + self.epsilon)
    }

    fn describe(&self) -> String {
        format!("perturbed(eps={},{})", self.epsilon, self.base.describe())
    }
}

/// `g(u) = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantKernel(pub f64);

impl Kernel for ConstantKernel {
    fn eval(&self, _u: f64) -> f64 {
        self.0
    }

    fn deriv(&self, _u: f64) -> Option<f64> {
        Some(0.0)
    }

    fn describe(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// Pointwise difference `k1 - k2`.
#[derive(Debug, Clone, Copy)]
pub struct DifferenceKernel<A, B> {
    pub minuend: A,
    pub subtrahend: B,
}

impl<A: Kernel, B: Kernel> Kernel for DifferenceKernel<A, B> {
    fn eval(&self, u: f64) -> f64 {
        self.minuend.eval(u) - self.subtrahend.eval(u)
    }

    fn deriv(&self, u: f64) -> Option<f64> {
        Some(self.minuend.deriv(u)? - self.subtrahend.deriv(u)?)
    }

    fn power_at_zero(&self) -> Option<f64> {
        let sing = |k: Option<f64>| k.filter(|b| *b < 0.0);
        match (
            sing(self.minuend.power_at_zero()),
            sing(self.subtrahend.power_at_zero()),
        ) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        }
    }

    fn describe(&self) -> String {
        format!(
            "({})-({})",
            self.minuend.describe(),
            self.subtrahend.describe()
        )
    }
}

pub(crate) fn kernel_quadrature() -> Quadrature {
    Quadrature::with_tolerance(1e-14, 1e-11)
}

/// Leading power of `|k(u)|^p` at zero, as used for the closed-form cell.
pub(crate) fn pth_power_hint<K: Kernel + ?Sized>(k: &K, p: f64) -> Option<f64> {
    k.power_at_zero().map(|b| b * p)
}

fn check_lp_args(t: f64, p: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("horizon must be > 0, got {t}")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be in [1, ∞), got {p}")));
    }
    Ok(())
}

/// `∫_0^t |k(u)|^p du`, or `Divergent` when the power at zero is too
/// singular (`1 + βp <= 0`).
pub fn lp_norm_pow<K: Kernel + ?Sized>(k: &K, t: f64, p: f64) -> Result<Moment> {
    check_lp_args(t, p)?;
    let hint = pth_power_hint(k, p);
    if hint.is_some_and(|h| h <= -1.0) {
        return Ok(Moment::Divergent);
    }
    let v = kernel_quadrature().integrate_graded(|u| k.eval(u).abs().powf(p), 0.0, t, hint)?;
    Ok(Moment::Finite(v.value))
}

/// `(∫_0^t |k(u)|^p du)^{1/p}`.
pub fn lp_norm<K: Kernel + ?Sized>(k: &K, t: f64, p: f64) -> Result<Moment> {
    Ok(match lp_norm_pow(k, t, p)? {
        Moment::Finite(v) => Moment::Finite(v.powf(1.0 / p)),
        Moment::Divergent => Moment::Divergent,
    })
}

/// `∫_0^t |k1(u) - k2(u)|^p du`. The dyadic cells of the graded rule shrink
/// toward the singularity at zero, so the cancellation between a singular
/// kernel and its shift is resolved at every scale down to `2^-47 t`.
pub fn lp_distance_pow<A: Kernel + ?Sized, B: Kernel + ?Sized>(
    k1: &A,
    k2: &B,
    t: f64,
    p: f64,
) -> Result<Moment> {
    if !lp_norm_pow(k1, t, p)?.is_finite() || !lp_norm_pow(k2, t, p)?.is_finite() {
        return Ok(Moment::Divergent);
    }
    let diff = DifferenceKernel {
        minuend: k1,
        subtrahend: k2,
    };
    let hint = pth_power_hint(&diff, p);
    let v = kernel_quadrature().integrate_graded(|u| diff.eval(u).abs().powf(p), 0.0, t, hint)?;
    Ok(Moment::Finite(v.value.max(0.0)))
}

/// `‖k1 - k2‖_{L_p[0,t]}`.
pub fn lp_distance<A: Kernel + ?Sized, B: Kernel + ?Sized>(
    k1: &A,
    k2: &B,
    t: f64,
    p: f64,
) -> Result<Moment> {
    Ok(match lp_distance_pow(k1, k2, t, p)? {
        Moment::Finite(v) => Moment::Finite(v.powf(1.0 / p)),
        Moment::Divergent => Moment::Divergent,
    })
}

/// Least-squares line through `(log ε, log d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn rate_fit(eps_values: &[f64], distances: &[f64]) -> Result<RateFit> {
    if eps_values.len() != distances.len() {
        return Err(invalid(
            "rate fit needs equally many epsilons and distances",
        ));
    }
    if eps_values.len() < 3 {
        return Err(invalid("rate fit needs at least three points"));
    }
    if eps_values
        .iter()
        .chain(distances)
        .any(|v| !(*v > 0.0) || !v.is_finite())
    {
        return Err(invalid("rate fit needs positive finite inputs"));
    }
    let xs: Vec<f64> = eps_values.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs at least two distinct epsilons"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Exponent `κ` in `∫|g^ε - g|^p ≲ ε^κ` for the Gamma kernel.
pub fn theoretical_rate(beta: f64, lambda: f64, p: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !(p >= 1.0) {
        return Err(invalid(format!(
            "need lambda >= 0 and p >= 1, got lambda={lambda}, p={p}"
        )));
    }
    if beta > -1.0 && beta < 0.0 {
        if 1.0 + beta * p <= 0.0 {
            return Err(invalid(format!(
                "1 + beta p = {} <= 0: kernel not in L_p",
                1.0 + beta * p
            )));
        }
        Ok(1.0 - beta.abs() * p)
    } else if beta >= 1.0 {
        Ok(p)
    } else if beta > 0.0 {
        Ok(p.min(1.0 + beta * p))
    } else {
        Err(invalid(format!(
            "beta = {beta} is outside the Gamma-kernel regimes"
        )))
    }
}

/// `{10^-1, 10^-1.5, …, 10^-4}`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..7).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect()
}

/// Deterministic rate experiment for `g` against its ε-shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct RateExperiment {
    pub kernel: GammaKernel,
    pub p: f64,
    pub horizon: f64,
    pub rows: Vec<(f64, f64)>,
    pub theoretical: f64,
    pub fit: RateFit,
}

impl RateExperiment {
    pub fn run(kernel: GammaKernel, p: f64, horizon: f64, eps_grid: &[f64]) -> Result<Self> {
        let theoretical = theoretical_rate(kernel.beta(), kernel.lambda(), p)?;
        let rows = eps_grid
            .iter()
            .map(|&eps| {
                let shifted = kernel.perturbed(eps)?;
                match lp_distance_pow(&kernel, &shifted, horizon, p)? {
                    Moment::Finite(d) => Ok((eps, d)),
                    Moment::Divergent => {
                        Err(crate::Error::Divergent(format!("kernel not in L_{p}")))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let (e, d): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
        let fit = rate_fit(&e, &d)?;
        Ok(Self {
            kernel,
            p,
            horizon,
            rows,
            theoretical,
            fit,
        })
    }

    /// CSV `epsilon,distance_p_power,theoretical_exponent,fitted_slope`.
    pub fn to_csv(&self, metadata: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# {metadata} kernel={} p={} t={} r2={}",
            self.kernel.describe(),
            self.p,
            self.horizon,
            self.fit.r_squared
        );
        s.push_str("epsilon,distance_p_power,theoretical_exponent,fitted_slope\n");
        for (e, d) in &self.rows {
            let _ = writeln!(s, "{e},{d},{},{}", self.theoretical, self.fit.slope);
        }
        s
    }
}
