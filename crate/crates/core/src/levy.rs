//! Lévy drivers: characteristic triplets with symmetric Lévy measures,
//! moment and characteristic-exponent evaluation, and path sampling.
//!
//! Tempered-stable jumps are generated with the rejection form of the
//! shot-noise series: the arrival times `Γ_j` of a unit-rate Poisson process
//! are mapped through the inverse tail of the dominating stable measure,
//! `r_j = (α Γ_j / (2 C T))^(-1/α)`, each jump is kept with probability
//! `exp(-γ r_j)`, gets a fair random sign and a uniform time in `[0, T]`.
//! The series is cut after `n_terms` arrivals; the discarded jumps are all
//! smaller than the last `r_j` and have zero mean by symmetry, so no
//! compensating drift is added.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::quad::Quadrature;
use crate::rng::{Purpose, SeedRecord};

/// Result of a possibly infinite integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Divergent,
}

impl Moment {
    pub fn is_finite(&self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Moment::Finite(v) => Some(v),
            Moment::Divergent => None,
        }
    }
}

/// Symmetric jump-size law of a compound Poisson driver. Each magnitude is
/// used with a random sign.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    /// `(magnitude, probability)` pairs; probabilities sum to one.
    Discrete(Vec<(f64, f64)>),
    Gaussian {
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevyMeasureSpec {
    /// `C exp(-γ|z|) / |z|^(1+α)`.
    TemperedStable {
        c: f64,
        gamma: f64,
        alpha: f64,
    },
    CompoundPoisson {
        rate: f64,
        law: JumpLaw,
    },
    None,
}

fn ts_tail_cutoff(gamma: f64) -> f64 {
    1.0 + 40.0 / gamma
}

impl LevyMeasureSpec {
    pub fn tempered_stable(c: f64, gamma: f64, alpha: f64) -> Result<Self> {
        let nu = LevyMeasureSpec::TemperedStable { c, gamma, alpha };
        nu.validate()?;
        Ok(nu)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LevyMeasureSpec::TemperedStable { c, gamma, alpha } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(invalid(format!(
                        "tempered-stable intensity C must be > 0, got {c}"
                    )));
                }
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(invalid(format!("tempering rate must be > 0, got {gamma}")));
                }
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(invalid(format!(
                        "stability index must lie in (0, 2), got {alpha}"
                    )));
                }
            }
            LevyMeasureSpec::CompoundPoisson { rate, law } => {
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return Err(invalid(format!("jump rate must be >= 0, got {rate}")));
                }
                match law {
                    JumpLaw::Discrete(atoms) => {
                        if atoms.is_empty() {
                            return Err(invalid("discrete jump law needs at least one atom"));
                        }
                        let total: f64 = atoms.iter().map(|a| a.1).sum();
                        if atoms.iter().any(|a| a.1 < 0.0 || !a.0.is_finite())
                            || (total - 1.0).abs() > 1e-9
                        {
                            return Err(invalid("discrete jump law must be a probability vector"));
                        }
                    }
                    JumpLaw::Gaussian { sigma } => {
                        if !(*sigma > 0.0) {
                            return Err(invalid(format!("jump sigma must be > 0, got {sigma}")));
                        }
                    }
                }
            }
            LevyMeasureSpec::None => {}
        }
        Ok(())
    }

    /// Lebesgue density of the measure at `z != 0`, when it has one.
    pub fn density(&self, z: f64) -> Option<f64> {
        match self {
            LevyMeasureSpec::TemperedStable { c, gamma, alpha } => {
                let a = z.abs();
                Some(c * (-gamma * a).exp() / a.powf(1.0 + alpha))
            }
            LevyMeasureSpec::CompoundPoisson {
                rate,
                law: JumpLaw::Gaussian { sigma },
            } => {
                Some(rate * (-(z * z) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt()))
            }
            LevyMeasureSpec::CompoundPoisson { .. } => None,
            LevyMeasureSpec::None => Some(0.0),
        }
    }

    /// `∫ (z² ∧ 1) ν(dz)`.
    pub fn admissibility_integral(&self) -> Result<f64> {
        match self {
            LevyMeasureSpec::TemperedStable { .. } => {
                let inner = self.unit_ball_moment(2.0)?.value().unwrap_or(f64::INFINITY);
                Ok(inner + self.tail_mass()?)
            }
            LevyMeasureSpec::CompoundPoisson { rate, law } => {
                let e = match law {
                    JumpLaw::Discrete(atoms) => {
                        atoms.iter().map(|&(z, w)| w * (z * z).min(1.0)).sum()
                    }
                    JumpLaw::Gaussian { sigma } => {
                        let s = *sigma;
                        let q = Quadrature::default();
                        let phi =
                            |z: f64| (-(z * z) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
                        2.0 * (q.integrate(|z| z * z * phi(z), 0.0, 1.0)?.value
                            + q.integrate(phi, 1.0, 1.0 + 40.0 * s)?.value)
                    }
                };
                Ok(rate * e)
            }
            LevyMeasureSpec::None => Ok(0.0),
        }
    }

    /// `ν({|z| > 1})`.
    fn tail_mass(&self) -> Result<f64> {
        match *self {
            LevyMeasureSpec::TemperedStable { c, gamma, alpha } => {
                let q = Quadrature::default();
                let v = q.integrate(
                    |z: f64| (-gamma * z).exp() / z.powf(1.0 + alpha),
                    1.0,
                    ts_tail_cutoff(gamma),
                )?;
                Ok(2.0 * c * v.value)
            }
            _ => Err(invalid(
                "tail mass only needed for tempered-stable measures",
            )),
        }
    }

    /// `∫_R |z|^p ν(dz)` for `p >= 1`.
    pub fn absolute_moment(&self, p: f64) -> Result<Moment> {
        if !(p >= 1.0) {
            return Err(invalid(format!("moment order must be >= 1, got {p}")));
        }
        self.validate()?;
        Ok(match self {
            LevyMeasureSpec::TemperedStable { c, gamma: g, alpha } => {
                if p > *alpha {
                    Moment::Finite(2.0 * c * gamma(p - alpha) / g.powf(p - alpha))
                } else {
                    Moment::Divergent
                }
            }
            LevyMeasureSpec::CompoundPoisson { rate, law } => {
                let m = match law {
                    JumpLaw::Discrete(atoms) => {
                        atoms.iter().map(|&(z, w)| w * z.abs().powf(p)).sum()
                    }
                    JumpLaw::Gaussian { sigma } => {
                        sigma.powf(p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt()
                    }
                };
                Moment::Finite(rate * m)
            }
            LevyMeasureSpec::None => Moment::Finite(0.0),
        })
    }

    /// `∫_[-1,1] |z|^r ν(dz)` for `r > 0`.
    pub fn unit_ball_moment(&self, r: f64) -> Result<Moment> {
        self.unit_ball_integral(|z| z.powf(r), r)
    }

    /// `∫_[-1,1] z² |log|z|| ν(dz)`.
    pub fn unit_ball_log_moment(&self) -> Result<Moment> {
        // z² |log z| is dominated by z^(2-δ) near 0; the closed-form cell uses r = 2.
        self.unit_ball_integral(|z| if z > 0.0 { z * z * (-z.ln()) } else { 0.0 }, 2.0)
    }

    fn unit_ball_integral<F: Fn(f64) -> f64>(&self, h: F, leading_power: f64) -> Result<Moment> {
        self.validate()?;
        match *self {
            LevyMeasureSpec::TemperedStable { c, gamma, alpha } => {
                let power = leading_power - 1.0 - alpha;
                if power <= -1.0 {
                    return Ok(Moment::Divergent);
                }
                let q = Quadrature::default();
                let v = q.integrate_graded(
                    |z: f64| h(z) * (-gamma * z).exp() / z.powf(1.0 + alpha),
                    0.0,
                    1.0,
                    Some(power),
                )?;
                Ok(Moment::Finite(2.0 * c * v.value))
            }
            LevyMeasureSpec::CompoundPoisson { rate, ref law } => {
                let m = match law {
                    JumpLaw::Discrete(atoms) => atoms
                        .iter()
                        .filter(|a| a.0.abs() <= 1.0 && a.0 != 0.0)
                        .map(|&(z, w)| w * h(z.abs()))
                        .sum(),
                    JumpLaw::Gaussian { sigma } => {
                        let q = Quadrature::default();
                        let s = *sigma;
                        2.0 * q
                            .integrate(
                                |z| {
                                    h(z) * (-(z * z) / (2.0 * s * s)).exp()
                                        / (s * (2.0 * PI).sqrt())
                                },
                                0.0,
                                1.0,
                            )?
                            .value
                    }
                };
                Ok(Moment::Finite(rate * m))
            }
            LevyMeasureSpec::None => Ok(Moment::Finite(0.0)),
        }
    }

    /// `∫ (cos(xz) - 1) ν(dz)`, the real jump part of the exponent of a
    /// symmetric measure.
    pub fn jump_exponent(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        match *self {
            LevyMeasureSpec::TemperedStable { c, gamma, alpha } => {
                let q = Quadrature::default();
                let w = |z: f64| (-gamma * z).exp() / z.powf(1.0 + alpha);
                // cos(xz) - 1 = -2 sin²(xz/2) keeps full relative accuracy as z -> 0
                let osc = |z: f64| {
                    let s = (0.5 * x * z).sin();
                    -2.0 * s * s * w(z)
                };
                let near = q.integrate_graded(osc, 0.0, 1.0, Some(1.0 - alpha))?;
                let end = ts_tail_cutoff(gamma);
                let panel = (PI / x.abs()).min(1.0);
                let mut far = 0.0;
                let mut lo = 1.0;
                while lo < end {
                    let hi = (lo + panel).min(end);
                    far += q.integrate(osc, lo, hi)?.value;
                    lo = hi;
                }
                Ok(2.0 * c * (near.value + far))
            }
            LevyMeasureSpec::CompoundPoisson { rate, ref law } => Ok(match law {
                JumpLaw::Discrete(atoms) => {
                    rate * atoms
                        .iter()
                        .map(|&(z, w)| w * ((x * z).cos() - 1.0))
                        .sum::<f64>()
                }
                JumpLaw::Gaussian { sigma } => rate * ((-0.5 * x * x * sigma * sigma).exp() - 1.0),
            }),
            LevyMeasureSpec::None => Ok(0.0),
        }
    }

    /// A pure-jump driver has paths of bounded variation iff
    /// `∫_{|z|<=1} |z| ν(dz) < ∞`.
    pub fn has_finite_variation(&self) -> bool {
        match *self {
            LevyMeasureSpec::TemperedStable { alpha, .. } => alpha < 1.0,
            _ => true,
        }
    }
}

/// Lévy characteristic triplet `(a, b, ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharTriplet {
    pub a: f64,
    pub b: f64,
    pub nu: LevyMeasureSpec,
}

impl CharTriplet {
    pub fn new(a: f64, b: f64, nu: LevyMeasureSpec) -> Result<Self> {
        if !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!(
                "triplet needs finite drift and b >= 0, got a={a}, b={b}"
            )));
        }
        nu.validate()?;
        Ok(Self { a, b, nu })
    }

    pub fn brownian(b: f64) -> Self {
        Self {
            a: 0.0,
            b,
            nu: LevyMeasureSpec::None,
        }
    }

    pub fn pure_jump(nu: LevyMeasureSpec) -> Self {
        Self { a: 0.0, b: 0.0, nu }
    }

    pub fn has_finite_variation(&self) -> bool {
        self.b == 0.0 && self.nu.has_finite_variation()
    }

    /// Checks that every `f ∈ L_p([0,T])` is integrable against the driver:
    /// `p >= 2` when a Gaussian part is present, otherwise
    /// `∫_{|z|<=1} |z|^p ν(dz) < ∞`.
    pub fn admits_lp_integrands(&self, p: f64) -> Result<()> {
        if p < 1.0 {
            return Err(invalid(format!(
                "integrability exponent p must be >= 1, got {p}"
            )));
        }
        if self.b > 0.0 {
            if p < 2.0 {
                return Err(invalid(format!(
                    "a Gaussian component requires p >= 2, got p = {p}"
                )));
            }
            return Ok(());
        }
        match self.nu.unit_ball_moment(p)? {
            Moment::Finite(_) => Ok(()),
            Moment::Divergent => Err(Error::Divergent(format!("∫_{{|z|<=1}} |z|^{p} ν(dz) = ∞"))),
        }
    }
}

/// `ψ(x)` with `E exp(i x L(t)) = exp(t ψ(x))`.
pub fn characteristic_exponent(triplet: &CharTriplet, x: f64) -> Result<Complex64> {
    let jump = triplet.nu.jump_exponent(x)?;
    Ok(Complex64::new(
        -0.5 * x * x * triplet.b + jump,
        triplet.a * x,
    ))
}

/// Uniform time grid `t_k = k T / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    horizon: f64,
    steps: usize,
}

impl PathGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("grid horizon must be > 0, got {horizon}")));
        }
        if steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.node(k))
    }

    /// Index of the node equal to `t` (within rounding), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        if k < 0.0 || k > self.steps as f64 || (x - k).abs() > 1e-9 {
            return None;
        }
        Some(k as usize)
    }
}

/// Sampled increments `ΔL_k = L(t_{k+1}) - L(t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyPath {
    pub grid: PathGrid,
    pub increments: Vec<f64>,
    pub seed: Option<SeedRecord>,
}

impl LevyPath {
    pub fn new(grid: PathGrid, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.steps() {
            return Err(Error::GridMismatch(format!(
                "{} increments on a grid of {} steps",
                increments.len(),
                grid.steps()
            )));
        }
        Ok(Self {
            grid,
            increments,
            seed: None,
        })
    }

    /// `L(t_k)` for `k = 0..=n`, with `L(0) = 0`.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for d in &self.increments {
            acc += d;
            out.push(acc);
        }
        out
    }

    pub fn terminal(&self) -> f64 {
        self.increments.iter().sum()
    }

    /// CSV with header `t,increment,cumsum`; `t` is the right end of the step.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed={} stream={}", seed.root, seed.stream);
        }
        s.push_str("t,increment,cumsum\n");
        let mut acc = 0.0;
        for (k, d) in self.increments.iter().enumerate() {
            acc += d;
            let _ = writeln!(s, "{},{},{}", self.grid.node(k + 1), d, acc);
        }
        s
    }
}

/// A triplet together with the series truncation used to sample it.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyDriver {
    pub triplet: CharTriplet,
    pub n_terms: usize,
}

pub const DEFAULT_SERIES_TERMS: usize = 10_000;

impl LevyDriver {
    pub fn new(triplet: CharTriplet, n_terms: usize) -> Result<Self> {
        if n_terms < 1 {
            return Err(invalid("series truncation needs at least one term"));
        }
        triplet.nu.validate()?;
        Ok(Self { triplet, n_terms })
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, grid: PathGrid, rng: &mut R) -> LevyPath {
        let n = grid.steps();
        let dt = grid.dt();
        let t_end = grid.horizon();
        let CharTriplet { a, b, ref nu } = self.triplet;
        let mut inc = vec![a * dt; n];
        if b > 0.0 {
            let sd = (b * dt).sqrt();
            for d in inc.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *d += sd * z;
            }
        }
        let cell = |u: f64| ((u * n as f64) as usize).min(n - 1);
        match *nu {
            LevyMeasureSpec::TemperedStable { c, gamma, alpha } => {
                let scale = alpha / (2.0 * c * t_end);
                let mut arrival = 0.0;
                for _ in 0..self.n_terms {
                    let e: f64 = Exp1.sample(rng);
                    arrival += e;
                    let r = (scale * arrival).powf(-1.0 / alpha);
                    let keep: f64 = rng.random();
                    let negative: bool = rng.random();
                    let u: f64 = rng.random();
                    if keep < (-gamma * r).exp() {
                        inc[cell(u)] += if negative { -r } else { r };
                    }
                }
            }
            LevyMeasureSpec::CompoundPoisson { rate, ref law } => {
                if rate > 0.0 {
                    let count = Poisson::new(rate * t_end)
                        .map(|d| d.sample(rng))
                        .unwrap_or(0.0) as usize;
                    for _ in 0..count {
                        let u: f64 = rng.random();
                        let size = match law {
                            JumpLaw::Discrete(atoms) => {
                                let mut pick: f64 = rng.random();
                                let mut z = atoms[atoms.len() - 1].0;
                                for &(m, w) in atoms {
                                    if pick < w {
                                        z = m;
                                        break;
                                    }
                                    pick -= w;
                                }
                                let negative: bool = rng.random();
                                if negative {
                                    -z
                                } else {
                                    z
                                }
                            }
                            JumpLaw::Gaussian { sigma } => {
                                let z: f64 = StandardNormal.sample(rng);
                                sigma * z
                            }
                        };
                        inc[cell(u)] += size;
                    }
                }
            }
            LevyMeasureSpec::None => {}
        }
        LevyPath {
            grid,
            increments: inc,
            seed: None,
        }
    }

    /// Samples replication `replication` of the driver stream under `root`.
    pub fn sample_seeded(&self, grid: PathGrid, root: u64, replication: u64) -> LevyPath {
        let record = SeedRecord::new(root, replication, Purpose::Driver);
        let mut path = self.sample_path(grid, &mut record.rng());
        path.seed = Some(record);
        path
    }
}

/// Empirical characteristic function with standard errors of its real and
/// imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalCf {
    pub value: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

pub fn empirical_cf(samples: &[f64], x: f64) -> Result<EmpiricalCf> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = samples.len() as f64;
    let (mut sc, mut ss, mut sc2, mut ss2) = (0.0, 0.0, 0.0, 0.0);
    for &v in samples {
        let (s, c) = (x * v).sin_cos();
        sc += c;
        ss += s;
        sc2 += c * c;
        ss2 += s * s;
    }
    let (mc, ms) = (sc / n, ss / n);
    let se = |m2: f64, m: f64| {
        if samples.len() < 2 {
            0.0
        } else {
            ((m2 / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt()
        }
    };
    Ok(EmpiricalCf {
        value: Complex64::new(mc, ms),
        se_re: se(sc2, mc),
        se_im: se(ss2, ms),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn ts() -> LevyMeasureSpec {
        LevyMeasureSpec::tempered_stable(1.0, 10.0, 0.5).unwrap()
    }

    /// Composite Simpson after z = w² (removes the z^(-1/2)-type endpoint
    /// behaviour); independent of the adaptive integrator.
    fn simpson_sqrt_sub<F: Fn(f64) -> f64>(f: F, zmax: f64, n: usize) -> f64 {
        let wmax = zmax.sqrt();
        let h = wmax / n as f64;
        let g = |w: f64| if w == 0.0 { 0.0 } else { f(w * w) * 2.0 * w };
        let mut s = g(0.0) + g(wmax);
        for i in 1..n {
            s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn tempered_stable_moment_closed_form() {
        let m = ts().absolute_moment(9.0 / 8.0).unwrap().value().unwrap();
        let expected = 2.0 * gamma(5.0 / 8.0) / 10f64.powf(5.0 / 8.0);
        assert!((m - expected).abs() < 1e-14);
        assert_eq!(
            LevyMeasureSpec::tempered_stable(1.0, 1.0, 1.5)
                .unwrap()
                .absolute_moment(1.2)
                .unwrap(),
            Moment::Divergent
        );
    }

    #[test]
    fn tempered_stable_second_moment_matches_simpson() {
        let m = ts().absolute_moment(2.0).unwrap().value().unwrap();
        // 2 ∫ z² e^{-10z} z^{-3/2} dz
        let oracle = 2.0 * simpson_sqrt_sub(|z| z.sqrt() * (-10.0 * z).exp(), 8.0, 200_000);
        assert!((m / oracle - 1.0).abs() < 1e-6, "{m} vs {oracle}");
    }

    #[test]
    fn empty_compound_poisson_has_zero_moment() {
        let nu = LevyMeasureSpec::CompoundPoisson {
            rate: 0.0,
            law: JumpLaw::Gaussian { sigma: 1.0 },
        };
        assert_eq!(nu.absolute_moment(2.0).unwrap(), Moment::Finite(0.0));
    }

    #[test]
    fn moment_order_below_one_is_rejected() {
        assert!(ts().absolute_moment(0.5).is_err());
    }

    #[test]
    fn exponent_trivial_values() {
        let t = CharTriplet::pure_jump(ts());
        assert_eq!(
            characteristic_exponent(&t, 0.0).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        let g = CharTriplet::brownian(1.0);
        assert_eq!(
            characteristic_exponent(&g, 2.0).unwrap(),
            Complex64::new(-2.0, 0.0)
        );
    }

    #[test]
    fn tempered_stable_exponent_matches_oracles() {
        let t = CharTriplet::pure_jump(ts());
        for &x in &[0.5, 1.0, 2.0, 7.0] {
            let psi = characteristic_exponent(&t, x).unwrap();
            // analytic Lévy–Khintchine transform of the tempered-stable measure
            let a: f64 = 0.5;
            let closed = 2.0
                * gamma(-a)
                * ((100.0 + x * x).powf(a / 2.0) * (a * (x / 10.0).atan()).cos() - 10f64.powf(a));
            assert!(
                (psi.re - closed).abs() < 1e-8,
                "x={x}: {} vs {closed}",
                psi.re
            );
            assert_eq!(psi.im, 0.0);
        }
        let brute = 2.0
            * simpson_sqrt_sub(
                |z| (z.cos() - 1.0) * (-10.0 * z).exp() / z.powf(1.5),
                6.0,
                400_000,
            );
        let psi = characteristic_exponent(&t, 1.0).unwrap().re;
        assert!((psi - brute).abs() < 1e-7, "{psi} vs {brute}");
    }

    #[test]
    fn exponent_is_linear_in_intensity() {
        let t1 = CharTriplet::new(
            0.3,
            0.5,
            LevyMeasureSpec::tempered_stable(1.0, 2.0, 1.2).unwrap(),
        )
        .unwrap();
        let t2 = CharTriplet::new(
            0.3,
            0.5,
            LevyMeasureSpec::tempered_stable(2.0, 2.0, 1.2).unwrap(),
        )
        .unwrap();
        for &x in &[0.1, 0.7, 1.5, 3.0, 10.0] {
            let j1 = characteristic_exponent(&t1, x).unwrap().re + 0.25 * x * x;
            let j2 = characteristic_exponent(&t2, x).unwrap().re + 0.25 * x * x;
            assert!((j2 / j1 - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn compound_poisson_exponent() {
        let nu = LevyMeasureSpec::CompoundPoisson {
            rate: 2.0,
            law: JumpLaw::Discrete(vec![(0.5, 1.0)]),
        };
        let psi = nu.jump_exponent(2.0).unwrap();
        assert!((psi - 2.0 * (1f64.cos() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn unit_ball_moment_matches_incomplete_gamma() {
        use statrs::function::gamma::gamma_li;
        let m = ts().unit_ball_moment(4.0 / 3.0).unwrap().value().unwrap();
        let s = 4.0 / 3.0 - 0.5;
        let expected = 2.0 * gamma_li(s, 10.0) / 10f64.powf(s);
        assert!((m / expected - 1.0).abs() < 1e-8, "{m} vs {expected}");
        assert_eq!(ts().unit_ball_moment(0.5).unwrap(), Moment::Divergent);
    }

    #[test]
    fn admissibility_is_finite() {
        let v = ts().admissibility_integral().unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn lp_integrability_regimes() {
        assert!(CharTriplet::brownian(1.0)
            .admits_lp_integrands(1.5)
            .is_err());
        assert!(CharTriplet::brownian(1.0).admits_lp_integrands(2.0).is_ok());
        assert!(CharTriplet::pure_jump(ts())
            .admits_lp_integrands(9.0 / 8.0)
            .is_ok());
        let heavy = LevyMeasureSpec::tempered_stable(1.0, 1.0, 1.5).unwrap();
        assert!(CharTriplet::pure_jump(heavy)
            .admits_lp_integrands(1.2)
            .is_err());
    }

    #[test]
    fn zero_driver_has_zero_increments() {
        let d = LevyDriver::new(
            CharTriplet::new(0.0, 0.0, LevyMeasureSpec::None).unwrap(),
            10,
        )
        .unwrap();
        let p = d.sample_seeded(PathGrid::new(1.0, 16).unwrap(), 1, 0);
        assert!(p.increments.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_increments_have_step_variance() {
        let d = LevyDriver::new(CharTriplet::brownian(1.0), 1).unwrap();
        let grid = PathGrid::new(1.0, 4).unwrap();
        let mut xs = Vec::new();
        for r in 0..10_000 {
            xs.extend(d.sample_seeded(grid, 11, r).increments);
        }
        let n = xs.len() as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n;
        // SE of the sample variance of N(0, 1/4): sqrt(2) / 4 / sqrt(n)
        let se = 2f64.sqrt() * 0.25 / n.sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn identical_seeds_give_identical_paths() {
        let d = LevyDriver::new(CharTriplet::pure_jump(ts()), 500).unwrap();
        let grid = PathGrid::new(1.0, 64).unwrap();
        assert_eq!(d.sample_seeded(grid, 5, 2), d.sample_seeded(grid, 5, 2));
        assert_ne!(
            d.sample_seeded(grid, 5, 2).increments,
            d.sample_seeded(grid, 5, 3).increments
        );
    }

    #[test]
    fn empirical_cf_trivial_cases() {
        let cf = empirical_cf(&[0.0, 0.0, 0.0], 5.0).unwrap();
        assert_eq!(cf.value, Complex64::new(1.0, 0.0));
        let cf = empirical_cf(&[1.0, -1.0], PI).unwrap();
        assert!((cf.value.re + 1.0).abs() < 1e-15 && cf.value.im.abs() < 1e-15);
        assert!(matches!(empirical_cf(&[], 1.0), Err(Error::EmptySample)));
    }

    #[test]
    fn empirical_cf_of_standard_normal() {
        let mut rng = stream(3, 0, Purpose::Auxiliary);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let cf = empirical_cf(&xs, 1.0).unwrap();
        assert!((cf.value.re - (-0.5f64).exp()).abs() < 3.0 * cf.se_re);
        assert!(cf.value.im.abs() < 3.0 * cf.se_im);
    }

    #[test]
    fn compound_poisson_jump_lands_in_its_cell() {
        let nu = LevyMeasureSpec::CompoundPoisson {
            rate: 3.0,
            law: JumpLaw::Discrete(vec![(1.0, 1.0)]),
        };
        let d = LevyDriver::new(CharTriplet::pure_jump(nu), 1).unwrap();
        let p = d.sample_seeded(PathGrid::new(2.0, 50).unwrap(), 9, 0);
        assert!(p.increments.iter().all(|x| x.fract() == 0.0));
    }

    #[test]
    fn csv_layout() {
        let mut p = LevyPath::new(PathGrid::new(1.0, 2).unwrap(), vec![0.5, -0.25]).unwrap();
        p.seed = Some(SeedRecord::new(4, 1, Purpose::Driver));
        assert_eq!(
            p.to_csv(),
            "# seed=4 stream=16\nt,increment,cumsum\n0.5,0.5,0.5\n1,-0.25,0.25\n"
        );
    }
}
