//! Generalized Lebesgue–Stieltjes integrals `∫_0^T X dY` built from
//! fractional derivatives, the left-point Itô–Euler sum, and the
//! `ε -> 0` convergence experiment for `∫ X dY^ε`.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::conditions::{check_cp_gamma, check_dp_gamma, ConditionReport, FracParams};
use crate::error::{invalid, Error, Result};
use crate::fracderiv::{
    bm_moment_reference, bridge_variance, left_frac_deriv_nodes, right_frac_deriv_nodes,
    CompensatedFunction, SampledFunction, WeylTables,
};
use crate::kernels::GammaKernel;
use crate::levy::{LevyDriver, PathGrid};
use crate::rng::{Purpose, SeedRecord};
use crate::volterra::{McEstimate, VolterraWeights};

/// Refinement record of a GLS evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureDiag {
    /// Combined magnitude of the two endpoint cells, estimated from the
    /// local power behaviour of the integrand.
    pub endpoint_cells: f64,
    /// `|value - value on the half grid|`, NaN when the step count is odd.
    pub coarse_gap: f64,
    /// An endpoint cell fell back to a one-point rule because no power law
    /// could be fitted.
    pub endpoint_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResult {
    pub value: f64,
    pub alpha_used: f64,
    pub correction_term: f64,
    pub diag: QuadratureDiag,
}

/// How the integrand is read between grid nodes. The integrator is always
/// the linear interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrandShape {
    #[default]
    Linear,
    /// `X(s) = X(t_k)` on `(t_k, t_{k+1}]`: the adapted càglàd reading that
    /// the Itô–Euler sum uses.
    LeftStep,
}

/// `∫_0^T (D^α_{0+} X_{0+})(s) (D^{1-α}_{T-} Y_{T-})(s) ds + X(0+)(Y(T-) - Y(0))`.
pub fn gls_integral(
    x: &SampledFunction,
    y: &SampledFunction,
    y_left_limit: f64,
    alpha: f64,
) -> Result<IntegralResult> {
    gls_integral_shaped(x, y, y_left_limit, alpha, IntegrandShape::Linear)
}

pub fn gls_integral_shaped(
    x: &SampledFunction,
    y: &SampledFunction,
    y_left_limit: f64,
    alpha: f64,
    shape: IntegrandShape,
) -> Result<IntegralResult> {
    let (value, correction, endpoint_cells, endpoint_fallback) =
        gls_parts(x, y, y_left_limit, alpha, shape)?;
    let coarse_gap = match (x.coarsened(), y.coarsened()) {
        (Some(xc), Some(yc)) if xc.grid().steps() >= 4 => {
            (gls_parts(&xc, &yc, y_left_limit, alpha, shape)?.0 - value).abs()
        }
        _ => f64::NAN,
    };
    Ok(IntegralResult {
        value,
        alpha_used: alpha,
        correction_term: correction,
        diag: QuadratureDiag {
            endpoint_cells,
            coarse_gap,
            endpoint_fallback,
        },
    })
}

/// [`gls_integral`] with the `(p, q)` pair checked for conjugacy.
pub fn gls_integral_checked(
    x: &SampledFunction,
    y: &SampledFunction,
    y_left_limit: f64,
    params: &FracParams,
) -> Result<IntegralResult> {
    let conj = 1.0 / params.p
        + if params.q.is_infinite() {
            0.0
        } else {
            1.0 / params.q
        };
    if (conj - 1.0).abs() > 1e-12 {
        return Err(invalid(format!(
            "p = {} and q = {} are not conjugate",
            params.p, params.q
        )));
    }
    gls_integral(x, y, y_left_limit, params.alpha)
}

fn gls_parts(
    x: &SampledFunction,
    y: &SampledFunction,
    y_left_limit: f64,
    alpha: f64,
    shape: IntegrandShape,
) -> Result<(f64, f64, f64, bool)> {
    if x.grid() != y.grid() {
        return Err(Error::GridMismatch(
            "integrand and integrator live on different grids".into(),
        ));
    }
    let n = x.grid().steps();
    if n < 4 {
        return Err(invalid("the GLS integral needs at least 4 steps"));
    }
    let h = x.grid().dt();
    let correction = x.values()[0] * (y_left_limit - y.values()[0]);
    let xc = CompensatedFunction::left(x.clone()).sampled();
    if xc.values().iter().all(|v| *v == 0.0) {
        return Ok((correction, correction, 0.0, false));
    }
    let dx = match shape {
        IntegrandShape::Linear => left_frac_deriv_nodes(&xc, alpha)?,
        IntegrandShape::LeftStep => step_frac_deriv_nodes(xc.values(), alpha, h)?,
    };
    let dy = right_frac_deriv_nodes(y, alpha, n, y_left_limit)?;
    let f: Vec<f64> = (0..=n)
        .map(|i| {
            if i == 0 || i == n {
                f64::NAN
            } else {
                dx[i] * dy[i]
            }
        })
        .collect();
    if let Some(i) = f[1..n].iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergent(format!(
            "fractional derivative product is not finite at node {}",
            i + 1
        )));
    }
    let trapezoid = h * (0.5 * (f[1] + f[n - 1]) + f[2..n - 1].iter().sum::<f64>());
    let interior = trapezoid
        - kink_correction(
            xc.values(),
            y.values(),
            y_left_limit,
            &dx,
            &dy,
            alpha,
            h,
            shape,
        );
    let (left, lf) = endpoint_cell(f[1], f[2], h);
    let (right, rf) = endpoint_cell(f[n - 1], f[n - 2], h);
    let value = interior + left + right + correction;
    Ok((value, correction, left.abs() + right.abs(), lf || rf))
}

/// Trapezoid error from the node singularities of the two derivatives. On
/// piecewise-linear data `D^α X` carries `(s - t_k)_+^{1-α}` terms with weight
/// `Δa_k / Γ(2-α)`, on left-step data `(s - t_k)_+^{-α}` terms with weight
/// `Δx_k / Γ(1-α)`, and `D^{1-α} Y` carries `(t_j - s)_+^α` terms with weight
/// `-Δb_j / Γ(1+α)` (`a`, `b` the cell slopes). A one-sided power `d^γ` times
/// a smooth factor `G`, with the singular node left out of the sum, biases
/// the trapezoid rule by `ζ(-γ) G(node) h^{1+γ}`.
#[allow(clippy::too_many_arguments)]
fn kink_correction(
    x: &[f64],
    y: &[f64],
    y_left_limit: f64,
    dx: &[f64],
    dy: &[f64],
    alpha: f64,
    h: f64,
    shape: IntegrandShape,
) -> f64 {
    let n = x.len() - 1;
    let yv = |k: usize| if k == n { y_left_limit } else { y[k] };
    let a = |k: usize| (x[k + 1] - x[k]) / h;
    let b = |k: usize| (yv(k + 1) - yv(k)) / h;
    let (mut kx, mut ky) = (0.0, 0.0);
    for k in 1..n {
        kx += match shape {
            IntegrandShape::Linear => a(k) - a(k - 1),
            IntegrandShape::LeftStep => x[k] - x[k - 1],
        } * dy[k];
        ky += (b(k - 1) - b(k)) * dx[k];
    }
    let x_part = match shape {
        IntegrandShape::Linear => zeta(alpha - 1.0) * h.powf(2.0 - alpha) / gamma(2.0 - alpha),
        IntegrandShape::LeftStep => zeta(alpha) * h.powf(1.0 - alpha) / gamma(1.0 - alpha),
    };
    x_part * kx + zeta(-alpha) * h.powf(1.0 + alpha) * ky / gamma(1.0 + alpha)
}

/// `D^α_{0+}` at the nodes of the compensated step function equal to `x[k]`
/// on `(t_k, t_{k+1}]`. The jump at `t_i` itself is left out of node `i`.
fn step_frac_deriv_nodes(x: &[f64], alpha: f64, h: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )));
    }
    let n = x.len() - 1;
    let pw: Vec<f64> = (0..=n).map(|m| (m as f64 * h).powf(-alpha)).collect();
    let jumps: Vec<f64> = (0..n)
        .map(|k| if k == 0 { 0.0 } else { x[k] - x[k - 1] })
        .collect();
    let c = 1.0 / gamma(1.0 - alpha);
    Ok((0..=n)
        .into_par_iter()
        .map(|i| c * (1..i.min(n)).map(|k| jumps[k] * pw[i - k]).sum::<f64>())
        .collect())
}

/// Riemann `ζ(s)`, `s != 1`, by Euler–Maclaurin summation.
pub(crate) fn zeta(s: f64) -> f64 {
    const N: usize = 16;
    // B_2, B_4, ..., B_12
    const BERNOULLI: [f64; 6] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
    ];
    let nf = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // (s)_{2j-1} N^{-s-2j+1} / (2j)!
    let mut rising = s;
    let mut fact = 2.0;
    let mut pow = nf.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        sum += b / fact * rising * pow;
        let m = 2.0 * j as f64 + 1.0;
        rising *= (s + m) * (s + m + 1.0);
        fact *= (m + 2.0) * (m + 3.0);
        pow /= nf * nf;
    }
    sum
}

/// `∫` over the cell of width `h` next to a singular endpoint, given the
/// integrand at distance `h` and `2h`: with `F ~ d^κ`, `κ = log2(F(2h)/F(h))`,
/// the cell holds `F(h) h / (1 + κ)`.
fn endpoint_cell(near: f64, far: f64, h: f64) -> (f64, bool) {
    if near == 0.0 {
        return (0.0, false);
    }
    let ratio = far / near;
    if ratio > 0.0 {
        let kappa = ratio.log2();
        if kappa > -1.0 + 1e-3 {
            return (near * h / (1.0 + kappa), false);
        }
    }
    (near * h, true)
}

/// `t_k -> ∫_0^{t_k} X dY` at every `stride`-th node from `4 stride` on,
/// each value a GLS integral over the truncated paths with the step
/// left limit `Y(t_k-) = Y(t_{k-1})`.
pub fn running_gls(
    x: &SampledFunction,
    y: &SampledFunction,
    alpha: f64,
    shape: IntegrandShape,
    stride: usize,
) -> Result<Vec<(f64, f64)>> {
    if stride == 0 {
        return Err(invalid("stride must be >= 1"));
    }
    let n = x.grid().steps();
    (1..=n / stride)
        .map(|m| m * stride)
        .filter(|k| *k >= 4.max(4 * stride))
        .map(|k| {
            let (xt, yt) = (x.truncated(k)?, y.truncated(k)?);
            let v = gls_integral_shaped(&xt, &yt, y.values()[k - 1], alpha, shape)?.value;
            Ok((x.grid().node(k), v))
        })
        .collect()
}

/// `Σ_k X(t_k)(Y(t_{k+1}) - Y(t_k))`.
pub fn ito_euler_integral(x: &SampledFunction, y: &SampledFunction) -> Result<f64> {
    if x.grid() != y.grid() {
        return Err(Error::GridMismatch(
            "integrand and integrator live on different grids".into(),
        ));
    }
    let (xv, yv) = (x.values(), y.values());
    Ok((0..x.grid().steps())
        .map(|k| xv[k] * (yv[k + 1] - yv[k]))
        .sum())
}

/// Deterministic or Brownian integrands `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    Zero,
    Constant(f64),
    /// `X(t) = t`
    Linear,
    /// Standard Brownian motion, independent of the driver.
    Brownian,
}

impl Integrand {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero" | "0" => Ok(Self::Zero),
            "t" | "linear" => Ok(Self::Linear),
            "B" | "brownian" => Ok(Self::Brownian),
            other => other
                .strip_prefix("const:")
                .and_then(|c| c.parse().ok())
                .map(Self::Constant)
                .ok_or_else(|| Error::Config(format!("unknown integrand '{other}'"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Constant(c) => format!("const:{c}"),
            Self::Linear => "t".into(),
            Self::Brownian => "B".into(),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, Self::Brownian)
    }

    /// Sample on `grid`; Brownian paths use the integrand stream of
    /// replication `rep`.
    pub fn sample(&self, grid: PathGrid, seed: u64, rep: u64) -> SampledFunction {
        let values = match *self {
            Self::Zero => vec![0.0; grid.steps() + 1],
            Self::Constant(c) => vec![c; grid.steps() + 1],
            Self::Linear => grid.nodes().collect(),
            Self::Brownian => {
                let mut rng = SeedRecord::new(seed, rep, Purpose::Integrand).rng();
                let sd = grid.dt().sqrt();
                let mut b = 0.0;
                std::iter::once(0.0)
                    .chain((0..grid.steps()).map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        b += sd * z;
                        b
                    }))
                    .collect()
            }
        };
        SampledFunction::new(grid, values).expect("finite samples on a matching grid")
    }
}

/// Settings of the `ε -> 0` integral experiment.
#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub kernel: GammaKernel,
    pub driver: LevyDriver,
    pub frac: FracParams,
    pub grid: PathGrid,
    pub reps: usize,
    pub eps_grid: Vec<f64>,
    pub seed: u64,
    pub integrand: Integrand,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub mc: McEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub rows: Vec<ConvergenceRow>,
    /// `|∫XdY^ε - ∫XdY|` per replication (outer) and ε (inner).
    pub per_rep: Vec<Vec<f64>>,
}

impl ConvergenceResult {
    /// Mean and standard error of the paired drop `|Δ_i| - |Δ_j|`.
    pub fn paired_drop(&self, i: usize, j: usize) -> Result<McEstimate> {
        let d: Vec<f64> = self.per_rep.iter().map(|r| r[i] - r[j]).collect();
        McEstimate::from_samples(&d)
    }

    /// CSV `epsilon,mean_abs_diff,std_error,reps`.
    pub fn to_csv(&self, metadata: &str) -> String {
        let mut s = format!("# {metadata}\nepsilon,mean_abs_diff,std_error,reps\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.epsilon, r.mc.estimate, r.mc.std_error, r.mc.n_paths
            );
        }
        s
    }
}

/// `(D_p)` and `(C_p)` for the configured Gamma kernel; `(C_p)` has a closed
/// form only for `λ = 0`.
pub fn experiment_conditions(
    kernel: &GammaKernel,
    frac: &FracParams,
) -> Result<Vec<ConditionReport>> {
    let mut out = vec![check_dp_gamma(kernel.beta(), kernel.lambda(), frac)?];
    if kernel.lambda() == 0.0 {
        out.push(check_cp_gamma(kernel.beta(), frac)?);
    }
    Ok(out)
}

/// `E|∫X dY^ε - ∫X dY|` over an ε-grid with common random numbers: each
/// replication shares one driver path (and one integrand path) across ε.
pub fn integral_convergence_experiment(cfg: &ConvergenceConfig) -> Result<ConvergenceResult> {
    if cfg.eps_grid.is_empty() {
        return Err(invalid("epsilon grid is empty"));
    }
    if cfg.reps == 0 {
        return Err(Error::EmptySample);
    }
    for r in experiment_conditions(&cfg.kernel, &cfg.frac)? {
        let failed: Vec<String> = r
            .failed_clauses()
            .iter()
            .map(|c| format!("{} ({})", c.id, c.inequality))
            .collect();
        if !failed.is_empty() {
            return Err(Error::ConditionFailed(failed.join(", ")));
        }
    }
    let grid = cfg.grid;
    let n = grid.steps();
    let base = VolterraWeights::new(&cfg.kernel, grid)?;
    let perturbed = cfg
        .eps_grid
        .iter()
        .map(|&e| VolterraWeights::new(&cfg.kernel.perturbed(e)?, grid))
        .collect::<Result<Vec<_>>>()?;
    let alpha = cfg.frac.alpha;
    let fixed_dx = if cfg.integrand.is_random() {
        None
    } else {
        Some(integrand_parts(
            &cfg.integrand.sample(grid, cfg.seed, 0),
            alpha,
        )?)
    };
    let per_rep = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let owned;
            let xp = match &fixed_dx {
                Some(p) => p,
                None => {
                    owned = integrand_parts(&cfg.integrand.sample(grid, cfg.seed, rep), alpha)?;
                    &owned
                }
            };
            let l = cfg.driver.sample_seeded(grid, cfg.seed, rep);
            let reference = xp.integrate(&base.apply(&l)?.values, alpha, n)?;
            perturbed
                .iter()
                .map(|w| Ok((xp.integrate(&w.apply(&l)?.values, alpha, n)? - reference).abs()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let rows = cfg
        .eps_grid
        .iter()
        .enumerate()
        .map(|(i, &epsilon)| {
            let xs: Vec<f64> = per_rep.iter().map(|r| r[i]).collect();
            Ok(ConvergenceRow {
                epsilon,
                mc: McEstimate::from_samples(&xs)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceResult { rows, per_rep })
}

/// Integrand data reused across integrators.
struct IntegrandParts {
    x: SampledFunction,
}

impl IntegrandParts {
    fn integrate(&self, y_values: &[f64], alpha: f64, n: usize) -> Result<f64> {
        let y = SampledFunction::new(self.x.grid(), y_values.to_vec())?;
        Ok(gls_parts(&self.x, &y, y_values[n - 1], alpha, IntegrandShape::Linear)?.0)
    }
}

fn integrand_parts(x: &SampledFunction, _alpha: f64) -> Result<IntegrandParts> {
    Ok(IntegrandParts { x: x.clone() })
}

/// `∫_0^T E|D^α_{0+} X(s)|^q ds`, closed form or Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipReport {
    pub estimate: f64,
    pub std_error: f64,
    pub reference: f64,
    pub member: bool,
}

/// `E|Z|^q / (E Z²)^{q/2}` for centred Gaussian `Z`.
pub fn gaussian_abs_moment_factor(q: f64) -> f64 {
    2f64.powf(q / 2.0) * gamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

pub fn membership_check_x(
    integrand: Integrand,
    params: &FracParams,
    grid: PathGrid,
    n_paths: usize,
    seed: u64,
) -> Result<MembershipReport> {
    let (alpha, q, big_t) = (params.alpha, params.q, params.horizon);
    if !q.is_finite() {
        return Err(invalid("membership check needs finite q"));
    }
    match integrand {
        Integrand::Zero => Ok(MembershipReport {
            estimate: 0.0,
            std_error: 0.0,
            reference: 0.0,
            member: true,
        }),
        Integrand::Constant(_) => {
            // compensated constant vanishes
            Ok(MembershipReport {
                estimate: 0.0,
                std_error: 0.0,
                reference: 0.0,
                member: true,
            })
        }
        Integrand::Linear => {
            let e = q * (1.0 - alpha) + 1.0;
            let v = big_t.powf(e) / e / gamma(2.0 - alpha).powf(q);
            Ok(MembershipReport {
                estimate: v,
                std_error: 0.0,
                reference: v,
                member: v.is_finite(),
            })
        }
        Integrand::Brownian => {
            if alpha >= 0.5 {
                return Err(invalid(format!(
                    "the Brownian reference needs alpha < 1/2, got {alpha}"
                )));
            }
            if grid.horizon() != big_t {
                return Err(Error::GridMismatch("grid horizon differs from T".into()));
            }
            let (c_ref, _) = bm_moment_reference(alpha, 1.0);
            let e = q * (1.0 - 2.0 * alpha) / 2.0 + 1.0;
            let reference = gaussian_abs_moment_factor(q) * c_ref.powf(q / 2.0) * big_t.powf(e) / e;
            let tables = WeylTables::new(alpha, grid)?;
            let n = grid.steps();
            let bridge: Vec<f64> = (0..=n)
                .map(|i| {
                    if i == 0 {
                        Ok(0.0)
                    } else {
                        bridge_variance(alpha, grid.dt(), i).map(f64::sqrt)
                    }
                })
                .collect::<Result<_>>()?;
            let samples: Vec<f64> = (0..n_paths as u64)
                .into_par_iter()
                .map(|rep| {
                    // Riemann sum over s with a uniformly drawn right-end node
                    let mut aux = SeedRecord::new(seed, rep, Purpose::Auxiliary).rng();
                    let u: f64 = rand::Rng::random(&mut aux);
                    let i = ((u * n as f64) as usize).min(n - 1) + 1;
                    let x = Integrand::Brownian.sample(grid, seed, rep);
                    let z: f64 = StandardNormal.sample(&mut aux);
                    let d = tables.left_at(&x, i) + bridge[i] * z;
                    big_t * d.abs().powf(q)
                })
                .collect();
            let mc = McEstimate::from_samples(&samples)?;
            Ok(MembershipReport {
                estimate: mc.estimate,
                std_error: mc.std_error,
                reference,
                member: mc.estimate.is_finite(),
            })
        }
    }
}
