//! Sampled Volterra paths `Y(t) = ∫_0^t g(t - s) dL(s)`, their left limits,
//! and Monte Carlo `L_p(Ω)` distances between two kernels.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::kernels::{kernel_quadrature, GammaKernel, Kernel};
use crate::levy::{CharTriplet, LevyDriver, LevyPath, PathGrid};
use crate::rng::SeedRecord;

/// Convolution weights `w_m = (1/Δt) ∫_{(m-1)Δt}^{mΔt} g(u) du`, `m = 1..=n`.
///
/// `Y(t_k) = Σ_{j<k} w_{k-j} ΔL_j`. Averaging every cell (not only the one at
/// the singularity) keeps the weights of `g` and of `g(· + ε)` consistent as
/// `ε -> 0`, and makes `Σ_m Δt w_m²` the exact Gaussian variance of the
/// scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraWeights {
    grid: PathGrid,
    weights: Vec<f64>,
    kernel: String,
}

impl VolterraWeights {
    pub fn new<K: Kernel + ?Sized>(k: &K, grid: PathGrid) -> Result<Self> {
        let h = grid.dt();
        let q = kernel_quadrature();
        let hint = k.power_at_zero();
        if hint.is_some_and(|b| b <= -1.0) {
            return Err(invalid(format!(
                "kernel {} is not integrable at 0",
                k.describe()
            )));
        }
        let mut weights = Vec::with_capacity(grid.steps());
        weights.push(q.integrate_graded(|u| k.eval(u), 0.0, h, hint)?.value / h);
        for m in 2..=grid.steps() {
            let (a, b) = ((m - 1) as f64 * h, m as f64 * h);
            weights.push(q.integrate(|u| k.eval(u), a, b)?.value / h);
        }
        if let Some(bad) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Unstable(format!(
                "weight {} of {} is not finite",
                bad + 1,
                k.describe()
            )));
        }
        Ok(Self {
            grid,
            weights,
            kernel: k.describe(),
        })
    }

    pub fn grid(&self) -> PathGrid {
        self.grid
    }

    /// `w_m` for `m >= 1`.
    pub fn weight(&self, m: usize) -> f64 {
        self.weights[m - 1]
    }

    fn check(&self, l: &LevyPath) -> Result<()> {
        if l.grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "weights on {} steps, driver on {} steps",
                self.grid.steps(),
                l.grid.steps()
            )));
        }
        Ok(())
    }

    /// `Y(t_k)` alone, in `O(k)`.
    pub fn value_at(&self, l: &LevyPath, k: usize) -> Result<f64> {
        self.check(l)?;
        if k > self.grid.steps() {
            return Err(invalid(format!("node {k} is outside the grid")));
        }
        Ok(node_value(&self.weights, &l.increments, k))
    }

    /// The whole path, `O(n²)`.
    pub fn apply(&self, l: &LevyPath) -> Result<VolterraPath> {
        self.check(l)?;
        let values = (0..=self.grid.steps())
            .map(|k| node_value(&self.weights, &l.increments, k))
            .collect();
        Ok(VolterraPath {
            grid: self.grid,
            values,
            kernel: self.kernel.clone(),
            seed: l.seed,
        })
    }
}

fn node_value(weights: &[f64], increments: &[f64], k: usize) -> f64 {
    // Σ_{j<k} w_{k-j} ΔL_j with w_m stored at m - 1
    increments[..k]
        .iter()
        .zip(weights[..k].iter().rev())
        .map(|(d, w)| d * w)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraPath {
    pub grid: PathGrid,
    pub values: Vec<f64>,
    pub kernel: String,
    pub seed: Option<SeedRecord>,
}

impl VolterraPath {
    pub fn terminal(&self) -> f64 {
        self.values[self.grid.steps()]
    }

    /// CSV `t,value` after one `#` metadata line.
    pub fn to_csv(&self, metadata: &str) -> String {
        let mut s = String::new();
        let seed = self
            .seed
            .map(|r| format!(" seed={} stream={}", r.root, r.stream))
            .unwrap_or_default();
        let _ = writeln!(s, "# {metadata} kernel={}{seed}", self.kernel);
        s.push_str("t,value\n");
        for (t, v) in self.grid.nodes().zip(&self.values) {
            let _ = writeln!(s, "{t},{v}");
        }
        s
    }
}

pub fn simulate_volterra<K: Kernel + ?Sized>(k: &K, l: &LevyPath) -> Result<VolterraPath> {
    VolterraWeights::new(k, l.grid)?.apply(l)
}

/// `Y(t-)` along a sequence of `δ`s, with `Y(t - δ)` read as the value at
/// the last node `<= t - δ` (paths are step functions between nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct LeftLimit {
    pub value: f64,
    /// `Y(t - δ_{i+1}) - Y(t - δ_i)` along the sequence.
    pub differences: Vec<f64>,
}

pub fn left_limit(path: &VolterraPath, t: f64, deltas: &[f64]) -> Result<LeftLimit> {
    let grid = path.grid;
    if !(t > 0.0 && t <= grid.horizon() * (1.0 + 1e-12)) {
        return Err(invalid(format!(
            "t = {t} is outside (0, {}]",
            grid.horizon()
        )));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0 && *d < t)) {
        return Err(invalid("left limit needs deltas in (0, t)"));
    }
    let at = |x: f64| {
        let k = ((x / grid.dt()) * (1.0 + 1e-12)).floor() as usize;
        path.values[k.min(grid.steps())]
    };
    let values: Vec<f64> = deltas.iter().map(|&d| at(t - d)).collect();
    let differences = values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(LeftLimit {
        value: *values.last().expect("non-empty"),
        differences,
    })
}

/// `{4Δt, 2Δt, Δt, Δt/2}`.
pub fn default_deltas(grid: PathGrid) -> Vec<f64> {
    let h = grid.dt();
    vec![4.0 * h, 2.0 * h, h, 0.5 * h]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            estimate: mean,
            std_error: (var / n).sqrt(),
            n_paths: xs.len(),
        })
    }
}

fn check_mc_regime(triplet: &CharTriplet, p: f64) -> Result<()> {
    if triplet.b > 0.0 && p < 2.0 {
        return Err(invalid(format!(
            "a Gaussian driver needs p >= 2 for L_p estimates, got p = {p}"
        )));
    }
    if !(p >= 1.0) {
        return Err(invalid(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `E|Y_1(t) - Y_2(t)|^p` with both processes built from the same driver
/// path in each replication.
pub fn mc_lp_distance<A: Kernel + ?Sized, B: Kernel + ?Sized>(
    k1: &A,
    k2: &B,
    driver: &LevyDriver,
    grid: PathGrid,
    t: f64,
    p: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_mc_regime(&driver.triplet, p)?;
    let k = grid
        .index_of(t)
        .filter(|k| *k > 0)
        .ok_or_else(|| invalid(format!("t = {t} is not a positive grid node")))?;
    let w1 = VolterraWeights::new(k1, grid)?;
    let w2 = VolterraWeights::new(k2, grid)?;
    let diff: Vec<f64> = w1
        .weights
        .iter()
        .zip(&w2.weights)
        .map(|(a, b)| a - b)
        .collect();
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|rep| {
            let l = driver.sample_seeded(grid, seed, rep);
            node_value(&diff, &l.increments, k).abs().powf(p)
        })
        .collect();
    McEstimate::from_samples(&samples)
}

/// One row of [`mc_distance_experiment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRow {
    pub epsilon: f64,
    pub mc: McEstimate,
}

/// `E|Y^ε(T) - Y(T)|^p` over an ε-grid with common random numbers: each
/// replication draws one driver path shared by all ε.
pub fn mc_distance_experiment(
    kernel: GammaKernel,
    driver: &LevyDriver,
    grid: PathGrid,
    p: f64,
    eps_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<McRow>> {
    check_mc_regime(&driver.triplet, p)?;
    if eps_grid.is_empty() {
        return Err(invalid("epsilon grid is empty"));
    }
    let base = VolterraWeights::new(&kernel, grid)?;
    let diffs = eps_grid
        .iter()
        .map(|&e| {
            let w = VolterraWeights::new(&kernel.perturbed(e)?, grid)?;
            Ok(w.weights
                .iter()
                .zip(&base.weights)
                .map(|(a, b)| a - b)
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let n = grid.steps();
    let per_rep: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|rep| {
            let l = driver.sample_seeded(grid, seed, rep);
            diffs
                .iter()
                .map(|d| node_value(d, &l.increments, n).abs().powf(p))
                .collect()
        })
        .collect();
    eps_grid
        .iter()
        .enumerate()
        .map(|(i, &epsilon)| {
            let xs: Vec<f64> = per_rep.iter().map(|r| r[i]).collect();
            Ok(McRow {
                epsilon,
                mc: McEstimate::from_samples(&xs)?,
            })
        })
        .collect()
}

/// CSV `epsilon,estimate,std_error,n_paths`.
pub fn mc_rows_csv(rows: &[McRow], metadata: &str) -> String {
    let mut s = format!("# {metadata}\nepsilon,estimate,std_error,n_paths\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.epsilon, r.mc.estimate, r.mc.std_error, r.mc.n_paths
        );
    }
    s
}
