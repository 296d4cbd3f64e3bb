//! Flat `key = value` experiment configuration with dotted keys.
//!
//! Values come from, in increasing priority: schema defaults, the config
//! file, `--key=value` overrides. The resolved key set is hashed so every
//! output can be traced to the configuration that produced it.

use std::collections::BTreeMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use volterra::conditions::FracParams;
use volterra::integrate::Integrand;
use volterra::kernels::GammaKernel;
use volterra::levy::{CharTriplet, JumpLaw, LevyDriver, LevyMeasureSpec, PathGrid};

use crate::Failure;

pub const OUTPUT_ENV: &str = "VOLTERRA_OUT";
const DEFAULT_OUTPUT: &str = "volterra-out";

/// `(key, default, description)`; keys without a default are optional
/// unless a command asks for them.
pub const SCHEMA: &[(&str, Option<&str>, &str)] = &[
    (
        "seed",
        None,
        "root seed of every random stream (required for random experiments)",
    ),
    (
        "kernel.beta",
        Some("-0.0625"),
        "Gamma kernel exponent, > -1 and != 0",
    ),
    ("kernel.lambda", Some("0"), "Gamma kernel damping, >= 0"),
    (
        "kernel.epsilon",
        Some("1e-3"),
        "kernel shift for single-epsilon commands",
    ),
    (
        "eps.grid",
        Some("1e-1,1e-2,1e-3,1e-4"),
        "comma-separated epsilon grid",
    ),
    (
        "driver.kind",
        Some("tempered-stable"),
        "tempered-stable | brownian | compound-poisson | drift",
    ),
    ("driver.C", Some("1"), "tempered-stable intensity"),
    ("driver.gamma", Some("10"), "tempered-stable tempering rate"),
    (
        "driver.alpha",
        Some("0.5"),
        "tempered-stable stability index",
    ),
    ("driver.a", Some("0"), "drift"),
    (
        "driver.b",
        Some("0"),
        "Gaussian variance (brownian uses 1 when left at 0)",
    ),
    ("driver.rate", Some("1"), "compound Poisson jump rate"),
    (
        "driver.jump_sd",
        Some("1"),
        "compound Poisson Gaussian jump scale",
    ),
    (
        "driver.terms",
        Some("10000"),
        "series terms per tempered-stable path",
    ),
    ("frac.alpha", Some("0.4"), "fractional order alpha"),
    (
        "frac.p",
        Some("1.125"),
        "integrability exponent p; q = p/(p-1)",
    ),
    ("grid.n", Some("1024"), "grid steps"),
    ("grid.T", Some("1"), "horizon"),
    (
        "mc.reps",
        Some("500"),
        "replications of the integral experiment",
    ),
    (
        "mc.paths",
        Some("10000"),
        "paths of the distance experiment",
    ),
    ("integrand", Some("t"), "t | B | zero | const:<c>"),
    (
        "output.dir",
        None,
        "output directory (default $VOLTERRA_OUT, else ./volterra-out)",
    ),
    ("threads", None, "worker thread cap"),
];

const ALIASES: &[(&str, &str)] = &[
    ("beta", "kernel.beta"),
    ("lambda", "kernel.lambda"),
    ("eps", "kernel.epsilon"),
    ("epsilon", "kernel.epsilon"),
    ("eps-grid", "eps.grid"),
    ("alpha", "frac.alpha"),
    ("p", "frac.p"),
    ("n", "grid.n"),
    ("T", "grid.T"),
    ("reps", "mc.reps"),
    ("paths", "mc.paths"),
    ("C", "driver.C"),
    ("out", "output.dir"),
];

fn canonical_key(key: &str) -> Result<&'static str, Failure> {
    let key = ALIASES
        .iter()
        .find(|(a, _)| *a == key)
        .map_or(key, |(_, k)| *k);
    SCHEMA
        .iter()
        .find(|(k, _, _)| *k == key)
        .map(|(k, _, _)| *k)
        .ok_or_else(|| Failure::Schema(format!("unknown key '{key}'")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Config {
    pub fn defaults() -> Self {
        let values = SCHEMA
            .iter()
            .filter_map(|(k, d, _)| d.map(|d| (*k, d.to_string())))
            .collect();
        Self { values }
    }

    /// Parse config text over the defaults. `#` starts a comment.
    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, Failure> {
        Self::parse_over(Self::defaults(), text)
    }

    /// Parse config text over `base`.
    pub fn parse_over(base: Self, text: &str) -> Result<Self, Failure> {
        let mut cfg = base;
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::Schema(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        let key = canonical_key(key)?;
        if value.is_empty() && key != "eps.grid" {
            return Err(Failure::Schema(format!("empty value for '{key}'")));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    /// Apply `--key=value` flags.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<(), Failure> {
        for a in args {
            let body = a
                .strip_prefix("--")
                .ok_or_else(|| Failure::Schema(format!("expected --key=value, got '{a}'")))?;
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Failure::Schema(format!("expected --key=value, got '{a}'")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str, Failure> {
        self.get(key)
            .ok_or_else(|| Failure::Schema(format!("missing required key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, Failure> {
        let v = self.required(key)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Failure::Schema(format!("'{key}' must be a finite number, got '{v}'")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, Failure> {
        let v = self.required(key)?;
        v.parse().map_err(|_| {
            Failure::Schema(format!("'{key}' must be a non-negative integer, got '{v}'"))
        })
    }

    pub fn seed(&self) -> Result<u64, Failure> {
        let v = self.required("seed")?;
        v.parse()
            .map_err(|_| Failure::Schema(format!("'seed' must be an unsigned integer, got '{v}'")))
    }

    pub fn threads(&self) -> Result<Option<usize>, Failure> {
        match self.get("threads") {
            None => Ok(None),
            Some(_) => match self.usize("threads")? {
                0 => Err(Failure::Schema("'threads' must be >= 1".into())),
                t => Ok(Some(t)),
            },
        }
    }

    pub fn eps_grid(&self) -> Result<Vec<f64>, Failure> {
        let raw = self.required("eps.grid")?;
        let eps: Vec<f64> = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Failure::Schema(format!("bad epsilon '{s}' in eps.grid")))
            })
            .collect::<Result<_, _>>()?;
        if eps.is_empty() {
            return Err(Failure::Schema("eps.grid is empty".into()));
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Failure::Schema(format!(
                "eps.grid values must lie in (0, 1), got {e}"
            )));
        }
        Ok(eps)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.get("output.dir")
            .map(PathBuf::from)
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }

    pub fn kernel(&self) -> Result<GammaKernel, Failure> {
        Ok(GammaKernel::new(
            self.f64("kernel.beta")?,
            self.f64("kernel.lambda")?,
        )?)
    }

    pub fn grid(&self) -> Result<PathGrid, Failure> {
        Ok(PathGrid::new(self.f64("grid.T")?, self.usize("grid.n")?)?)
    }

    pub fn frac(&self) -> Result<FracParams, Failure> {
        Ok(FracParams::new(
            self.f64("frac.alpha")?,
            self.f64("frac.p")?,
            self.f64("grid.T")?,
        )?)
    }

    pub fn integrand(&self) -> Result<Integrand, Failure> {
        Integrand::parse(self.required("integrand")?).map_err(|e| Failure::Schema(e.to_string()))
    }

    pub fn triplet(&self) -> Result<CharTriplet, Failure> {
        let (a, b) = (self.f64("driver.a")?, self.f64("driver.b")?);
        let nu = match self.required("driver.kind")? {
            "tempered-stable" => LevyMeasureSpec::tempered_stable(
                self.f64("driver.C")?,
                self.f64("driver.gamma")?,
                self.f64("driver.alpha")?,
            )?,
            "compound-poisson" => LevyMeasureSpec::CompoundPoisson {
                rate: self.f64("driver.rate")?,
                law: JumpLaw::Gaussian {
                    sigma: self.f64("driver.jump_sd")?,
                },
            },
            "brownian" => {
                return Ok(CharTriplet::new(
                    a,
                    if b == 0.0 { 1.0 } else { b },
                    LevyMeasureSpec::None,
                )?)
            }
            "drift" => LevyMeasureSpec::None,
            other => return Err(Failure::Schema(format!("unknown driver.kind '{other}'"))),
        };
        Ok(CharTriplet::new(a, b, nu)?)
    }

    pub fn driver(&self) -> Result<LevyDriver, Failure> {
        Ok(LevyDriver::new(
            self.triplet()?,
            self.usize("driver.terms")?,
        )?)
    }

    /// Sorted `key = value` lines of every resolved key except output
    /// location and thread count, which do not change results.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .filter(|(k, _)| !matches!(**k, "output.dir" | "threads"))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of [`Config::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// The schema as a documented config file.
pub fn schema_text() -> String {
    let mut s = String::from("# volterra experiment configuration\n");
    for (k, d, doc) in SCHEMA {
        s.push_str(&format!("# {doc}\n"));
        match d {
            Some(d) => s.push_str(&format!("{k} = {d}\n")),
            None => s.push_str(&format!("# {k} =\n")),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let mut c = Config::parse("# comment\nkernel.beta = 0.5 # trailing\nseed=3\n\n").unwrap();
        assert_eq!(c.f64("kernel.beta").unwrap(), 0.5);
        c.apply_overrides(&["--beta=-0.25".into(), "--n=64".into()])
            .unwrap();
        assert_eq!(c.f64("kernel.beta").unwrap(), -0.25);
        assert_eq!(c.usize("grid.n").unwrap(), 64);
        assert_eq!(c.seed().unwrap(), 3);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(Config::parse("nonsense"), Err(Failure::Schema(_))));
        assert!(matches!(
            Config::parse("kernel.gamma = 1"),
            Err(Failure::Schema(_))
        ));
        let mut c = Config::defaults();
        assert!(c.seed().is_err());
        c.set("eps.grid", "").unwrap();
        assert!(matches!(c.eps_grid(), Err(Failure::Schema(_))));
        c.set("eps.grid", "0.1,2").unwrap();
        assert!(c.eps_grid().is_err());
        assert!(c.apply_overrides(&["beta=1".into()]).is_err());
    }

    #[test]
    fn hash_tracks_results_not_locations() {
        let a = Config::parse("seed = 1").unwrap();
        let mut b = a.clone();
        b.set("out", "/tmp/elsewhere").unwrap();
        b.set("threads", "2").unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set("alpha", "0.3").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn schema_text_round_trips() {
        let c = Config::parse(&schema_text()).unwrap();
        assert_eq!(c, Config::defaults());
    }

    #[test]
    fn driver_kinds() {
        let mut c = Config::defaults();
        assert!(c.triplet().unwrap().nu != LevyMeasureSpec::None);
        c.set("driver.kind", "brownian").unwrap();
        assert_eq!(c.triplet().unwrap().b, 1.0);
        c.set("driver.kind", "levy").unwrap();
        assert!(c.triplet().is_err());
    }
}
