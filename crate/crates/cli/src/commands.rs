use std::fmt::Write as _;

use volterra::conditions::{
    check_cp_gamma, check_cp_numeric, check_dp_gamma, semimartingale_gamma,
    semimartingale_perturbed, ConditionReport, CSV_HEADER,
};
use volterra::fracderiv::SampledFunction;
use volterra::integrate::{
    integral_convergence_experiment, running_gls, ConvergenceConfig, Integrand, IntegrandShape,
};
use volterra::kernels::{Kernel, RateExperiment};
use volterra::levy::LevyPath;
use volterra::volterra::{mc_distance_experiment, mc_rows_csv, simulate_volterra, VolterraPath};

use crate::config::Config;
use crate::output::Outputs;
use crate::Failure;

/// `t` followed by one column per named series, all on the same grid.
fn columns_csv(t: impl Iterator<Item = f64>, cols: &[(&str, &[f64])]) -> String {
    let mut s = String::from("t");
    for (name, _) in cols {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (i, ti) in t.enumerate() {
        let _ = write!(s, "{ti}");
        for (_, v) in cols {
            let _ = write!(s, ",{}", v[i]);
        }
        s.push('\n');
    }
    s
}

fn paths(cfg: &Config, rep: u64) -> Result<(LevyPath, VolterraPath, VolterraPath), Failure> {
    let (grid, seed) = (cfg.grid()?, cfg.seed()?);
    let kernel = cfg.kernel()?;
    let l = cfg.driver()?.sample_seeded(grid, seed, rep);
    let y = simulate_volterra(&kernel, &l)?;
    let ye = simulate_volterra(&kernel.perturbed(cfg.f64("kernel.epsilon")?)?, &l)?;
    Ok((l, y, ye))
}

pub fn simulate(cfg: &Config, out: &mut Outputs) -> Result<(), Failure> {
    let (l, y, ye) = paths(cfg, 0)?;
    let eps = cfg.f64("kernel.epsilon")?;
    out.write_csv("levy_path.csv", &l.to_csv())?;
    out.write_csv("volterra_path.csv", &y.to_csv("simulate"))?;
    out.write_csv(
        "volterra_eps_path.csv",
        &ye.to_csv(&format!("simulate epsilon={eps}")),
    )?;
    println!("L(T) = {}", l.terminal());
    println!("Y(T) = {}", y.terminal());
    println!("Y^eps(T) = {} (epsilon = {eps})", ye.terminal());
    Ok(())
}

fn condition_reports(cfg: &Config) -> Result<Vec<ConditionReport>, Failure> {
    let (beta, lambda) = (cfg.f64("kernel.beta")?, cfg.f64("kernel.lambda")?);
    let eps = cfg.f64("kernel.epsilon")?;
    let triplet = cfg.triplet()?;
    let frac = cfg.frac()?;
    let mut y = semimartingale_gamma(beta, lambda, &triplet)?;
    // the example expects Y to fall outside the semimartingale class
    y.check = format!("semimartingale-failure(Y): {}", y.check);
    for c in &mut y.clauses {
        c.holds = !c.holds;
        c.inequality = format!("not ({})", c.inequality);
        c.margin = -c.margin;
    }
    let ye = semimartingale_perturbed(beta, lambda, eps, frac.horizon, &triplet)?;
    let dp = check_dp_gamma(beta, lambda, &frac)?;
    let cp = if lambda == 0.0 {
        check_cp_gamma(beta, &frac)?
    } else {
        let g = cfg.kernel()?;
        check_cp_numeric(&g, &g.perturbed(eps)?, &frac)?.to_report("Cp (numeric)")
    };
    Ok(vec![y, ye, dp, cp])
}

pub fn check_conditions(cfg: &Config, out: &mut Outputs) -> Result<(), Failure> {
    let reports = condition_reports(cfg)?;
    let mut csv = format!("{CSV_HEADER}\n");
    let mut failed = Vec::new();
    for r in &reports {
        print!("{}", r.to_table());
        csv.push_str(&r.csv_rows());
        failed.extend(
            r.failed_clauses()
                .iter()
                .map(|c| format!("{} {}", r.check, c.id)),
        );
    }
    out.write_csv("conditions.csv", &csv)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Conditions(failed))
    }
}

pub fn kernel_rates(cfg: &Config, out: &mut Outputs) -> Result<(), Failure> {
    let kernel = cfg.kernel()?;
    let (p, horizon) = (cfg.f64("frac.p")?, cfg.f64("grid.T")?);
    let exp = RateExperiment::run(kernel, p, horizon, &cfg.eps_grid()?)?;
    out.write_csv("kernel_rates.csv", &exp.to_csv("kernel-rates"))?;
    println!("{}, p = {p}", kernel.describe());
    println!(
        "fitted slope {:.6} (r^2 = {:.6})",
        exp.fit.slope, exp.fit.r_squared
    );
    println!("theoretical exponent {:.6}", exp.theoretical);
    Ok(())
}

pub fn convergence(cfg: &Config, out: &mut Outputs) -> Result<(), Failure> {
    let rows = mc_distance_experiment(
        cfg.kernel()?,
        &cfg.driver()?,
        cfg.grid()?,
        cfg.f64("frac.p")?,
        &cfg.eps_grid()?,
        cfg.usize("mc.paths")?,
        cfg.seed()?,
    )?;
    let csv = mc_rows_csv(&rows, &format!("E|Y^eps(T) - Y(T)|^p seed={}", cfg.seed()?));
    out.write_csv("volterra_convergence.csv", &csv)?;
    for r in &rows {
        println!(
            "epsilon {:e}: {:.6e} ± {:.2e}",
            r.epsilon, r.mc.estimate, r.mc.std_error
        );
    }
    Ok(())
}

pub fn integrate(cfg: &Config, out: &mut Outputs) -> Result<(), Failure> {
    let exp = ConvergenceConfig {
        kernel: cfg.kernel()?,
        driver: cfg.driver()?,
        frac: cfg.frac()?,
        grid: cfg.grid()?,
        reps: cfg.usize("mc.reps")?,
        eps_grid: cfg.eps_grid()?,
        seed: cfg.seed()?,
        integrand: cfg.integrand()?,
    };
    let result = integral_convergence_experiment(&exp)?;
    let meta = format!("integrand={} seed={}", exp.integrand.name(), exp.seed);
    out.write_csv("integral_convergence.csv", &result.to_csv(&meta))?;

    // replication 0 paths
    let l = exp.driver.sample_seeded(exp.grid, exp.seed, 0);
    let x = exp.integrand.sample(exp.grid, exp.seed, 0);
    let y = simulate_volterra(&exp.kernel, &l)?;
    let mut series: Vec<(String, Vec<f64>)> = vec![
        ("levy".into(), l.values()),
        ("integrand".into(), x.values().to_vec()),
        ("volterra".into(), y.values),
    ];
    for e in &exp.eps_grid {
        series.push((
            format!("volterra_eps_{e}"),
            simulate_volterra(&exp.kernel.perturbed(*e)?, &l)?.values,
        ));
    }
    let cols: Vec<(&str, &[f64])> = series
        .iter()
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    out.write_csv("integrate_paths.csv", &columns_csv(exp.grid.nodes(), &cols))?;
    for r in &result.rows {
        println!(
            "epsilon {:e}: mean |diff| {:.6e} ± {:.2e}",
            r.epsilon, r.mc.estimate, r.mc.std_error
        );
    }
    Ok(())
}

fn running_csv(rows: &[(&str, Vec<(f64, f64)>)]) -> String {
    let t: Vec<f64> = rows[0].1.iter().map(|r| r.0).collect();
    let vals: Vec<Vec<f64>> = rows
        .iter()
        .map(|(_, v)| v.iter().map(|r| r.1).collect())
        .collect();
    let cols: Vec<(&str, &[f64])> = rows
        .iter()
        .zip(&vals)
        .map(|((n, _), v)| (*n, v.as_slice()))
        .collect();
    columns_csv(t.into_iter(), &cols)
}

pub fn reproduce_figures(cfg: &Config, out: &mut Outputs) -> Result<(), Failure> {
    let (l, y, ye) = paths(cfg, 0)?;
    let grid = l.grid;
    let alpha = cfg.f64("frac.alpha")?;
    let lv = l.values();
    out.write_csv(
        "fig1_paths.csv",
        &columns_csv(
            grid.nodes(),
            &[
                ("levy", &lv),
                ("volterra", &y.values),
                ("volterra_eps", &ye.values),
            ],
        ),
    )?;

    let stride = (grid.steps() / 128).max(1);
    let ys = SampledFunction::new(grid, y.values.clone())?;
    let yes = SampledFunction::new(grid, ye.values.clone())?;
    let running = |x: &SampledFunction| -> Result<String, Failure> {
        Ok(running_csv(&[
            (
                "integral_volterra_eps",
                running_gls(x, &yes, alpha, IntegrandShape::Linear, stride)?,
            ),
            (
                "integral_volterra",
                running_gls(x, &ys, alpha, IntegrandShape::Linear, stride)?,
            ),
        ]))
    };
    let t = Integrand::Linear.sample(grid, 0, 0);
    out.write_csv("fig2_integral_t.csv", &running(&t)?)?;

    let b = Integrand::Brownian.sample(grid, cfg.seed()?, 0);
    out.write_csv(
        "fig3_brownian_path.csv",
        &columns_csv(grid.nodes(), &[("brownian", b.values())]),
    )?;
    out.write_csv("fig3_integral_b.csv", &running(&b)?)?;
    println!("figure data written to {}", out.dir().display());
    Ok(())
}
