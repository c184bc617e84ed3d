use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use halfwave_core::advection::{
    eq8_scaling_check, exact_lifespan, integrate_advection, AdvectionConfig, AdvectionProblem, AdvectionProfile,
};
use halfwave_core::fraclap::{
    cordoba_check, cross_validate, fraclap_quadrature, validate_normalization, QuadratureOptions, RadialProfile,
};
use halfwave_core::lifespan::{
    export, fit_critical, fit_power_law, fit_subcritical, geometric_grid, odi_diagnostic, parse_records, run_sweep,
    FitResult, Law, LifespanRecord, SweepConfig, ODI_REL_TOL,
};
use halfwave_core::solver::{integrate, integrate_from, make_initial_data, BlowupStatus, InitialProfile, SimConfig};
use halfwave_core::specfun::{c0, c0_double_factorial, frac_power_at_origin, FracIdentityQuery};
use halfwave_core::testfn::{
    verify_eq14, verify_integral_bound, verify_lemma14, verify_lemma23, verify_prop21, EstimateVerdict, INTEGRAL_BOUND_CEILING_N1,
};
use halfwave_core::GridSpec;

use crate::config::{Config, ConfigError};

/// What a command found: overall verdict and one summary line per item.
pub struct Report {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Self {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("     {line}"));
    }
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    fn ensure(&self) -> Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        self.ensure()?;
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn json(&self, name: &str, value: &Value) -> Result<PathBuf> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn sim_config(cfg: &Config) -> Result<SimConfig> {
    let n: usize = cfg.get("sim.n", 1)?;
    let default_points = if n == 1 { 1024 } else { 64 };
    let grid = GridSpec::new(n, cfg.get("sim.L", 64.0)?, cfg.get("sim.N", default_points)?)
        .map_err(|e| usage(e.to_string()))?;
    let nf = n as f64;
    let mut sim = SimConfig::new(
        grid,
        cfg.get("sim.p", (nf + 1.0) / nf)?,
        cfg.get("sim.epsilon", 0.2)?,
        cfg.get("sim.dt", 0.02)?,
        cfg.get("sim.t_max", 100.0)?,
    );
    sim.profile = cfg.get("sim.profile", InitialProfile::Gaussian)?;
    sim.blowup_threshold = cfg.get("sim.threshold", sim.blowup_threshold)?;
    sim.step_control = cfg.get("sim.step_control", sim.step_control)?;
    sim.snapshot_stride = cfg.get("sim.snapshot_stride", 0)?;
    sim.nonlinear = cfg.get("sim.nonlinear", true)?;
    sim.dealias = cfg.get("sim.dealias", true)?;
    sim.validate().map_err(|e| usage(e.to_string()))?;
    Ok(sim)
}

pub fn verify_identities(n_max: u32, out: &Output) -> Result<Report> {
    if n_max == 0 {
        return Err(usage("--n-max must be at least 1"));
    }
    let mut report = Report::new();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        let gamma_form = c0(n);
        match c0_double_factorial(n) {
            Ok(df) => {
                let gap = (gamma_form - df).abs();
                worst = worst.max(gap);
                rows.push(json!({"n": n, "gamma_form": gamma_form, "double_factorial_form": df, "gap": gap}));
            }
            Err(e) => {
                report.check(false, format!("C0({n}) double-factorial form: {e}"));
                rows.push(json!({"n": n, "gamma_form": gamma_form, "error": e.to_string()}));
            }
        }
    }
    report.check(worst <= 1e-12, format!("C0 forms agree for n = 1..{n_max}, max gap {worst:.2e}"));
    let pi = std::f64::consts::PI;
    let specials = [(1u32, pi / 4.0), (2, 8.0 / (3.0 * pi))];
    for (n, v) in specials {
        let err = (c0(n) - v).abs();
        report.check(err <= 1e-12, format!("C0({n}) closed value, error {err:.2e}"));
    }

    let mut spots = Vec::new();
    let mut worst_rel: f64 = 0.0;
    for n in [1usize, 2] {
        for sigma in [0.25, 0.5, 0.75] {
            for dq in 1..=3 {
                let q = (n + dq) as f64;
                let exact = frac_power_at_origin(FracIdentityQuery::new(n as u32, sigma, q)?);
                let profile = RadialProfile::algebraic(q, 0.0);
                let quad = fraclap_quadrature(|y| profile.eval(y), &vec![0.0; n], sigma, &QuadratureOptions::default())?;
                let rel = (quad.value - exact).abs() / exact;
                worst_rel = worst_rel.max(rel);
                spots.push(json!({"n": n, "sigma": sigma, "q": q, "closed_form": exact, "quadrature": quad.value, "relative_error": rel}));
            }
        }
        for sigma in [0.25, 0.5, 0.75] {
            validate_normalization(n, sigma)?;
        }
    }
    report.check(worst_rel <= 1e-6, format!("origin identity spot checks, max relative error {worst_rel:.2e}"));
    out.json(
        "identities.json",
        &json!({"c0": rows, "origin_identity": spots, "passed": report.passed}),
    )?;
    Ok(report)
}

pub fn fraclap(cfg: &Config, out: &Output) -> Result<Report> {
    let n: usize = cfg.get("fraclap.n", 1)?;
    let sigma: f64 = cfg.get("fraclap.sigma", 0.5)?;
    let shift: f64 = cfg.get("fraclap.shift", 0.0)?;
    let profile = match cfg.get("fraclap.profile", "algebraic".to_string())?.as_str() {
        "algebraic" => RadialProfile::algebraic(cfg.get("fraclap.q", n as f64 + 1.0)?, shift),
        "eta" => RadialProfile::eta(n as u32, shift),
        other => return Err(usage(format!("fraclap.profile: unknown profile '{other}'"))),
    };
    let default_points = if n == 1 { 8192 } else { 512 };
    let grid = GridSpec::new(n, cfg.get("fraclap.L", 200.0)?, cfg.get("fraclap.N", default_points)?)
        .map_err(|e| usage(e.to_string()))?;
    let xs: Vec<f64> = cfg.list("fraclap.points", &[0.0, 0.5, 1.0, 2.0, 5.0])?;
    let points: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let mut p = vec![0.0; n];
            p[0] = *x;
            p
        })
        .collect();
    let tol: f64 = cfg.get("fraclap.tolerance", 5e-3)?;
    let table = cross_validate(&profile, &points, sigma, grid, tol)?;
    let mut report = Report::new();
    let mut dat = String::from("# x spectral quadrature\n");
    for row in &table.rows {
        report.check(
            !row.flagged,
            format!(
                "x = {:?}: spectral {:.8} quadrature {:.8} difference {:.2e}",
                row.point, row.spectral, row.quadrature, row.difference
            ),
        );
        dat.push_str(&format!("{} {} {}\n", row.point[0], row.spectral, row.quadrature));
    }
    out.json("fraclap.json", &serde_json::to_value(&table)?)?;
    out.write("fraclap.dat", &dat)?;
    Ok(report)
}

pub fn check_estimates(cfg: &Config, out: &Output) -> Result<Report> {
    let per_decade: usize = cfg.get("estimates.per_decade", 8)?;
    let angles: usize = cfg.get("estimates.angles", 6)?;
    let x_max: f64 = cfg.get("estimates.x_max", 1e3)?;
    let r: f64 = cfg.get("estimates.r", 10.0)?;
    let t_steps: usize = cfg.get("estimates.t_steps", 24)?;
    if per_decade == 0 || angles == 0 || t_steps == 0 {
        return Err(usage("estimate sample densities must be positive"));
    }
    let mut report = Report::new();
    let mut verdicts: Vec<EstimateVerdict> = Vec::new();
    for q in [0.5, 1.0, 2.0] {
        verdicts.push(verify_lemma14(q, x_max, per_decade)?);
        verdicts.push(verify_lemma23(q, x_max, per_decade)?);
    }
    verdicts.push(verify_prop21(per_decade, angles)?);
    verdicts.push(verify_eq14(r, per_decade.min(6), t_steps)?);
    let mut bound = verify_integral_bound(1, r, per_decade, angles)?;
    bound.pass &= bound.fitted_constant <= INTEGRAL_BOUND_CEILING_N1;
    verdicts.push(bound);
    for v in &verdicts {
        report.check(
            v.pass,
            format!(
                "{}: C = {:.4}, drift {:.2e}, {} samples",
                v.estimate_id, v.fitted_constant, v.refinement_drift, v.sample_count
            ),
        );
    }
    let grid = GridSpec::new(1, 40.0, 1024)?;
    let eta0 = RadialProfile::eta(1, 0.0);
    let mut cordoba = Vec::new();
    for (name, field) in [
        ("gaussian", grid.sample_real(|x| (-x[0] * x[0]).exp())),
        ("eta0", grid.sample_real(|x| eta0.eval(x))),
    ] {
        for s in [0.5, 1.0] {
            let v = cordoba_check(&field, s)?;
            report.check(v.pass, format!("cordoba {name} s = {s}: min slack {:.3e}", v.min_slack));
            cordoba.push(json!({"profile": name, "verdict": v}));
        }
    }
    out.json(
        "estimates.json",
        &json!({"estimates": verdicts, "cordoba": cordoba, "passed": report.passed}),
    )?;
    Ok(report)
}

pub fn simulate(cfg: &Config, out: &Output) -> Result<Report> {
    let sim = sim_config(cfg)?;
    let (trace, result) = integrate(&sim)?;
    out.ensure()?;
    trace.export(&out.dir)?;
    out.json("result.json", &json!({"result": result, "snapshots": trace.snapshots.len()}))?;
    let mut report = Report::new();
    report.note(format!(
        "status {} at t = {:.6}, confirmation drift {:?}",
        result.status, result.t_num, result.resolution_check
    ));
    Ok(report)
}

pub fn advection_oracle(cfg: &Config, out: &Output) -> Result<Report> {
    let ps: Vec<f64> = cfg.list("advection.p", &[1.5, 2.0])?;
    let profiles: Vec<AdvectionProfile> = cfg.list("advection.profiles", &AdvectionProfile::ALL_LOCALIZED)?;
    let epsilon: f64 = cfg.get("advection.epsilon", 0.5)?;
    let epsilons: Vec<f64> = cfg.list("advection.epsilons", &[1.0, 0.5, 0.2, 0.1, 0.05, 0.02])?;
    let grid = GridSpec::new(1, cfg.get("advection.L", 64.0)?, cfg.get("advection.N", 1024)?)
        .map_err(|e| usage(e.to_string()))?;
    let mut report = Report::new();
    let mut rows = Vec::new();
    for &p in &ps {
        for &f in &profiles {
            let problem = AdvectionProblem::new(p, epsilon, f).map_err(|e| usage(e.to_string()))?;
            let exact = exact_lifespan(&problem);
            let r = integrate_advection(&problem, &AdvectionConfig::new(grid, grid.spacing(), 2.0 * exact))?;
            let err = (r.t_num - exact).abs() / exact;
            report.check(
                r.status == BlowupStatus::BlewUp && err <= 0.02,
                format!("p = {p} {f}: T* = {exact:.6}, T_num = {:.6}, error {err:.2e}", r.t_num),
            );
            rows.push(json!({"p": p, "profile": f, "epsilon": epsilon, "exact": exact, "numeric": r, "relative_error": err}));
        }
        let exact_fit = eq8_scaling_check(p, AdvectionProfile::Gaussian, &epsilons).map_err(|e| usage(e.to_string()))?;
        let mut records = Vec::new();
        for &eps in &epsilons {
            let problem = AdvectionProblem::new(p, eps, AdvectionProfile::Gaussian)?;
            let r = integrate_advection(&problem, &AdvectionConfig::new(grid, grid.spacing(), 2.0 * exact_lifespan(&problem)))?;
            records.push(LifespanRecord {
                epsilon: eps,
                p,
                n: 1,
                t_num: r.t_num,
                status: r.status,
                dt: grid.spacing(),
                points: grid.points,
                half_width: grid.half_width,
                threshold: 1e6,
                drift: r.resolution_check,
            });
        }
        let points: Vec<(f64, f64)> = records.iter().filter(|r| r.resolved()).map(|r| (r.epsilon, r.t_num)).collect();
        let numeric_fit = fit_power_law(&points, Law::AdvectionPower, Some(-(p - 1.0)))?;
        report.check(
            (exact_fit.c + (p - 1.0)).abs() <= 1e-12 && (numeric_fit.c + (p - 1.0)).abs() <= 0.05 && points.len() == records.len(),
            format!(
                "p = {p}: exact slope {:.12}, numeric slope {:.4}, expected {}",
                exact_fit.c,
                numeric_fit.c,
                -(p - 1.0)
            ),
        );
        export(&records, &[numeric_fit], &out.dir.join(format!("p{p}")))?;
    }
    out.json("advection.json", &json!({"lifespans": rows, "passed": report.passed}))?;
    Ok(report)
}

fn fit_for_law(records: &[LifespanRecord], law: Law, n: usize, p: f64) -> halfwave_core::Result<FitResult> {
    match law {
        Law::CriticalExp => fit_critical(records, n),
        Law::SubcriticalPower => fit_subcritical(records, n, p),
        Law::AdvectionPower => {
            let points: Vec<(f64, f64)> = records.iter().filter(|r| r.resolved()).map(|r| (r.epsilon, r.t_num)).collect();
            fit_power_law(&points, Law::AdvectionPower, Some(-(p - 1.0)))
        }
    }
}

fn report_fit(report: &mut Report, fit: &FitResult) {
    report.note(format!(
        "{} fit: C = {:.6}, offset {:.6}, R2 {:.6}",
        fit.model, fit.c, fit.offset, fit.r_squared
    ));
    if let Some(theory) = fit.theory_exponent {
        report.note(format!("expected exponent {theory}"));
    }
    if let Some(holds) = fit.envelope_holds {
        report.check(holds, format!("every record lies under the fitted envelope (offset {:.6})", fit.envelope_offset.unwrap_or(f64::NAN)));
    }
    if let Some(alt) = &fit.alternative {
        report.note(format!("power-law fit alongside: slope {:.6}, R2 {:.6}", alt.c, alt.r_squared));
    }
}

pub fn sweep(cfg: &Config, out: &Output) -> Result<Report> {
    let base = sim_config(cfg)?;
    let epsilons: Vec<f64> = cfg.list("sweep.epsilons", &[])?;
    if !cfg.contains("sweep.epsilons") {
        return Err(usage("missing required key 'sweep.epsilons'"));
    }
    let width = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let config = SweepConfig {
        epsilons,
        law: cfg.get("sweep.law", Law::CriticalExp)?,
        parallel_width: cfg.get("sweep.parallel_width", width)?,
        base_sim: base,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let records = run_sweep(&config)?;
    let mut report = Report::new();
    for r in &records {
        report.note(format!(
            "epsilon {}: {} T_num = {:.6}, drift {:?}",
            r.epsilon, r.status, r.t_num, r.drift
        ));
    }
    let fits = match fit_for_law(&records, config.law, config.base_sim.grid.n, config.base_sim.p) {
        Ok(fit) => {
            report_fit(&mut report, &fit);
            vec![fit]
        }
        Err(e) => {
            report.check(false, format!("{} fit: {e}", config.law));
            Vec::new()
        }
    };
    export(&records, &fits, &out.dir)?;
    Ok(report)
}

pub fn fit(cfg: &Config, out: &Output) -> Result<Report> {
    let input: PathBuf = cfg.require("fit.input")?;
    let text = fs::read_to_string(&input).map_err(|e| usage(format!("cannot read {}: {e}", input.display())))?;
    let records = parse_records(&text).map_err(|e| usage(format!("{}: {e}", input.display())))?;
    let Some(first) = records.first() else {
        bail!("{} holds no records", input.display());
    };
    let law: Law = cfg.require("fit.law")?;
    let n: usize = cfg.get("fit.n", first.n)?;
    let p: f64 = cfg.get("fit.p", first.p)?;
    let fit = fit_for_law(&records, law, n, p)?;
    let mut report = Report::new();
    report_fit(&mut report, &fit);
    export(&records, &[fit], &out.dir)?;
    Ok(report)
}

pub fn odi(cfg: &Config, out: &Output) -> Result<Report> {
    let mut sim = sim_config(cfg)?;
    sim.epsilon = cfg.get("odi.epsilon", sim.epsilon)?;
    if sim.snapshot_stride == 0 {
        sim.snapshot_stride = ((0.1 / sim.dt).round() as usize).max(1);
    }
    let (trace, result) = integrate_from(&sim, &make_initial_data(&sim)?)?;
    let horizon = trace.snapshots.last().map(|s| s.time).unwrap_or(0.0);
    let r_min: f64 = cfg.get("odi.r_min", 0.25)?;
    let r_max: f64 = cfg.get("odi.r_max", 0.8 * (horizon - 1.0))?;
    let count: usize = cfg.get("odi.r_count", 12)?;
    if !(r_min > 0.0 && r_max > r_min && r_max + 1.0 <= horizon) || count < 2 {
        return Err(usage(format!(
            "need 0 < odi.r_min < odi.r_max <= horizon - 1 = {} and odi.r_count >= 2",
            horizon - 1.0
        )));
    }
    let odi = odi_diagnostic(&trace, sim.epsilon, &geometric_grid(r_min, r_max, count))?;
    let mut report = Report::new();
    report.note(format!("run {} at t = {:.6}, horizon {horizon:.6}", result.status, result.t_num));
    report.check(odi.y.iter().all(|v| *v >= 0.0), "y(r) >= 0".into());
    report.check(
        odi.big_y[0] == 0.0 && odi.big_y.windows(2).all(|w| w[1] >= w[0]),
        "Y(0) = 0 and Y nondecreasing".into(),
    );
    if let Some(f) = &odi.fubini {
        report.check(
            f.relative_gap <= 10.0 * ODI_REL_TOL,
            format!("integration orders agree at R = {:.4}: gap {:.2e}", f.big_r, f.relative_gap),
        );
    }
    match odi.fitted_constant {
        Some(c) => report.note(format!("fitted ODI constant {c:.6} ({} points excluded)", odi.excluded)),
        None => report.note(format!("no usable points for the ODI fit ({} excluded)", odi.excluded)),
    }
    report.note(format!("closing bound holds on the grid: {}", odi.closing_bound_holds()));
    let mut dat = String::from("# r y Y Y'\n");
    for i in 0..odi.r.len() {
        dat.push_str(&format!("{} {} {} {}\n", odi.r[i], odi.y[i], odi.big_y[i], odi.big_y_prime[i]));
    }
    out.json("odi.json", &serde_json::to_value(&odi)?)?;
    out.write("odi.dat", &dat)?;
    Ok(report)
}
