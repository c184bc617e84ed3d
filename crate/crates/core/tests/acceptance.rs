//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::Instant;

use halfwave_core::advection::{
    eq8_numeric_scaling, eq8_scaling_check, exact_lifespan, integrate_advection, AdvectionConfig, AdvectionProblem,
    AdvectionProfile,
};
use halfwave_core::fraclap::{
    cordoba_check, fraclap_quadrature, fraclap_spectral, QuadratureOptions, RadialProfile, CORDOBA_SLACK,
};
use halfwave_core::lifespan::{
    fit_critical, fit_critical_points, fit_power_law, geometric_grid, odi_diagnostic, run_sweep, Law, SweepConfig,
    ODI_REL_TOL,
};
use halfwave_core::solver::{
    integrate_from, make_initial_data, wave_residual, weak_form_residual, BlowupStatus, Propagator, SimConfig,
};
use halfwave_core::specfun::{c0, c0_double_factorial, frac_power_at_origin, FracIdentityQuery};
use halfwave_core::testfn::{
    half_laplacian_eta, verify_integral_bound, verify_lemma14, verify_lemma23, verify_prop21, SpaceTimePoint,
    TestFunctionParams, INTEGRAL_BOUND_CEILING_N1,
};
use halfwave_core::{GridSpec, Result};

type Outcome = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn identity_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        worst = worst.max((c0(n) - c0_double_factorial(n)?).abs());
    }
    let pi = std::f64::consts::PI;
    let e1 = (c0(1) - pi / 4.0).abs();
    let e2 = (c0(2) - 8.0 / (3.0 * pi)).abs();
    Ok((
        worst <= 1e-12 && e1 <= 1e-12 && e2 <= 1e-12,
        format!("max form gap {worst:.1e}, C0(1) err {e1:.1e}, C0(2) err {e2:.1e}"),
    ))
}

fn frac_power_oracle() -> Outcome {
    let mut worst_quad: f64 = 0.0;
    let mut worst_spec: f64 = 0.0;
    let mut monotone = true;
    for n in [1usize, 2] {
        for sigma in [0.25, 0.5, 0.75] {
            for dq in 1..=3 {
                let q = (n + dq) as f64;
                let exact = frac_power_at_origin(FracIdentityQuery::new(n as u32, sigma, q)?);
                let profile = RadialProfile::algebraic(q, 0.0);
                let origin = vec![0.0; n];
                let quad = fraclap_quadrature(|y| profile.eval(y), &origin, sigma, &QuadratureOptions::default())?;
                worst_quad = worst_quad.max((quad.value - exact).abs() / exact);
                let h = if n == 1 { 0.1 } else { 0.2 };
                let mut errors = Vec::new();
                for l in [50.0, 100.0, 200.0] {
                    let points = ((2.0 * l / h) as usize).next_power_of_two();
                    let grid = GridSpec::new(n, l, points)?;
                    let field = grid.sample_real(|x| profile.eval(x));
                    let value = fraclap_spectral(&field, sigma)?.interpolate(&origin).re;
                    errors.push((value - exact).abs() / exact);
                }
                monotone &= errors.windows(2).all(|w| w[1] < w[0]);
                worst_spec = worst_spec.max(errors[0]);
            }
        }
    }
    Ok((
        worst_quad <= 1e-6 && worst_spec <= 5e-3 && monotone,
        format!("quadrature rel err {worst_quad:.1e}, spectral rel err {worst_spec:.1e}, monotone in L: {monotone}"),
    ))
}

fn eta0_anchor() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1u32, 2] {
        let pt = SpaceTimePoint::new(0.0, vec![0.0; n as usize]);
        let v = half_laplacian_eta(&pt, &TestFunctionParams::new(n, 0.0)?)?;
        worst = worst.max(v.value.abs());
    }
    Ok((worst <= 1e-6, format!("max |value| {worst:.1e}")))
}

fn cordoba() -> Outcome {
    let grid = GridSpec::new(1, 40.0, 1024)?;
    let eta0 = RadialProfile::eta(1, 0.0);
    let fields = [
        ("gaussian", grid.sample_real(|x| (-x[0] * x[0]).exp())),
        ("eta0", grid.sample_real(|x| eta0.eval(x))),
    ];
    let mut pass = true;
    let mut worst = f64::INFINITY;
    for (_, f) in &fields {
        for s in [0.5, 1.0] {
            let v = cordoba_check(f, s)?;
            pass &= v.pass && v.min_slack >= CORDOBA_SLACK;
            worst = worst.min(v.min_slack);
        }
    }
    Ok((pass, format!("min slack {worst:.2e}")))
}

fn prop21() -> Outcome {
    let v = verify_prop21(8, 6)?;
    let origin = half_laplacian_eta(&SpaceTimePoint::new(0.0, vec![0.0]), &TestFunctionParams::new(1, 0.0)?)?;
    Ok((
        v.pass && origin.value.abs() <= 1e-5,
        format!(
            "C = {:.4}, drift {:.2e}, {} samples, origin |LHS| {:.1e}",
            v.fitted_constant,
            v.refinement_drift,
            v.sample_count,
            origin.value.abs()
        ),
    ))
}

fn pointwise_lemmas() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for q in [0.5, 1.0, 2.0] {
        for v in [verify_lemma14(q, 1e3, 8)?, verify_lemma23(q, 1e3, 8)?] {
            pass &= v.pass;
            parts.push(format!("{} q={q}: {:.3} ({:.1e})", v.estimate_id, v.fitted_constant, v.refinement_drift));
        }
    }
    Ok((pass, parts.join(", ")))
}

fn advection() -> Outcome {
    let mut pass = true;
    let mut worst_lifespan: f64 = 0.0;
    for p in [1.5, 2.0] {
        for f in AdvectionProfile::ALL_LOCALIZED {
            let problem = AdvectionProblem::new(p, 0.5, f)?;
            let grid = GridSpec::new(1, 64.0, 1024)?;
            let r = integrate_advection(&problem, &AdvectionConfig::new(grid, grid.spacing(), 100.0))?;
            let err = (r.t_num - exact_lifespan(&problem)).abs() / exact_lifespan(&problem);
            pass &= r.status == BlowupStatus::BlewUp && err <= 0.02;
            worst_lifespan = worst_lifespan.max(err);
        }
    }
    let eps = [1.0, 0.5, 0.2, 0.1, 0.05, 0.02];
    let mut slopes = Vec::new();
    for p in [1.5, 2.0] {
        let exact = eq8_scaling_check(p, AdvectionProfile::Gaussian, &eps)?;
        let numeric = eq8_numeric_scaling(p, AdvectionProfile::Gaussian, &eps, |e| {
            let t = 1.0 / ((p - 1.0) * e.powf(p - 1.0));
            let grid = GridSpec::new(1, 64.0, 1024).expect("valid grid");
            AdvectionConfig::new(grid, grid.spacing(), 2.0 * t)
        })?;
        pass &= (exact.c + (p - 1.0)).abs() <= 1e-12 && (numeric.c + (p - 1.0)).abs() <= 0.05;
        slopes.push(format!("p={p}: {:.4}", numeric.c));
    }
    Ok((
        pass,
        format!("max lifespan error {:.1e}, numeric slopes {}", worst_lifespan, slopes.join(", ")),
    ))
}

fn solver() -> Outcome {
    let grid = GridSpec::new(1, 32.0, 512)?;
    let mut cfg = SimConfig::new(grid, 2.0, 1.0, 0.01, 10.0);
    cfg.nonlinear = false;
    let u0 = make_initial_data(&cfg)?;
    let prop = Propagator::new(&cfg);
    let mut u_hat = prop.to_fourier(&u0);
    let start = u0.l2_norm();
    let mut drift: f64 = 0.0;
    for _ in 0..1000 {
        prop.linear_step(&mut u_hat, cfg.dt);
        drift = drift.max((prop.to_physical(&u_hat).l2_norm() - start).abs() / start);
    }
    let mut orders = Vec::new();
    for nonlinear in [false, true] {
        let mut weak = Vec::new();
        let mut wave = Vec::new();
        for dt in [0.05, 0.025, 0.0125] {
            let grid = GridSpec::new(1, 64.0, 1024)?;
            let mut cfg = SimConfig::new(grid, 2.0, 0.5, dt, 3.0);
            cfg.nonlinear = nonlinear;
            cfg.step_control = 1.0;
            cfg.snapshot_stride = 1;
            let (trace, _) = integrate_from(&cfg, &make_initial_data(&cfg)?)?;
            weak.push(weak_form_residual(&trace, &cfg, 2.0, 3.0)?);
            wave.push(wave_residual(&trace, &cfg)?);
        }
        for v in [weak, wave] {
            orders.extend(v.windows(2).map(|w| (w[0] / w[1]).log2()));
        }
    }
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((
        drift <= 1e-10 && min_order >= 1.8,
        format!("L2 drift {drift:.1e} over 1000 steps, min residual order {min_order:.3}"),
    ))
}

fn critical_sweep() -> Outcome {
    let grid = GridSpec::new(1, 256.0, 4096)?;
    let config = SweepConfig {
        epsilons: vec![0.4, 0.2, 0.1, 0.05, 0.025],
        base_sim: SimConfig::new(grid, 2.0, 1.0, 0.02, 400.0),
        law: Law::CriticalExp,
        parallel_width: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let records = run_sweep(&config)?;
    let all_resolved = records.iter().all(|r| r.resolved());
    let monotone = records.windows(2).all(|w| w[1].t_num > w[0].t_num);
    let fit = fit_critical(&records, 1)?;
    let power = fit.alternative.as_ref().expect("power-law fit reported");
    let times: Vec<String> = records.iter().map(|r| format!("{:.2}", r.t_num)).collect();
    Ok((
        all_resolved && monotone && fit.envelope_holds == Some(true),
        format!(
            "T = [{}], exp fit C = {:.3} (R2 {:.4}), power fit slope {:.3} (R2 {:.4})",
            times.join(", "),
            fit.c,
            fit.r_squared,
            power.c,
            power.r_squared
        ),
    ))
}

fn odi() -> Outcome {
    let mut constants = Vec::new();
    let mut pass = true;
    let mut gaps = Vec::new();
    for (points, dt) in [(2048, 0.02f64), (4096, 0.01)] {
        let grid = GridSpec::new(1, 64.0, points)?;
        let mut cfg = SimConfig::new(grid, 2.0, 0.2, dt, 30.0);
        cfg.snapshot_stride = (0.1f64 / dt).round() as usize;
        let (trace, result) = integrate_from(&cfg, &make_initial_data(&cfg)?)?;
        pass &= result.status == BlowupStatus::BlewUp;
        let odi = odi_diagnostic(&trace, 0.2, &geometric_grid(0.25, 12.0, 12))?;
        pass &= odi.y.iter().all(|v| *v >= 0.0);
        pass &= odi.big_y[0] == 0.0 && odi.big_y.windows(2).all(|w| w[1] >= w[0]);
        let gap = odi.fubini.as_ref().map(|f| f.relative_gap).unwrap_or(f64::INFINITY);
        pass &= gap <= 10.0 * ODI_REL_TOL;
        gaps.push(gap);
        match odi.fitted_constant {
            Some(c) if c.is_finite() => constants.push(c),
            _ => pass = false,
        }
    }
    let drift = if constants.len() == 2 {
        (constants[1] - constants[0]).abs() / constants[0]
    } else {
        f64::INFINITY
    };
    let bound = verify_integral_bound(1, 10.0, 8, 6)?;
    pass &= drift <= 0.25 && bound.fitted_constant.is_finite() && bound.fitted_constant <= INTEGRAL_BOUND_CEILING_N1;
    Ok((
        pass,
        format!(
            "ODI C = {:?} (drift {:.1e}), Fubini gaps {:?}, integral constant {:.3} <= {}",
            constants, drift, gaps, bound.fitted_constant, INTEGRAL_BOUND_CEILING_N1
        ),
    ))
}

fn synthetic_fits() -> Outcome {
    let eps: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];
    let exp_pts: Vec<(f64, f64)> = eps.iter().map(|e| (*e, (3.0 / e).exp())).collect();
    let exp_fit = fit_critical_points(&exp_pts, 1)?;
    let pow_pts: Vec<(f64, f64)> = eps.iter().map(|e| (*e, e.powi(-2))).collect();
    let pow_fit = fit_power_law(&pow_pts, Law::SubcriticalPower, Some(-2.0))?;
    let pass = (exp_fit.c - 3.0).abs() <= 1e-6
        && (exp_fit.r_squared - 1.0).abs() <= 1e-12
        && (pow_fit.c + 2.0).abs() <= 1e-6
        && (pow_fit.r_squared - 1.0).abs() <= 1e-12;
    Ok((
        pass,
        format!(
            "exp C = {:.9} (R2 {}), power slope = {:.9} (R2 {})",
            exp_fit.c, exp_fit.r_squared, pow_fit.c, pow_fit.r_squared
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("C0 dual-form identity", identity_forms),
        ("fractional power of (1+|x|^2)^(-q/2) at the origin", frac_power_oracle),
        ("half Laplacian of eta0 vanishes at the origin", eta0_anchor),
        ("pointwise Cordoba-Cordoba inequality", cordoba),
        ("space-time decay of the half Laplacian of eta", prop21),
        ("pointwise decay lemmas", pointwise_lemmas),
        ("transport oracle lifespans and scaling", advection),
        ("solver conservation and residual order", solver),
        ("critical sweep envelope", critical_sweep),
        ("ODI diagnostic", odi),
        ("synthetic fit round-trips", synthetic_fits),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
