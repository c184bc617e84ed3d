//! Semilinear transport ∂ₜw + ∂ₓw = w^p in one dimension.
//!
//! Along characteristics the equation is the ODE ẇ = w^p, so the solution
//! and its blowup time are explicit. The numerical integrator below is an
//! independent check of those formulas and of the lifespan machinery.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lifespan::{fit_power_law, FitResult, Law};
use crate::solver::{BlowupResult, BlowupStatus, RESOLUTION_TOLERANCE};

/// Shapes f with sup f = f(0) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionProfile {
    Constant,
    Gaussian,
    Sech2,
    Lorentzian,
}

impl AdvectionProfile {
    pub const ALL_LOCALIZED: [AdvectionProfile; 3] = [Self::Gaussian, Self::Sech2, Self::Lorentzian];

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Gaussian => (-x * x).exp(),
            Self::Sech2 => {
                let c = x.cosh();
                1.0 / (c * c)
            }
            Self::Lorentzian => 1.0 / (1.0 + x * x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Constant => 0.0,
            Self::Gaussian => -2.0 * x * (-x * x).exp(),
            Self::Sech2 => {
                let c = x.cosh();
                -2.0 * x.tanh() / (c * c)
            }
            Self::Lorentzian => -2.0 * x / (1.0 + x * x).powi(2),
        }
    }

    pub fn sup(&self) -> f64 {
        1.0
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Gaussian => "gaussian",
            Self::Sech2 => "sech2",
            Self::Lorentzian => "lorentzian",
        }
    }
}

impl fmt::Display for AdvectionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AdvectionProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "gaussian" => Ok(Self::Gaussian),
            "sech2" => Ok(Self::Sech2),
            "lorentzian" => Ok(Self::Lorentzian),
            other => Err(Error::Config(format!("unknown advection profile '{other}'"))),
        }
    }
}

/// w₀(x) = ε f(x − center).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvectionProblem {
    pub p: f64,
    pub epsilon: f64,
    pub profile: AdvectionProfile,
    pub center: f64,
}

impl AdvectionProblem {
    pub fn new(p: f64, epsilon: f64, profile: AdvectionProfile) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("p must exceed 1, got {p}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(Self {
            p,
            epsilon,
            profile,
            center: 0.0,
        })
    }

    pub fn shifted(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn initial(&self, x: f64) -> f64 {
        self.epsilon * self.profile.value(x - self.center)
    }

    fn initial_derivative(&self, x: f64) -> f64 {
        self.epsilon * self.profile.derivative(x - self.center)
    }

    pub fn sup_initial(&self) -> f64 {
        self.epsilon * self.profile.sup()
    }
}

/// T* = ((p−1)(sup w₀)^{p−1})^{−1}; infinite for w₀ ≡ 0.
pub fn exact_lifespan(problem: &AdvectionProblem) -> f64 {
    let sup = problem.sup_initial();
    if sup <= 0.0 {
        return f64::INFINITY;
    }
    1.0 / ((problem.p - 1.0) * sup.powf(problem.p - 1.0))
}

/// w(t, x) = (w₀(x−t)^{−(p−1)} − (p−1)t)^{−1/(p−1)}.
pub fn exact_solution(problem: &AdvectionProblem, t: f64, x: f64) -> Result<f64> {
    Ok(exact_with_derivatives(problem, t, x)?.0)
}

/// (w, ∂ₜw, ∂ₓw) from the closed form.
pub fn exact_with_derivatives(problem: &AdvectionProblem, t: f64, x: f64) -> Result<(f64, f64, f64)> {
    if !t.is_finite() || !x.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("need finite t >= 0 and x, got ({t}, {x})")));
    }
    if t >= exact_lifespan(problem) {
        return Err(Error::Domain(format!(
            "t = {t} is at or beyond the blowup time {}",
            exact_lifespan(problem)
        )));
    }
    let xi = x - t;
    let a = problem.initial(xi);
    if a <= 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let q = problem.p - 1.0;
    let g = a.powf(-q) - q * t;
    let w = g.powf(-1.0 / q);
    let da = problem.initial_derivative(xi);
    // dw/dg = −(1/q) g^{−1/q−1}
    let dw_dg = -w / (q * g);
    let dg_dxi = -q * a.powf(-q - 1.0) * da;
    let w_t = dw_dg * (-dg_dxi - q);
    let w_x = dw_dg * dg_dxi;
    Ok((w, w_t, w_x))
}

/// ∂ₜw + ∂ₓw − w^p at one point.
pub fn pde_residual(problem: &AdvectionProblem, t: f64, x: f64) -> Result<f64> {
    let (w, wt, wx) = exact_with_derivatives(problem, t, x)?;
    Ok(wt + wx - w.powf(problem.p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvectionConfig {
    pub grid: GridSpec,
    /// Macro step; must be a whole number of cells so transport is an exact shift.
    pub dt: f64,
    pub t_max: f64,
    pub blowup_threshold: f64,
    /// Reaction substeps are capped at step_control / w^{p−1}.
    pub step_control: f64,
}

impl AdvectionConfig {
    pub fn new(grid: GridSpec, dt: f64, t_max: f64) -> Self {
        Self {
            grid,
            dt,
            t_max,
            blowup_threshold: 1e6,
            step_control: 0.02,
        }
    }

    fn cells_per_step(&self) -> Result<usize> {
        if self.grid.n != 1 {
            return Err(Error::Domain("advection runs on one-dimensional grids".into()));
        }
        if !(self.dt > 0.0 && self.t_max > 0.0 && self.step_control > 0.0 && self.blowup_threshold > 0.0) {
            return Err(Error::Config("dt, t_max, step control and threshold must be positive".into()));
        }
        let h = self.grid.spacing();
        let m = (self.dt / h).round();
        if m < 1.0 || (m * h - self.dt).abs() > 1e-9 * h {
            return Err(Error::Config(format!(
                "dt = {} must be a positive multiple of the spacing {h}",
                self.dt
            )));
        }
        Ok(m as usize)
    }

    /// Twice the points, half the step, half the substep cap.
    pub fn refined(&self) -> Result<Self> {
        Ok(Self {
            grid: GridSpec::new(1, self.grid.half_width, self.grid.points * 2)?,
            dt: self.dt / 2.0,
            step_control: self.step_control / 2.0,
            ..*self
        })
    }
}

/// Advances ẇ = w^p from w over a time span with RK4, returning the new
/// value or the time offset at which w crossed the threshold.
fn react(mut w: f64, span: f64, p: f64, control: f64, threshold: f64) -> std::result::Result<f64, f64> {
    let f = |v: f64| v.max(0.0).powf(p);
    let mut s = 0.0;
    while s < span {
        if w <= 0.0 {
            return Ok(w);
        }
        let tau = (span - s).min(control / w.powf(p - 1.0));
        let k1 = f(w);
        let k2 = f(w + 0.5 * tau * k1);
        let k3 = f(w + 0.5 * tau * k2);
        let k4 = f(w + tau * k3);
        let next = w + tau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() || next >= threshold {
            return Err(s);
        }
        w = next;
        s += tau;
    }
    Ok(w)
}

fn run_advection(problem: &AdvectionProblem, config: &AdvectionConfig) -> Result<BlowupResult> {
    let shift = config.cells_per_step()?;
    let grid = config.grid;
    let mut w: Vec<f64> = (0..grid.points).map(|j| problem.initial(grid.axis_coord(j))).collect();
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite("initial advection profile".into()));
    }
    let mut t = 0.0;
    while t < config.t_max * (1.0 - 1e-12) {
        let span = config.dt.min(config.t_max - t);
        let crossing = w
            .par_iter_mut()
            .filter_map(|v| match react(*v, span, problem.p, config.step_control, config.blowup_threshold) {
                Ok(next) => {
                    *v = next;
                    None
                }
                Err(s) => Some(s),
            })
            .reduce_with(f64::min);
        if let Some(s) = crossing {
            return Ok(BlowupResult {
                status: BlowupStatus::BlewUp,
                t_num: t + s,
                resolution_check: None,
            });
        }
        // reaction commutes with translation, so the transport is applied
        // afterwards as a whole-cell rotation
        w.rotate_right(shift % grid.points);
        t += span;
    }
    Ok(BlowupResult {
        status: BlowupStatus::SurvivedToTmax,
        t_num: t,
        resolution_check: None,
    })
}

/// Numerical lifespan by exact grid-shift transport and RK4 reaction. A
/// blowup is confirmed on the refined configuration and marked `Unresolved`
/// if the two times differ by more than 5%.
pub fn integrate_advection(problem: &AdvectionProblem, config: &AdvectionConfig) -> Result<BlowupResult> {
    let mut result = run_advection(problem, config)?;
    if result.status == BlowupStatus::BlewUp {
        let fine = run_advection(problem, &config.refined()?)?;
        let drift = if fine.status == BlowupStatus::BlewUp && fine.t_num > 0.0 {
            (result.t_num - fine.t_num).abs() / fine.t_num
        } else {
            f64::INFINITY
        };
        result.resolution_check = Some(drift);
        if drift > RESOLUTION_TOLERANCE {
            result.status = BlowupStatus::Unresolved;
        }
    }
    Ok(result)
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.len() < 5 {
        return Err(Error::DegenerateFit(format!("need at least 5 epsilons, got {}", epsilons.len())));
    }
    if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::Domain("epsilons must be positive".into()));
    }
    let hi = epsilons.iter().cloned().fold(f64::MIN, f64::max);
    let lo = epsilons.iter().cloned().fold(f64::MAX, f64::min);
    if (hi / lo).log10() < 1.5 - 1e-12 {
        return Err(Error::DegenerateFit(format!(
            "epsilons span {:.3} decades, need 1.5",
            (hi / lo).log10()
        )));
    }
    Ok(())
}

/// Log-log regression of the exact T*(ε); the slope is −(p−1).
pub fn eq8_scaling_check(p: f64, profile: AdvectionProfile, epsilons: &[f64]) -> Result<FitResult> {
    check_epsilons(epsilons)?;
    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        points.push((eps, exact_lifespan(&AdvectionProblem::new(p, eps, profile)?)));
    }
    fit_power_law(&points, Law::AdvectionPower, Some(-(p - 1.0)))
}

/// The same regression on numerical lifespans. `grid_for` supplies the
/// configuration for each ε so long runs can use wider domains.
pub fn eq8_numeric_scaling<G>(p: f64, profile: AdvectionProfile, epsilons: &[f64], config_for: G) -> Result<FitResult>
where
    G: Fn(f64) -> AdvectionConfig + Sync,
{
    check_epsilons(epsilons)?;
    let results: Vec<Result<(f64, BlowupResult)>> = epsilons
        .par_iter()
        .map(|&eps| {
            let problem = AdvectionProblem::new(p, eps, profile)?;
            Ok((eps, integrate_advection(&problem, &config_for(eps))?))
        })
        .collect();
    let mut points = Vec::with_capacity(epsilons.len());
    for r in results {
        let (eps, res) = r?;
        if res.status != BlowupStatus::BlewUp {
            return Err(Error::DegenerateFit(format!("advection run at epsilon {eps} ended {}", res.status)));
        }
        points.push((eps, res.t_num));
    }
    fit_power_law(&points, Law::AdvectionPower, Some(-(p - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(p: f64, eps: f64, f: AdvectionProfile) -> AdvectionProblem {
        AdvectionProblem::new(p, eps, f).unwrap()
    }

    #[test]
    fn lifespan_examples() {
        let c = AdvectionProfile::Constant;
        assert!((exact_lifespan(&problem(2.0, 1.0, c)) - 1.0).abs() < 1e-15);
        assert!((exact_lifespan(&problem(2.0, 0.1, AdvectionProfile::Gaussian)) - 10.0).abs() < 1e-12);
        assert!((exact_lifespan(&problem(1.5, 0.01, AdvectionProfile::Sech2)) - 20.0).abs() < 1e-12);
        assert_eq!(exact_lifespan(&problem(2.0, 0.0, c)), f64::INFINITY);
    }

    #[test]
    fn constant_data_follow_the_ode() {
        let pr = problem(2.0, 0.5, AdvectionProfile::Constant);
        for t in [0.0, 0.3, 1.0, 1.9] {
            let w = exact_solution(&pr, t, 3.7).unwrap();
            assert!((w - 1.0 / (2.0 - t)).abs() < 1e-13);
        }
        assert!(exact_solution(&pr, 2.0, 0.0).is_err());
        assert!(exact_solution(&pr, 2.5, 0.0).is_err());
    }

    #[test]
    fn initial_time_returns_profile() {
        let pr = problem(1.5, 0.3, AdvectionProfile::Lorentzian).shifted(1.2);
        for x in [-3.0, 0.0, 1.2, 4.5] {
            assert_eq!(exact_solution(&pr, 0.0, x).unwrap(), pr.initial(x));
        }
    }

    #[test]
    fn solution_is_transported() {
        let pr = problem(2.0, 0.4, AdvectionProfile::Gaussian);
        let a = exact_solution(&pr, 1.0, 1.3).unwrap();
        let shifted = pr.shifted(0.5);
        let c = exact_solution(&shifted, 1.0, 1.8).unwrap();
        assert!((a - c).abs() < 1e-15);
    }

    #[test]
    fn closed_form_solves_the_equation() {
        for p in [1.5, 2.0, 3.0] {
            for f in [AdvectionProfile::Gaussian, AdvectionProfile::Sech2, AdvectionProfile::Lorentzian] {
                let pr = problem(p, 0.7, f);
                let big_t = exact_lifespan(&pr);
                for frac in [0.0, 0.2, 0.5, 0.9] {
                    for x in [-2.0, -0.3, 0.0, 0.4, 1.1, 3.0] {
                        let t = frac * big_t;
                        let res = pde_residual(&pr, t, x).unwrap();
                        let w = exact_solution(&pr, t, x).unwrap();
                        assert!(res.abs() <= 1e-10 * (1.0 + w.powf(p)), "p={p} {f} t={t} x={x} res={res}");
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let pr = problem(1.5, 0.6, AdvectionProfile::Sech2);
        let (t, x, h) = (1.0, 0.8, 1e-5);
        let (_, wt, wx) = exact_with_derivatives(&pr, t, x).unwrap();
        let ft = (exact_solution(&pr, t + h, x).unwrap() - exact_solution(&pr, t - h, x).unwrap()) / (2.0 * h);
        let fx = (exact_solution(&pr, t, x + h).unwrap() - exact_solution(&pr, t, x - h).unwrap()) / (2.0 * h);
        assert!((wt - ft).abs() < 1e-8);
        assert!((wx - fx).abs() < 1e-8);
    }

    #[test]
    fn lifespan_is_translation_invariant_and_scales() {
        for p in [1.5, 2.0, 2.5] {
            let base = problem(p, 0.3, AdvectionProfile::Gaussian);
            let t0 = exact_lifespan(&base);
            assert_eq!(exact_lifespan(&base.shifted(17.0)), t0);
            for lambda in [0.1, 0.5, 3.0] {
                let scaled = problem(p, 0.3 * lambda, AdvectionProfile::Gaussian);
                let ratio = exact_lifespan(&scaled) / t0;
                assert!((ratio - lambda.powf(-(p - 1.0))).abs() < 1e-12 * ratio);
            }
        }
    }

    fn config(l: f64, points: usize) -> AdvectionConfig {
        let grid = GridSpec::new(1, l, points).unwrap();
        AdvectionConfig::new(grid, grid.spacing(), 100.0)
    }

    #[test]
    fn zero_data_survive() {
        let pr = problem(2.0, 0.0, AdvectionProfile::Gaussian);
        let mut cfg = config(16.0, 128);
        cfg.t_max = 5.0;
        let r = integrate_advection(&pr, &cfg).unwrap();
        assert_eq!(r.status, BlowupStatus::SurvivedToTmax);
        assert!((r.t_num - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sech2_numeric_lifespan() {
        let pr = problem(2.0, 0.5, AdvectionProfile::Sech2);
        let cfg = config(32.0, 512);
        let r = integrate_advection(&pr, &cfg).unwrap();
        assert_eq!(r.status, BlowupStatus::BlewUp);
        assert!((r.t_num - 2.0).abs() / 2.0 < 0.02, "{r:?}");
        let mut half = cfg;
        half.dt /= 2.0;
        half.grid = GridSpec::new(1, 32.0, 1024).unwrap();
        let r2 = integrate_advection(&pr, &half).unwrap();
        assert!((r.t_num - r2.t_num).abs() / r2.t_num < 0.01);
    }

    #[test]
    fn rejects_bad_configs() {
        let pr = problem(2.0, 0.5, AdvectionProfile::Sech2);
        let mut cfg = config(32.0, 512);
        cfg.dt *= 1.5;
        assert!(integrate_advection(&pr, &cfg).is_err());
        let grid = GridSpec::new(2, 8.0, 16).unwrap();
        assert!(integrate_advection(&pr, &AdvectionConfig::new(grid, 1.0, 1.0)).is_err());
        assert!(AdvectionProblem::new(1.0, 0.5, AdvectionProfile::Gaussian).is_err());
        assert!(AdvectionProblem::new(2.0, -0.5, AdvectionProfile::Gaussian).is_err());
    }

    #[test]
    fn analytic_scaling_slopes() {
        let eps = [1.0, 0.5, 0.2, 0.1, 0.05, 0.02];
        for p in [1.5, 2.0, 3.0] {
            let fit = eq8_scaling_check(p, AdvectionProfile::Gaussian, &eps).unwrap();
            assert!((fit.c + (p - 1.0)).abs() < 1e-12, "{}", fit.c);
            assert!((fit.r_squared - 1.0).abs() < 1e-12);
        }
        assert!(eq8_scaling_check(2.0, AdvectionProfile::Gaussian, &eps[..4]).is_err());
        assert!(eq8_scaling_check(2.0, AdvectionProfile::Gaussian, &[1.0, 0.9, 0.8, 0.7, 0.6]).is_err());
    }
}
