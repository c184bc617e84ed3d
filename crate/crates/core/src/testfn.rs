//! Test-function family η, ρ, φ_r, ψ_r, χ_r and numerical verifiers for the
//! pointwise estimates the blowup argument rests on.
//!
//! Every estimate of the form |LHS| ≤ C·RHS with an unspecified constant is
//! checked the same way: the empirical constant sup |LHS|/RHS is computed on a
//! sample set and again on a set of twice the density. A finite constant that
//! does not move under refinement is the testable surrogate for "there exists
//! C independent of the point".

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraclap::{fraclap_quadrature, QuadratureOptions, QuadratureValue, RadialProfile};
use crate::quadrature;
use crate::specfun;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionParams {
    pub n: u32,
    pub c0: f64,
    pub r: f64,
    pub rho_order: u32,
}

impl TestFunctionParams {
    pub fn new(n: u32, r: f64) -> Result<Self> {
        Self::with_rho_order(n, r, n + 2)
    }

    pub fn with_rho_order(n: u32, r: f64, rho_order: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("scaling parameter must be >= 0, got {r}")));
        }
        if rho_order < n + 2 {
            return Err(Error::Domain(format!(
                "cutoff order must be at least n+2 = {}, got {rho_order}",
                n + 2
            )));
        }
        Ok(Self {
            n,
            c0: specfun::c0(n),
            r,
            rho_order,
        })
    }

    pub fn with_r(self, r: f64) -> Self {
        Self { r, ..self }
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn scale(&self) -> f64 {
        self.r + 1.0
    }
}

/// A point (t, x) of space-time, x ∈ ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        Self { t, x }
    }

    fn x_norm_sqr(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }

    fn radius_sqr(&self) -> f64 {
        self.t * self.t + self.x_norm_sqr()
    }
}

pub fn eta0(x: &[f64], params: &TestFunctionParams) -> f64 {
    eta_r2(0.0, x.iter().map(|v| v * v).sum(), params)
}

pub fn eta(pt: &SpaceTimePoint, params: &TestFunctionParams) -> f64 {
    eta_r2(pt.t, pt.x_norm_sqr(), params)
}

fn eta_r2(t: f64, x2: f64, params: &TestFunctionParams) -> f64 {
    let u = 1.0 + t * t + x2;
    let nf = params.nf();
    u.powf(-(nf + 1.0) / 2.0) - params.c0 * u.powf(-(nf + 2.0) / 2.0)
}

/// ∂η/∂t.
fn eta_dt(t: f64, x2: f64, params: &TestFunctionParams) -> f64 {
    let u = 1.0 + t * t + x2;
    let nf = params.nf();
    -(nf + 1.0) * t * u.powf(-(nf + 3.0) / 2.0) + params.c0 * (nf + 2.0) * t * u.powf(-(nf + 4.0) / 2.0)
}

/// Radius at which η(0, ·) is maximal: √(1+|x|²) = C₀(n+2)/(n+1). η₀
/// increases on [0, this radius].
pub fn eta_peak_radius(params: &TestFunctionParams) -> f64 {
    let nf = params.nf();
    let root_u = params.c0 * (nf + 2.0) / (nf + 1.0);
    (root_u * root_u - 1.0).max(0.0).sqrt()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cutoff ρ: 1 on (−∞, 1/2], 0 on [1, ∞), and on (1/2, 1) the smoothstep of
/// order k after the affine map s = 2τ − 1, written as
/// (1−s)^k Σ_j C(k−1+j, j) s^j so it stays accurate as s → 1.
pub fn rho(tau: f64, params: &TestFunctionParams) -> f64 {
    if tau <= 0.5 {
        return 1.0;
    }
    if tau >= 1.0 {
        return 0.0;
    }
    let k = params.rho_order;
    let s = 2.0 * tau - 1.0;
    let poly: f64 = (0..k).map(|j| binomial(k - 1 + j, j) * s.powi(j as i32)).sum();
    (1.0 - s).powi(k as i32) * poly
}

/// ρ′(τ) = −2 (2k−1)!/((k−1)!)² s^{k−1}(1−s)^{k−1} on (1/2, 1), zero elsewhere.
pub fn rho_derivative(tau: f64, params: &TestFunctionParams) -> f64 {
    if tau <= 0.5 || tau >= 1.0 {
        return 0.0;
    }
    let k = params.rho_order;
    let s = 2.0 * tau - 1.0;
    let lead = (2 * k - 1) as f64 * binomial(2 * k - 2, k - 1);
    -2.0 * lead * (s * (1.0 - s)).powi(k as i32 - 1)
}

/// sup over `samples` equally spaced points of (1/2, 1) of |ρ′|/ρ^{n/(n+1)}.
pub fn rho_flatness_constant(params: &TestFunctionParams, samples: usize) -> f64 {
    let e = params.nf() / (params.nf() + 1.0);
    (1..=samples)
        .map(|i| 0.5 + 0.5 * i as f64 / (samples + 1) as f64)
        .map(|tau| rho_derivative(tau, params).abs() / rho(tau, params).powf(e))
        .fold(0.0, f64::max)
}

pub fn phi_r(pt: &SpaceTimePoint, params: &TestFunctionParams) -> f64 {
    let s = params.scale();
    let tau = pt.t / s;
    rho(tau, params) * eta_r2(tau, pt.x_norm_sqr() / (s * s), params)
}

/// ∂ₜφ_r by the product and chain rules.
pub fn phi_r_dt(pt: &SpaceTimePoint, params: &TestFunctionParams) -> f64 {
    let s = params.scale();
    let tau = pt.t / s;
    let x2 = pt.x_norm_sqr() / (s * s);
    (rho_derivative(tau, params) * eta_r2(tau, x2, params) + rho(tau, params) * eta_dt(tau, x2, params)) / s
}

/// min{ρ̃^{(n+1)/2n}, ρ̃^{−1/4n}} with ρ̃ = (t²+|x|²)/(r+1)².
pub fn psi_weight(pt: &SpaceTimePoint, params: &TestFunctionParams) -> f64 {
    let s = params.scale();
    let rr = pt.radius_sqr() / (s * s);
    let nf = params.nf();
    rr.powf((nf + 1.0) / (2.0 * nf)).min(rr.powf(-1.0 / (4.0 * nf)))
}

pub fn psi_r(pt: &SpaceTimePoint, params: &TestFunctionParams) -> f64 {
    psi_weight(pt, params) * phi_r(pt, params)
}

pub fn chi_r(t: f64, params: &TestFunctionParams) -> f64 {
    if t < params.scale() {
        1.0
    } else {
        0.0
    }
}

/// True when φ_r(t,x) is nondecreasing along the increasing sequence `rs`.
pub fn phi_r_nondecreasing(pt: &SpaceTimePoint, params: &TestFunctionParams, rs: &[f64]) -> bool {
    rs.windows(2).all(|w| {
        let a = phi_r(pt, &params.with_r(w[0]));
        let b = phi_r(pt, &params.with_r(w[1]));
        b >= a - 1e-15 * a.abs()
    })
}

/// Outcome of a fitted-constant boundedness check.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateVerdict {
    pub estimate_id: String,
    pub fitted_constant: f64,
    #[serde(rename = "samples")]
    pub sample_count: usize,
    #[serde(rename = "worst_point")]
    pub max_ratio_location: Vec<f64>,
    pub refinement_drift: f64,
    /// samples whose quadrature error exceeded 10% of the right-hand side
    pub unresolved: usize,
    pub pass: bool,
}

impl EstimateVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

pub const MAX_REFINEMENT_DRIFT: f64 = 0.10;

/// One evaluated sample: location, |LHS|, RHS and the LHS error estimate.
#[derive(Debug, Clone)]
struct Sample {
    location: Vec<f64>,
    lhs: f64,
    rhs: f64,
    lhs_error: f64,
}

struct Fit {
    constant: f64,
    location: Vec<f64>,
    count: usize,
    unresolved: usize,
}

fn fit_samples(samples: Vec<Sample>) -> Fit {
    let mut fit = Fit {
        constant: 0.0,
        location: Vec::new(),
        count: 0,
        unresolved: 0,
    };
    for s in samples {
        if s.rhs <= 0.0 {
            continue;
        }
        fit.count += 1;
        if s.lhs_error > 0.1 * s.rhs {
            fit.unresolved += 1;
        }
        let ratio = s.lhs / s.rhs;
        if ratio > fit.constant || fit.location.is_empty() {
            fit.constant = fit.constant.max(ratio);
            fit.location = s.location;
        }
    }
    fit
}

fn evaluate<P, F>(points: &[P], f: F) -> Result<Vec<Sample>>
where
    P: Sync,
    F: Fn(&P) -> Result<Sample> + Sync + Send,
{
    points.par_iter().map(f).collect()
}

fn verdict(id: &str, coarse: Fit, fine: Fit) -> EstimateVerdict {
    let drift = if coarse.constant > 0.0 {
        (fine.constant - coarse.constant).abs() / coarse.constant
    } else if fine.constant == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let pass = fine.constant.is_finite()
        && coarse.constant.is_finite()
        && drift <= MAX_REFINEMENT_DRIFT
        && fine.unresolved == 0
        && coarse.unresolved == 0;
    EstimateVerdict {
        estimate_id: id.to_string(),
        fitted_constant: fine.constant,
        sample_count: fine.count,
        max_ratio_location: fine.location,
        refinement_drift: drift,
        unresolved: fine.unresolved + coarse.unresolved,
        pass,
    }
}

/// `per_decade` log-spaced values covering [lo, hi].
pub fn log_space(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let m = (decades * per_decade as f64).ceil().max(1.0) as usize;
    (0..=m)
        .map(|i| lo * (hi / lo).powf(i as f64 / m as f64))
        .collect()
}

fn half_laplacian(f: impl Fn(&[f64]) -> f64, x: &[f64], scales: &[f64]) -> Result<QuadratureValue> {
    fraclap_quadrature(f, x, 0.5, &QuadratureOptions::with_scales(scales))
}

/// Right-hand side of the decay estimate for (−Δ)^{1/2}(1+|x|²)^{−q/2}; the
/// branch depends on q versus n.
pub fn lemma14_rhs(n: u32, q: f64, x_norm: f64) -> f64 {
    let nf = n as f64;
    let u = 1.0 + x_norm * x_norm;
    if q < nf {
        u.powf(-(q + 1.0) / 2.0)
    } else if q == nf {
        u.powf(-(nf + 1.0) / 2.0) * (1.0 + (1.0 + x_norm).ln())
    } else {
        u.powf(-(nf + 1.0) / 2.0)
    }
}

/// |(−Δ)^{1/2}(1+|·|²)^{−q/2}(x)| ≤ C·RHS_q(x) on |x| ∈ {0} ∪ [10⁻², x_max],
/// n = 1.
pub fn verify_lemma14(q: f64, x_max: f64, per_decade: usize) -> Result<EstimateVerdict> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    let profile = RadialProfile::algebraic(q, 0.0);
    let run = |density: usize| -> Result<Fit> {
        let mut xs = vec![0.0];
        xs.extend(log_space(1e-2, x_max, density));
        let samples = evaluate(&xs, |&x| {
            let v = half_laplacian(|y| profile.eval(y), &[x], &[])?;
            Ok(Sample {
                location: vec![x],
                lhs: v.value.abs(),
                rhs: lemma14_rhs(1, q, x),
                lhs_error: v.error,
            })
        })?;
        Ok(fit_samples(samples))
    };
    Ok(verdict(&format!("lemma14_q{q}"), run(per_decade)?, run(2 * per_decade)?))
}

/// |(−Δ)^{1/2}[(1+t²+|·|²)^{−q/2}](x)| ≤ C log(4t)(1+t²+|x|²)^{−(q+1)/2} for
/// t ≥ max(|x|, 1), n = 1. Samples t log-spaced on [1, t_max] and
/// x = t·{0, 1/4, 1/2, 3/4, 1} (finer fractions on refinement).
pub fn verify_lemma23(q: f64, t_max: f64, per_decade: usize) -> Result<EstimateVerdict> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    let run = |density: usize, fractions: usize| -> Result<Fit> {
        let mut pts = Vec::new();
        for t in log_space(1.0, t_max, density) {
            for j in 0..=fractions {
                pts.push((t, t * j as f64 / fractions as f64));
            }
        }
        let samples = evaluate(&pts, |&(t, x)| lemma23_sample(q, t, x))?;
        Ok(fit_samples(samples))
    };
    Ok(verdict(&format!("lemma23_q{q}"), run(per_decade, 4)?, run(2 * per_decade, 8)?))
}

/// LHS/RHS at a single long-time decay sample; rejects points outside t ≥ max(|x|, 1).
pub fn lemma23_ratio(q: f64, t: f64, x: f64) -> Result<f64> {
    let s = lemma23_sample(q, t, x)?;
    Ok(s.lhs / s.rhs)
}

fn lemma23_sample(q: f64, t: f64, x: f64) -> Result<Sample> {
    if t < 1.0 || x.abs() > t {
        return Err(Error::Domain(format!(
            "estimate holds for t >= max(|x|, 1); got t={t}, x={x}"
        )));
    }
    let profile = RadialProfile::algebraic(q, t);
    let v = half_laplacian(|y| profile.eval(y), &[x], &[profile.width()])?;
    let rhs = (4.0 * t).ln() * (1.0 + t * t + x * x).powf(-(q + 1.0) / 2.0);
    Ok(Sample {
        location: vec![t, x],
        lhs: v.value.abs(),
        rhs,
        lhs_error: v.error,
    })
}

/// |(−Δ)^{1/2}_x η(t,·)(x)|.
pub fn half_laplacian_eta(pt: &SpaceTimePoint, params: &TestFunctionParams) -> Result<QuadratureValue> {
    let profile = RadialProfile::eta(params.n, pt.t);
    half_laplacian(|y| profile.eval(y), &pt.x, &[profile.width()])
}

pub fn prop21_rhs(pt: &SpaceTimePoint, n: u32) -> f64 {
    let r2 = pt.radius_sqr();
    r2.sqrt().min((1.0 + r2).powf(-(n as f64 + 1.0) / 2.0))
}

/// Sample points for the space-time estimates: radii log-spaced on
/// [r_min, r_max] times `angles + 1` directions in the quarter plane t, x ≥ 0.
pub fn polar_samples(r_min: f64, r_max: f64, per_decade: usize, angles: usize) -> Vec<SpaceTimePoint> {
    let mut pts = Vec::new();
    for rad in log_space(r_min, r_max, per_decade) {
        for j in 0..=angles {
            let theta = std::f64::consts::FRAC_PI_2 * j as f64 / angles as f64;
            pts.push(SpaceTimePoint::new(rad * theta.sin(), vec![rad * theta.cos()]));
        }
    }
    pts
}

/// |(−Δ)^{1/2}η(t,·)(x)| ≤ C min{(t²+|x|²)^{1/2}, (1+t²+|x|²)^{−(n+1)/2}},
/// n = 1, with t²+|x|² spanning [10⁻⁴, 10⁶].
pub fn verify_prop21(per_decade: usize, angles: usize) -> Result<EstimateVerdict> {
    let params = TestFunctionParams::new(1, 0.0)?;
    let run = |density: usize, angles: usize| -> Result<Fit> {
        let pts = polar_samples(1e-2, 1e3, density, angles);
        let samples = evaluate(&pts, |pt| {
            let v = half_laplacian_eta(pt, &params)?;
            Ok(Sample {
                location: vec![pt.t, pt.x[0]],
                lhs: v.value.abs(),
                rhs: prop21_rhs(pt, 1),
                lhs_error: v.error,
            })
        })?;
        Ok(fit_samples(samples))
    };
    Ok(verdict("prop21", run(per_decade, angles)?, run(2 * per_decade, 2 * angles)?))
}

/// |−i∂ₜφ_r + (−Δ)^{1/2}φ_r| at one point, with ∂ₜ analytic and the
/// fractional part by quadrature in x.
pub fn eq14_lhs(pt: &SpaceTimePoint, params: &TestFunctionParams) -> Result<QuadratureValue> {
    let dt = phi_r_dt(pt, params);
    let s = params.scale();
    let tau = pt.t / s;
    let rho_t = rho(tau, params);
    let d = if rho_t == 0.0 {
        QuadratureValue {
            value: 0.0,
            error: 0.0,
            magnitude: 0.0,
        }
    } else {
        let t = pt.t;
        half_laplacian(
            |y| phi_r(&SpaceTimePoint::new(t, y.to_vec()), params),
            &pt.x,
            &[s * (1.0 + tau * tau).sqrt()],
        )?
    };
    Ok(QuadratureValue {
        value: dt.hypot(d.value),
        error: d.error,
        magnitude: d.magnitude,
    })
}

pub fn eq14_rhs(pt: &SpaceTimePoint, params: &TestFunctionParams) -> f64 {
    let s = params.scale();
    let nf = params.nf();
    let rr = pt.radius_sqr() / (s * s);
    (1.0 + rr).powf(-(nf + 0.5) / (2.0 * (nf + 1.0)))
        * psi_r(pt, params).powf(nf / (nf + 1.0))
        * chi_r(pt.t, params)
}

/// (r+1)|−i∂ₜφ_r + (−Δ)^{1/2}φ_r| ≤ C (1+ρ̃)^{−(n+1/2)/2(n+1)} ψ_r^{n/(n+1)} χ_r
/// at fixed r, n = 1.
///
/// Samples live on a product grid in scaled coordinates: t/(r+1) uniform on
/// [0, 1.2] (`t_steps` intervals) and |x|/(r+1) ∈ {0} ∪ log-spaced [10⁻², 10²].
/// The cutoff zone 1/2 < t/(r+1) < 1 is where the constant is attained, so t
/// is sampled uniformly rather than by angle.
pub fn verify_eq14(r: f64, per_decade: usize, t_steps: usize) -> Result<EstimateVerdict> {
    let params = TestFunctionParams::new(1, r)?;
    let s = params.scale();
    let run = |density: usize, t_steps: usize| -> Result<Fit> {
        let mut xis = vec![0.0];
        xis.extend(log_space(1e-2, 1e2, density));
        let mut pts = Vec::new();
        for i in 0..=t_steps {
            let tau = 1.2 * i as f64 / t_steps as f64;
            for xi in &xis {
                pts.push(SpaceTimePoint::new(tau * s, vec![xi * s]));
            }
        }
        let samples = evaluate(&pts, |pt| {
            let v = eq14_lhs(pt, &params)?;
            Ok(Sample {
                location: vec![pt.t, pt.x[0]],
                lhs: s * v.value,
                rhs: eq14_rhs(pt, &params),
                lhs_error: s * v.error,
            })
        })?;
        Ok(fit_samples(samples))
    };
    Ok(verdict(&format!("eq14_r{r}"), run(per_decade, t_steps)?, run(2 * per_decade, 2 * t_steps)?))
}

/// ∫₀^R ψ_r(t,x)/(r+1) dr by adaptive quadrature in r.
pub fn psi_r_integral(pt: &SpaceTimePoint, params: &TestFunctionParams, big_r: f64) -> f64 {
    let rad = pt.radius_sqr().sqrt();
    // kinks of the integrand in r: min-branch switch and the ρ transition zone
    let mut breaks = vec![0.0, big_r];
    for b in [rad - 1.0, 2.0 * pt.t - 1.0, pt.t - 1.0] {
        if b > 0.0 && b < big_r {
            breaks.push(b);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quadrature::integrate_pieces(
        |r| psi_r(pt, &params.with_r(r)) / (r + 1.0),
        &breaks,
        1e-10,
        1e-300,
    )
    .value
}

/// Empirical constant of ∫₀^R ψ_r/(r+1) dr ≤ C φ_R(t,x) over points with
/// φ_R > 0, scaled radii [10⁻³, 1.5] relative to R+1.
pub fn verify_integral_bound(n: u32, big_r: f64, per_decade: usize, angles: usize) -> Result<EstimateVerdict> {
    let params = TestFunctionParams::new(n, big_r)?;
    let s = big_r + 1.0;
    let run = |density: usize, angles: usize| -> Result<Fit> {
        let pts: Vec<SpaceTimePoint> = polar_samples(1e-3, 1.5, density, angles)
            .into_iter()
            .map(|p| {
                let mut x = vec![0.0; n as usize];
                x[0] = p.x[0] * s;
                SpaceTimePoint::new(p.t * s, x)
            })
            .collect();
        let samples = evaluate(&pts, |pt| {
            Ok(Sample {
                location: std::iter::once(pt.t).chain(pt.x.iter().copied()).collect(),
                lhs: psi_r_integral(pt, &params, big_r),
                rhs: phi_r(pt, &params),
                lhs_error: 0.0,
            })
        })?;
        Ok(fit_samples(samples))
    };
    Ok(verdict(&format!("integral_bound_n{n}_R{big_r}"), run(per_decade, angles)?, run(2 * per_decade, 2 * angles)?))
}

/// ∫₀^∞ min{r'^{−1/2}, r'^{−3/2}} dr' = 4, the ceiling the change of variables
/// gives for the n = 1 exponent pair.
pub const INTEGRAL_BOUND_CEILING_N1: f64 = 4.0;

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p1() -> TestFunctionParams {
        TestFunctionParams::new(1, 0.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(TestFunctionParams::new(0, 1.0).is_err());
        assert!(TestFunctionParams::new(1, -1.0).is_err());
        assert!(TestFunctionParams::with_rho_order(2, 1.0, 3).is_err());
        let p = TestFunctionParams::new(2, 1.0).unwrap();
        assert_eq!(p.rho_order, 4);
        assert_eq!(p.c0, specfun::c0(2));
    }

    #[test]
    fn eta0_values() {
        assert!((eta0(&[0.0], &p1()) - (1.0 - PI / 4.0)).abs() < 1e-15);
        let p2 = TestFunctionParams::new(2, 0.0).unwrap();
        assert!((eta0(&[0.0, 0.0], &p2) - (1.0 - 8.0 / (3.0 * PI))).abs() < 1e-15);
        assert!(eta0(&[1e3], &p1()) > 0.0);
        assert!(eta0(&[1e3, 0.0], &p2) > 0.0);
    }

    #[test]
    fn eta_sandwich_and_symmetry() {
        for n in 1..=3u32 {
            let p = TestFunctionParams::new(n, 0.0).unwrap();
            for t in [0.0, 0.3, 2.0, 50.0] {
                for x in [0.0, 0.1, 1.0, 7.0, 300.0] {
                    let mut xs = vec![0.0; n as usize];
                    xs[0] = x;
                    let pt = SpaceTimePoint::new(t, xs);
                    let e = eta(&pt, &p);
                    let base = (1.0 + t * t + x * x).powf(-(n as f64 + 1.0) / 2.0);
                    assert!(e >= (1.0 - p.c0) * base * (1.0 - 1e-14));
                    assert!(e <= base);
                    if n >= 2 {
                        let mut rot = vec![0.0; n as usize];
                        rot[0] = x / 2f64.sqrt();
                        rot[1] = x / 2f64.sqrt();
                        assert!((eta(&SpaceTimePoint::new(t, rot), &p) - e).abs() < 1e-15);
                    }
                }
            }
            assert_eq!(eta(&SpaceTimePoint::new(0.0, vec![0.4; n as usize]), &p), eta0(&[0.4; 3][..n as usize], &p));
        }
    }

    #[test]
    fn rho_shape() {
        let p = p1();
        assert_eq!(rho(0.3, &p), 1.0);
        assert_eq!(rho(1.5, &p), 0.0);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let tau = 0.5 + 0.5 * i as f64 / 1000.0;
            let v = rho(tau, &p);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!((rho(0.75, &p) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rho_derivative_matches_finite_difference() {
        for n in 1..=3u32 {
            let p = TestFunctionParams::new(n, 0.0).unwrap();
            for tau in [0.55, 0.6, 0.75, 0.9, 0.97] {
                let h = 1e-6;
                let fd = (rho(tau + h, &p) - rho(tau - h, &p)) / (2.0 * h);
                assert!((fd - rho_derivative(tau, &p)).abs() < 1e-6, "n={n} tau={tau}");
            }
        }
    }

    #[test]
    fn rho_flatness_constant_is_stable() {
        for n in 1..=3u32 {
            let p = TestFunctionParams::new(n, 0.0).unwrap();
            let a = rho_flatness_constant(&p, 100_000);
            let b = rho_flatness_constant(&p, 200_000);
            assert!(a.is_finite() && a > 0.0);
            assert!((a - b).abs() / a < 1e-3, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn phi_psi_chi_examples() {
        let p = p1();
        for r in [0.0, 1.0, 10.0, 100.0] {
            let q = p.with_r(r);
            let o = SpaceTimePoint::new(0.0, vec![0.0]);
            assert!((phi_r(&o, &q) - (1.0 - p.c0)).abs() < 1e-15);
            assert_eq!(psi_r(&o, &q), 0.0);
            assert_eq!(phi_r(&SpaceTimePoint::new(r + 1.0, vec![0.3]), &q), 0.0);
            assert_eq!(phi_r(&SpaceTimePoint::new(r + 5.0, vec![0.3]), &q), 0.0);
            assert_eq!(chi_r(r + 1.0, &q), 0.0);
            assert_eq!(chi_r(r + 0.5, &q), 1.0);
        }
    }

    #[test]
    fn phi_r_dt_matches_finite_difference() {
        let p = TestFunctionParams::new(1, 3.0).unwrap();
        for (t, x) in [(0.5, 0.2), (2.5, 1.0), (3.1, -4.0), (3.9, 0.0)] {
            let h = 1e-6;
            let fd = (phi_r(&SpaceTimePoint::new(t + h, vec![x]), &p)
                - phi_r(&SpaceTimePoint::new(t - h, vec![x]), &p))
                / (2.0 * h);
            assert!((fd - phi_r_dt(&SpaceTimePoint::new(t, vec![x]), &p)).abs() < 1e-8);
        }
    }

    #[test]
    fn phi_r_monotone_outside_eta_peak() {
        let p = p1();
        let peak = eta_peak_radius(&p);
        assert!(peak > 0.6 && peak < 0.65);
        let rs: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
        for rad in [0.5, 3.0, 20.0, 100.0] {
            for theta in [0.0, 0.3, 0.9, 1.5] {
                let pt = SpaceTimePoint::new(rad * f64::sin(theta), vec![rad * f64::cos(theta)]);
                // monotone while the scaled radius stays beyond the peak of η
                let valid: Vec<f64> = rs.iter().copied().filter(|r| rad / (r + 1.0) >= peak).collect();
                assert!(phi_r_nondecreasing(&pt, &p, &valid), "rad={rad} theta={theta}");
            }
        }
        // inside the peak radius φ_r decreases as r grows
        let pt = SpaceTimePoint::new(0.0, vec![0.3]);
        assert!(!phi_r_nondecreasing(&pt, &p, &[0.0, 1.0]));
        assert!(eta0(&[peak], &p) > eta0(&[0.0], &p));
    }

    #[test]
    fn lemma14_origin_ratio_matches_closed_form() {
        let profile = RadialProfile::algebraic(2.0, 0.0);
        let v = half_laplacian(|y| profile.eval(y), &[0.0], &[]).unwrap();
        assert!((v.value / lemma14_rhs(1, 2.0, 0.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lemma14_branches_pass() {
        for q in [0.5, 1.0, 2.0] {
            let v = verify_lemma14(q, 1e3, 4).unwrap();
            assert!(v.pass, "{v:?}");
        }
    }

    #[test]
    fn lemma23_precondition_and_stability() {
        assert!(lemma23_ratio(2.0, 1.0, 1.5).is_err());
        assert!(lemma23_ratio(2.0, 0.5, 0.0).is_err());
        let r1 = lemma23_ratio(2.0, 1.0, 0.0).unwrap();
        let r2 = lemma23_ratio(2.0, 1e3, 0.0).unwrap();
        assert!(r1.is_finite() && r2 <= r1);
    }

    #[test]
    fn prop21_origin_and_small_radius() {
        let p = p1();
        let v = half_laplacian_eta(&SpaceTimePoint::new(0.0, vec![0.0]), &p).unwrap();
        assert!(v.value.abs() < 1e-6);
        let pt = SpaceTimePoint::new(0.0, vec![1e-2]);
        let v = half_laplacian_eta(&pt, &p).unwrap();
        assert!((v.value.abs() / prop21_rhs(&pt, 1)).is_finite());
    }

    #[test]
    fn eq14_vanishes_beyond_support_and_at_origin() {
        let p = TestFunctionParams::new(1, 2.0).unwrap();
        let beyond = SpaceTimePoint::new(3.5, vec![1.0]);
        assert_eq!(eq14_lhs(&beyond, &p).unwrap().value, 0.0);
        assert_eq!(eq14_rhs(&beyond, &p), 0.0);
        let o = SpaceTimePoint::new(0.0, vec![0.0]);
        assert!(eq14_lhs(&o, &p).unwrap().value < 1e-7);
        assert_eq!(eq14_rhs(&o, &p), 0.0);
    }

    #[test]
    fn psi_integral_bounded_by_phi() {
        let p = TestFunctionParams::new(1, 20.0).unwrap();
        for (t, x) in [(1.0, 0.5), (5.0, 10.0), (15.0, 2.0), (0.0, 30.0)] {
            let pt = SpaceTimePoint::new(t, vec![x]);
            let lhs = psi_r_integral(&pt, &p, 20.0);
            assert!(lhs <= INTEGRAL_BOUND_CEILING_N1 * phi_r(&pt, &p), "({t},{x})");
        }
    }

    #[test]
    fn verdict_serializes_with_external_keys() {
        let v = EstimateVerdict {
            estimate_id: "x".into(),
            fitted_constant: 1.5,
            sample_count: 3,
            max_ratio_location: vec![0.0, 1.0],
            refinement_drift: 0.0,
            unresolved: 0,
            pass: true,
        };
        let j: serde_json::Value = serde_json::from_str(&v.to_json()).unwrap();
        for k in ["estimate_id", "fitted_constant", "samples", "worst_point", "pass"] {
            assert!(j.get(k).is_some(), "{k}");
        }
    }
}
