//! Pseudospectral integrator for i∂ₜu + (−Δ)^{1/2}u = |u|^p on a periodic
//! grid, written as ∂ₜu = i(−Δ)^{1/2}u − i|u|^p.
//!
//! The linear part is applied exactly in Fourier space (multiplier e^{iτ|ξ|});
//! the nonlinear part is advanced by the classical fourth-order
//! integrating-factor Runge–Kutta scheme. The state is kept in Fourier space
//! between steps.

use std::fmt;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraclap::FracLaplacian;
use crate::grid::{FftPlan, GridSpec, ScalarField};
use crate::testfn::{phi_r, phi_r_dt, SpaceTimePoint, TestFunctionParams};

/// Built-in initial profiles f with Re f = 0 and −Im f > 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitialProfile {
    /// f = −i e^{−|x|²}
    Gaussian,
    /// f = −i (1+|x|²)^{−(n+1)}
    Lorentzian,
}

impl InitialProfile {
    /// −Im f at a point.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            InitialProfile::Gaussian => (-r2).exp(),
            InitialProfile::Lorentzian => (1.0 + r2).powi(-(x.len() as i32 + 1)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialProfile::Gaussian => "gaussian",
            InitialProfile::Lorentzian => "lorentzian",
        }
    }
}

impl fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for InitialProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(InitialProfile::Gaussian),
            "lorentzian" => Ok(InitialProfile::Lorentzian),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub p: f64,
    pub epsilon: f64,
    pub profile: InitialProfile,
    /// Largest time step; steps shrink near blowup (see `step_control`).
    pub dt: f64,
    pub t_max: f64,
    pub blowup_threshold: f64,
    /// Keep every k-th state as a snapshot; 0 keeps none.
    pub snapshot_stride: usize,
    /// Step size is capped by step_control / sup|u|^{p−1}.
    pub step_control: f64,
    /// false runs the linear flow only.
    pub nonlinear: bool,
    /// 2/3-rule mask on the nonlinear term.
    pub dealias: bool,
}

impl SimConfig {
    pub fn new(grid: GridSpec, p: f64, epsilon: f64, dt: f64, t_max: f64) -> Self {
        Self {
            grid,
            p,
            epsilon,
            profile: InitialProfile::Gaussian,
            dt,
            t_max,
            blowup_threshold: 1e6,
            snapshot_stride: 0,
            step_control: 0.02,
            nonlinear: true,
            dealias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(Error::Config(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.dt > 0.0 && self.t_max > 0.0) {
            return Err(Error::Config("dt and t_max must be positive".into()));
        }
        if !(self.blowup_threshold > 0.0) || !(self.step_control > 0.0) {
            return Err(Error::Config("threshold and step control must be positive".into()));
        }
        Ok(())
    }

    /// Rerun configuration for the resolution audit: dt/2 and twice the
    /// points on the same domain.
    pub fn refined(&self) -> Result<Self> {
        let grid = GridSpec::new(self.grid.n, self.grid.half_width, self.grid.points * 2)?;
        Ok(Self {
            grid,
            dt: self.dt / 2.0,
            step_control: self.step_control / 2.0,
            snapshot_stride: self.snapshot_stride * 2,
            ..self.clone()
        })
    }
}

/// u₀ = ε f for a built-in profile.
pub fn make_initial_data(config: &SimConfig) -> Result<ScalarField> {
    config.validate()?;
    let eps = config.epsilon;
    let profile = config.profile;
    let u0 = config
        .grid
        .sample(|x| Complex64::new(0.0, -eps * profile.magnitude(x)));
    check_sign_condition(&u0, eps > 0.0)?;
    Ok(u0)
}

/// Re u₀ ≡ 0 and −Im u₀ ≥ 0 everywhere, strictly positive somewhere when
/// `nontrivial`. Samples where a positive profile underflows to zero are
/// accepted.
pub fn check_sign_condition(u0: &ScalarField, nontrivial: bool) -> Result<()> {
    if u0.values.iter().any(|z| z.re != 0.0 || z.im > 0.0 || !z.im.is_finite()) {
        return Err(Error::Domain(
            "initial data must satisfy Re u0 = 0 and -Im u0 > 0".into(),
        ));
    }
    if nontrivial && u0.values.iter().all(|z| z.im == 0.0) {
        return Err(Error::Domain("initial data vanish identically".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub field: ScalarField,
}

#[derive(Debug, Clone, Default)]
pub struct SolutionTrace {
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl SolutionTrace {
    /// Spacing of the snapshots if they are uniform to 1e−9 relative.
    pub fn uniform_snapshot_spacing(&self) -> Option<f64> {
        if self.snapshots.len() < 2 {
            return None;
        }
        let d = self.snapshots[1].time - self.snapshots[0].time;
        let uniform = self.snapshots.windows(2).all(|w| {
            ((w[1].time - w[0].time) - d).abs() <= 1e-9 * d
        });
        uniform.then_some(d)
    }

    /// Whitespace-separated `time sup_norm l2_norm` lines.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# time sup_norm l2_norm")?;
        for i in 0..self.times.len() {
            writeln!(w, "{:.12e} {:.12e} {:.12e}", self.times[i], self.sup_norms[i], self.l2_norms[i])?;
        }
        Ok(())
    }

    /// Writes the text trace and one binary field file per snapshot into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("trace.txt");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.write_text(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(&path, e))?;
        for (i, s) in self.snapshots.iter().enumerate() {
            s.field.save(&dir.join(format!("snapshot_{i:05}.bin")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupStatus {
    BlewUp,
    SurvivedToTmax,
    Unresolved,
}

impl fmt::Display for BlowupStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlowupStatus::BlewUp => "blew_up",
            BlowupStatus::SurvivedToTmax => "survived_to_tmax",
            BlowupStatus::Unresolved => "unresolved",
        })
    }
}

impl std::str::FromStr for BlowupStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blew_up" => Ok(BlowupStatus::BlewUp),
            "survived_to_tmax" => Ok(BlowupStatus::SurvivedToTmax),
            "unresolved" => Ok(BlowupStatus::Unresolved),
            other => Err(Error::Config(format!("unknown status '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupResult {
    pub status: BlowupStatus,
    /// Last time with sup-norm below the threshold.
    pub t_num: f64,
    /// |T_num − T_num(refined)| / T_num(refined), when a rerun was made.
    pub resolution_check: Option<f64>,
}

/// Allowed relative change of T_num under the (dt/2, 2N) rerun.
pub const RESOLUTION_TOLERANCE: f64 = 0.05;

/// Fourier-space propagator for one configuration.
pub struct Propagator {
    grid: GridSpec,
    plan: FftPlan,
    freq: Vec<f64>,
    mask: Vec<f64>,
    p: f64,
    nonlinear: bool,
    scratch: Vec<Complex64>,
}

impl Propagator {
    pub fn new(config: &SimConfig) -> Self {
        let grid = config.grid;
        let freq = (0..grid.len()).map(|i| grid.frequency_norm_sqr(i).sqrt()).collect();
        let cutoff = grid.points / 3;
        let mask = (0..grid.len())
            .map(|i| {
                if !config.dealias {
                    return 1.0;
                }
                let idx = grid.unravel(i);
                let keep = (0..grid.n).all(|a| {
                    let k = if idx[a] < grid.points / 2 { idx[a] } else { grid.points - idx[a] };
                    k <= cutoff
                });
                if keep {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            grid,
            plan: FftPlan::new(grid),
            freq,
            mask,
            p: config.p,
            nonlinear: config.nonlinear,
            scratch: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn to_fourier(&self, u: &ScalarField) -> Vec<Complex64> {
        let mut data = u.values.clone();
        self.plan.forward(&mut data);
        data
    }

    pub fn to_physical(&self, u_hat: &[Complex64]) -> ScalarField {
        let mut data = u_hat.to_vec();
        self.plan.inverse(&mut data);
        ScalarField {
            grid: self.grid,
            values: data,
        }
    }

    /// Multiplies by e^{iτ|ξ|}; τ may be negative.
    pub fn linear_step(&self, u_hat: &mut [Complex64], tau: f64) {
        for (z, k) in u_hat.iter_mut().zip(&self.freq) {
            *z *= Complex64::from_polar(1.0, tau * k);
        }
    }

    /// Dealiased transform of the real field |u|^p for physical `u`.
    pub fn nonlinearity_hat(&self, u: &[Complex64]) -> Vec<Complex64> {
        let p = self.p;
        let mut data: Vec<Complex64> = u.iter().map(|z| Complex64::new(z.norm().powf(p), 0.0)).collect();
        self.plan.forward(&mut data);
        for (z, m) in data.iter_mut().zip(&self.mask) {
            *z *= *m;
        }
        data
    }

    /// The nonlinearity exactly as the integrator sees it, in physical space.
    pub fn nonlinearity(&self, u: &ScalarField) -> ScalarField {
        self.to_physical(&self.nonlinearity_hat(&u.values))
    }

    /// −i·mask·F(|u|^p) from Fourier data.
    fn rhs(&mut self, u_hat: &[Complex64]) -> Vec<Complex64> {
        self.scratch.copy_from_slice(u_hat);
        self.plan.inverse(&mut self.scratch);
        let mut n_hat = self.nonlinearity_hat(&self.scratch);
        for z in n_hat.iter_mut() {
            *z = Complex64::new(z.im, -z.re);
        }
        n_hat
    }

    /// One integrating-factor RK4 step of size dt.
    pub fn step(&mut self, u_hat: &mut [Complex64], dt: f64) {
        if !self.nonlinear {
            self.linear_step(u_hat, dt);
            return;
        }
        let half: Vec<Complex64> = self.freq.iter().map(|k| Complex64::from_polar(1.0, 0.5 * dt * k)).collect();
        let k1 = self.rhs(u_hat);
        let a: Vec<Complex64> = (0..u_hat.len()).map(|i| half[i] * (u_hat[i] + 0.5 * dt * k1[i])).collect();
        let k2 = self.rhs(&a);
        let b: Vec<Complex64> = (0..u_hat.len()).map(|i| half[i] * u_hat[i] + 0.5 * dt * k2[i]).collect();
        let k3 = self.rhs(&b);
        let c: Vec<Complex64> = (0..u_hat.len())
            .map(|i| half[i] * half[i] * u_hat[i] + dt * half[i] * k3[i])
            .collect();
        let k4 = self.rhs(&c);
        for i in 0..u_hat.len() {
            let full = half[i] * half[i];
            u_hat[i] = full * u_hat[i] + dt / 6.0 * (full * k1[i] + 2.0 * half[i] * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

/// Runs one simulation from `u0` without the confirmation rerun.
pub fn integrate_from(config: &SimConfig, u0: &ScalarField) -> Result<(SolutionTrace, BlowupResult)> {
    config.validate()?;
    if u0.grid != config.grid {
        return Err(Error::Domain("initial field grid does not match config".into()));
    }
    let mut prop = Propagator::new(config);
    let mut u_hat = prop.to_fourier(u0);
    let mut trace = SolutionTrace::default();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut last_ok = 0.0;
    loop {
        let u = prop.to_physical(&u_hat);
        let sup = u.sup_norm();
        if !sup.is_finite() || sup >= config.blowup_threshold {
            return Ok((
                trace,
                BlowupResult {
                    status: BlowupStatus::BlewUp,
                    t_num: last_ok,
                    resolution_check: None,
                },
            ));
        }
        last_ok = t;
        trace.times.push(t);
        trace.sup_norms.push(sup);
        trace.l2_norms.push(u.l2_norm());
        if config.snapshot_stride > 0 && steps.is_multiple_of(config.snapshot_stride) {
            trace.snapshots.push(Snapshot { time: t, field: u });
        }
        if t >= config.t_max * (1.0 - 1e-12) {
            return Ok((
                trace,
                BlowupResult {
                    status: BlowupStatus::SurvivedToTmax,
                    t_num: t,
                    resolution_check: None,
                },
            ));
        }
        let mut dt = config.dt;
        if config.nonlinear && sup > 0.0 {
            dt = dt.min(config.step_control / sup.powf(config.p - 1.0));
        }
        dt = dt.min(config.t_max - t);
        prop.step(&mut u_hat, dt);
        t += dt;
        steps += 1;
    }
}

/// Simulates from the configured initial data; a blowup is confirmed by the
/// (dt/2, 2N) rerun and downgraded to `Unresolved` if T_num moves by more
/// than 5%.
pub fn integrate(config: &SimConfig) -> Result<(SolutionTrace, BlowupResult)> {
    let u0 = make_initial_data(config)?;
    let (trace, mut result) = integrate_from(config, &u0)?;
    if result.status == BlowupStatus::BlewUp {
        let fine = config.refined()?;
        let mut fine_cfg = fine;
        fine_cfg.snapshot_stride = 0;
        let (_, fine_result) = integrate_from(&fine_cfg, &make_initial_data(&fine_cfg)?)?;
        let drift = if fine_result.status == BlowupStatus::BlewUp && fine_result.t_num > 0.0 {
            (result.t_num - fine_result.t_num).abs() / fine_result.t_num
        } else {
            f64::INFINITY
        };
        result.resolution_check = Some(drift);
        if drift > RESOLUTION_TOLERANCE {
            result.status = BlowupStatus::Unresolved;
        }
    }
    Ok((trace, result))
}

fn test_function_field(grid: GridSpec, params: &TestFunctionParams, t: f64) -> (ScalarField, ScalarField) {
    let phi = grid.sample_real(|x| phi_r(&SpaceTimePoint::new(t, x.to_vec()), params));
    let dphi = grid.sample_real(|x| phi_r_dt(&SpaceTimePoint::new(t, x.to_vec()), params));
    (phi, dphi)
}

/// |LHS − RHS| of the weak identity tested against φ_r:
/// i∫u₀φ_r(0) + ∬N(u)φ_r − ∬u(−i∂ₜφ_r + (−Δ)^{1/2}φ_r), where N(u) is the
/// nonlinearity as the integrator applies it (|u|^p, dealiased when the
/// config says so; zero in linear mode). Time integrals use the trapezoid
/// rule on the uniformly spaced snapshots up to `horizon`, which must cover
/// the support t < r+1.
pub fn weak_form_residual(trace: &SolutionTrace, config: &SimConfig, r: f64, horizon: f64) -> Result<f64> {
    let spacing = trace
        .uniform_snapshot_spacing()
        .ok_or_else(|| Error::Domain("weak form needs uniformly spaced snapshots".into()))?;
    if r + 1.0 > horizon + 1e-12 {
        return Err(Error::Domain(format!(
            "test function support t < {} exceeds horizon {horizon}",
            r + 1.0
        )));
    }
    let last = trace.snapshots.last().map(|s| s.time).unwrap_or(0.0);
    if last < horizon - 1e-9 * horizon.max(1.0) {
        return Err(Error::Domain(format!("trace ends at {last} before horizon {horizon}")));
    }
    let n = config.grid.n as u32;
    let params = TestFunctionParams::new(n, r)?;
    let grid = config.grid;
    let half = FracLaplacian::new(grid, 0.5)?;
    let prop = Propagator::new(config);
    let vol = grid.cell_volume();

    let mut total = Complex64::new(0.0, 0.0);
    let u0 = &trace.snapshots[0].field;
    let (phi0, _) = test_function_field(grid, &params, 0.0);
    let initial: Complex64 = u0.values.iter().zip(&phi0.values).map(|(u, f)| u * f.re).sum::<Complex64>() * vol;
    total += Complex64::i() * initial;

    for (j, snap) in trace.snapshots.iter().enumerate() {
        if snap.time > horizon + 1e-9 * spacing {
            break;
        }
        let is_end = j == 0 || (snap.time - horizon).abs() <= 1e-9 * spacing.max(horizon);
        let weight = if is_end { 0.5 * spacing } else { spacing };
        let (phi, dphi) = test_function_field(grid, &params, snap.time);
        let dphi_half = half.apply(&phi)?;
        let forcing = if config.nonlinear {
            prop.nonlinearity(&snap.field)
        } else {
            ScalarField::zeros(grid)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..grid.len() {
            let test = Complex64::new(dphi_half.values[i].re, -dphi.values[i].re);
            acc += forcing.values[i].re * phi.values[i].re - snap.field.values[i] * test;
        }
        total += acc * vol * weight;
    }
    Ok(total.norm())
}

/// Space-time L² norm of (∂ₜ² − Δ)Im u + ∂ₜN(u) on the interior snapshots,
/// with centered differences in time and −Δ = |ξ|² spectrally.
pub fn wave_residual(trace: &SolutionTrace, config: &SimConfig) -> Result<f64> {
    let spacing = trace
        .uniform_snapshot_spacing()
        .ok_or_else(|| Error::Domain("wave residual needs uniformly spaced snapshots".into()))?;
    if trace.snapshots.len() < 3 {
        return Err(Error::Domain("wave residual needs at least three snapshots".into()));
    }
    let grid = config.grid;
    let laplace = FracLaplacian::new(grid, 1.0)?;
    let prop = Propagator::new(config);
    let imag = |f: &ScalarField| -> ScalarField {
        ScalarField {
            grid,
            values: f.values.iter().map(|z| Complex64::new(z.im, 0.0)).collect(),
        }
    };
    let forcing = |f: &ScalarField| -> ScalarField {
        if config.nonlinear {
            prop.nonlinearity(f)
        } else {
            ScalarField::zeros(grid)
        }
    };
    let snaps = &trace.snapshots;
    let mut sum = 0.0;
    for j in 1..snaps.len() - 1 {
        let b_prev = imag(&snaps[j - 1].field);
        let b = imag(&snaps[j].field);
        let b_next = imag(&snaps[j + 1].field);
        let lap_b = laplace.apply(&b)?;
        let n_prev = forcing(&snaps[j - 1].field);
        let n_next = forcing(&snaps[j + 1].field);
        let mut local = 0.0;
        for i in 0..grid.len() {
            let dtt = (b_next.values[i].re - 2.0 * b.values[i].re + b_prev.values[i].re) / (spacing * spacing);
            let dn = (n_next.values[i].re - n_prev.values[i].re) / (2.0 * spacing);
            local += (dtt + lap_b.values[i].re + dn).powi(2);
        }
        sum += local * grid.cell_volume() * spacing;
    }
    Ok(sum.sqrt())
}
