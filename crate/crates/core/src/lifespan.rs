//! ε-sweeps over the solver, fits of measured lifespans against the
//! critical, subcritical and transport laws, and the ordinary differential
//! inequality diagnostic along a computed solution.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::solver::{integrate, BlowupStatus, SimConfig, SolutionTrace};
use crate::testfn::{psi_r, psi_r_integral, SpaceTimePoint, TestFunctionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    /// log T = a + C ε^{−1/n}
    CriticalExp,
    /// log T = a + C log ε, compared with 1/(n − 1/(p−1))
    SubcriticalPower,
    /// log T = a + C log ε, compared with −(p−1)
    AdvectionPower,
}

impl Law {
    pub fn name(&self) -> &'static str {
        match self {
            Law::CriticalExp => "critical_exp",
            Law::SubcriticalPower => "subcritical_power",
            Law::AdvectionPower => "advection_power",
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Law {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "critical_exp" => Ok(Law::CriticalExp),
            "subcritical_power" => Ok(Law::SubcriticalPower),
            "advection_power" => Ok(Law::AdvectionPower),
            other => Err(Error::Config(format!("unknown law '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub base_sim: SimConfig,
    pub law: Law,
    pub parallel_width: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base_sim.validate()?;
        if self.epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Config("sweep epsilons must be positive".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("sweep epsilons must be sorted descending".into()));
        }
        if self.parallel_width == 0 {
            return Err(Error::Config("parallel width must be at least 1".into()));
        }
        let n = self.base_sim.grid.n as f64;
        let p = self.base_sim.p;
        let critical = (n + 1.0) / n;
        match self.law {
            Law::CriticalExp if (p - critical).abs() > 1e-12 => Err(Error::Config(format!(
                "critical law needs p = (n+1)/n = {critical}, got {p}"
            ))),
            Law::SubcriticalPower if !(p > 1.0 && p < critical) => Err(Error::Config(format!(
                "subcritical law needs 1 < p < {critical}, got {p}"
            ))),
            Law::AdvectionPower if self.base_sim.grid.n != 1 => {
                Err(Error::Config("the transport law is one-dimensional".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanRecord {
    pub epsilon: f64,
    pub p: f64,
    pub n: usize,
    pub t_num: f64,
    pub status: BlowupStatus,
    pub dt: f64,
    pub points: usize,
    pub half_width: f64,
    pub threshold: f64,
    pub drift: Option<f64>,
}

impl LifespanRecord {
    pub fn resolved(&self) -> bool {
        self.status == BlowupStatus::BlewUp && self.t_num.is_finite() && self.t_num > 0.0
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.epsilon,
            self.p,
            self.n,
            self.t_num,
            self.status,
            self.dt,
            self.points,
            self.half_width,
            self.threshold,
            self.drift.map(|d| d.to_string()).unwrap_or_default()
        )
    }
}

pub const CSV_HEADER: &str = "epsilon,p,n,T_num,status,dt,N,L,M,drift";

/// Parses a CSV written by `export`.
pub fn parse_records(text: &str) -> Result<Vec<LifespanRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Config(format!("expected header '{CSV_HEADER}'")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = i + 2;
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 10 {
            return Err(Error::Config(format!("line {row}: expected 10 columns, got {}", cols.len())));
        }
        let num = |k: usize| -> Result<f64> {
            cols[k]
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("line {row}: bad number '{}'", cols[k])))
        };
        let int = |k: usize| -> Result<usize> {
            cols[k]
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("line {row}: bad integer '{}'", cols[k])))
        };
        out.push(LifespanRecord {
            epsilon: num(0)?,
            p: num(1)?,
            n: int(2)?,
            t_num: num(3)?,
            status: cols[4].parse()?,
            dt: num(5)?,
            points: int(6)?,
            half_width: num(7)?,
            threshold: num(8)?,
            drift: if cols[9].is_empty() { None } else { Some(num(9)?) },
        });
    }
    Ok(out)
}

fn run_one(base: &SimConfig, eps: f64) -> LifespanRecord {
    let cfg = SimConfig {
        epsilon: eps,
        snapshot_stride: 0,
        ..base.clone()
    };
    let mut record = LifespanRecord {
        epsilon: eps,
        p: cfg.p,
        n: cfg.grid.n,
        t_num: f64::NAN,
        status: BlowupStatus::Unresolved,
        dt: cfg.dt,
        points: cfg.grid.points,
        half_width: cfg.grid.half_width,
        threshold: cfg.blowup_threshold,
        drift: None,
    };
    // a failing run is flagged, never fatal for the sweep
    if let Ok((_, result)) = integrate(&cfg) {
        record.t_num = result.t_num;
        record.status = result.status;
        record.drift = result.resolution_check;
    }
    record
}

/// One record per ε in the configured order, each with the solver's
/// confirmation rerun. Runs execute on a pool of `parallel_width` threads.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<LifespanRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel_width)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        config
            .epsilons
            .par_iter()
            .map(|&eps| run_one(&config.base_sim, eps))
            .collect()
    }))
}

/// A linearized fit y = offset + c·x.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: Law,
    pub c: f64,
    pub offset: f64,
    pub r_squared: f64,
    /// (x, y) in the linearized coordinates, in input order.
    pub data: Vec<(f64, f64)>,
    pub residuals: Vec<f64>,
    pub theory_exponent: Option<f64>,
    /// Offset raised by the largest residual, so every point lies under
    /// offset + c·x.
    pub envelope_offset: Option<f64>,
    pub envelope_holds: Option<bool>,
    /// The power-law fit of the same data, reported next to the critical fit.
    pub alternative: Option<Box<FitResult>>,
}

impl FitResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit results serialize")
    }
}

fn least_squares(data: &[(f64, f64)]) -> Result<(f64, f64, f64, Vec<f64>)> {
    let m = data.len() as f64;
    let mx = data.iter().map(|d| d.0).sum::<f64>() / m;
    let my = data.iter().map(|d| d.1).sum::<f64>() / m;
    let sxx: f64 = data.iter().map(|d| (d.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(Error::DegenerateFit("abscissae do not vary".into()));
    }
    let c = sxy / sxx;
    let offset = my - c * mx;
    let residuals: Vec<f64> = data.iter().map(|d| d.1 - (offset + c * d.0)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = data.iter().map(|d| (d.1 - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    if !c.is_finite() || !offset.is_finite() {
        return Err(Error::DegenerateFit("non-finite fit parameters".into()));
    }
    Ok((c, offset, r_squared, residuals))
}

fn check_points(points: &[(f64, f64)], min_points: usize) -> Result<()> {
    if points.len() < min_points {
        return Err(Error::DegenerateFit(format!(
            "need at least {min_points} resolved points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(e, t)| !(*e > 0.0 && *t > 0.0) || !e.is_finite() || !t.is_finite()) {
        return Err(Error::DegenerateFit("epsilons and lifespans must be positive and finite".into()));
    }
    Ok(())
}

fn check_decade(points: &[(f64, f64)]) -> Result<()> {
    let hi = points.iter().map(|p| p.0).fold(f64::MIN, f64::max);
    let lo = points.iter().map(|p| p.0).fold(f64::MAX, f64::min);
    if (hi / lo).log10() < 1.0 - 1e-12 {
        return Err(Error::DegenerateFit(format!(
            "epsilon range spans {:.3} decades, need 1",
            (hi / lo).log10()
        )));
    }
    Ok(())
}

/// log T = offset + c·log ε on (ε, T) pairs.
pub fn fit_power_law(points: &[(f64, f64)], model: Law, theory_exponent: Option<f64>) -> Result<FitResult> {
    check_points(points, 2)?;
    let data: Vec<(f64, f64)> = points.iter().map(|(e, t)| (e.ln(), t.ln())).collect();
    let (c, offset, r_squared, residuals) = least_squares(&data)?;
    Ok(FitResult {
        model,
        c,
        offset,
        r_squared,
        data,
        residuals,
        theory_exponent,
        envelope_offset: None,
        envelope_holds: None,
        alternative: None,
    })
}

/// log T = a + C·ε^{−1/n} with the residual-inflated envelope and the
/// power-law fit alongside.
pub fn fit_critical_points(points: &[(f64, f64)], n: usize) -> Result<FitResult> {
    check_points(points, 4)?;
    check_decade(points)?;
    let nf = n as f64;
    let data: Vec<(f64, f64)> = points.iter().map(|(e, t)| (e.powf(-1.0 / nf), t.ln())).collect();
    let (c, offset, r_squared, residuals) = least_squares(&data)?;
    let lift = residuals.iter().cloned().fold(0.0, f64::max);
    let envelope = offset + lift;
    let holds = data.iter().all(|(x, y)| *y <= envelope + c * x + 1e-12 * y.abs().max(1.0));
    let alternative = fit_power_law(points, Law::AdvectionPower, (n == 1).then_some(-1.0))?;
    Ok(FitResult {
        model: Law::CriticalExp,
        c,
        offset,
        r_squared,
        data,
        residuals,
        theory_exponent: None,
        envelope_offset: Some(envelope),
        envelope_holds: Some(holds),
        alternative: Some(Box::new(alternative)),
    })
}

fn resolved_points(records: &[LifespanRecord]) -> Vec<(f64, f64)> {
    records.iter().filter(|r| r.resolved()).map(|r| (r.epsilon, r.t_num)).collect()
}

pub fn fit_critical(records: &[LifespanRecord], n: usize) -> Result<FitResult> {
    fit_critical_points(&resolved_points(records), n)
}

/// 1/(n − 1/(p−1)).
pub fn subcritical_exponent(n: usize, p: f64) -> f64 {
    1.0 / (n as f64 - 1.0 / (p - 1.0))
}

pub fn fit_subcritical_points(points: &[(f64, f64)], n: usize, p: f64) -> Result<FitResult> {
    let nf = n as f64;
    if !(p > 1.0 && p < (nf + 1.0) / nf) {
        return Err(Error::Domain(format!("subcritical range is 1 < p < {}, got {p}", (nf + 1.0) / nf)));
    }
    check_points(points, 4)?;
    check_decade(points)?;
    fit_power_law(points, Law::SubcriticalPower, Some(subcritical_exponent(n, p)))
}

pub fn fit_subcritical(records: &[LifespanRecord], n: usize, p: f64) -> Result<FitResult> {
    fit_subcritical_points(&resolved_points(records), n, p)
}

/// Writes `lifespan.csv`, and per fit `fit_<law>.json` plus the plot-ready
/// `fit_<law>.dat` (linearized x and y columns). Returns the written paths.
pub fn export(records: &[LifespanRecord], fits: &[FitResult], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in records {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    let path = dir.join("lifespan.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    for fit in fits {
        let path = dir.join(format!("fit_{}.json", fit.model));
        fs::write(&path, fit.to_json() + "\n").map_err(|e| Error::io(&path, e))?;
        written.push(path);
        let mut dat = String::new();
        for (x, y) in &fit.data {
            dat.push_str(&format!("{x} {y}\n"));
        }
        let path = dir.join(format!("fit_{}.dat", fit.model));
        fs::write(&path, dat).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FubiniCheck {
    pub big_r: f64,
    pub r_first: f64,
    pub tx_first: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdiTrace {
    pub epsilon: f64,
    /// 0 followed by the requested R values.
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub big_y: Vec<f64>,
    pub big_y_prime: Vec<f64>,
    /// Smallest C with ε + Y ≤ C((R+1)Y′)^{n/(n+1)} on the usable points.
    pub fitted_constant: Option<f64>,
    /// Grid points dropped from the fit because Y′ ≤ 0.
    pub excluded: usize,
    /// Y(R) − ((ε^{−1/n} − C̃ log(R+1))^{−n} − ε) with C̃ = C^{−(n+1)/n}/n,
    /// where the bracket is positive.
    pub closing_margins: Vec<f64>,
    pub fubini: Option<FubiniCheck>,
}

impl OdiTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("odi traces serialize")
    }

    pub fn closing_bound_holds(&self) -> bool {
        self.closing_margins.iter().all(|m| *m >= -1e-9)
    }
}

/// Relative tolerance of the r-integral in Y.
pub const ODI_REL_TOL: f64 = 1e-6;

/// Space-time weights for ∬|u|^{(n+1)/n}·g dx dt by the trapezoid rule over
/// the snapshot times up to `horizon`.
struct SpaceTimeMass {
    n: usize,
    points: Vec<(SpaceTimePoint, f64)>,
}

impl SpaceTimeMass {
    fn new(trace: &SolutionTrace, horizon: f64) -> Result<Self> {
        let snaps: Vec<_> = trace.snapshots.iter().filter(|s| s.time <= horizon * (1.0 + 1e-12)).collect();
        if snaps.len() < 2 {
            return Err(Error::Domain("diagnostic needs at least two snapshots before the horizon".into()));
        }
        let grid = snaps[0].field.grid;
        let n = grid.n;
        let power = (n as f64 + 1.0) / n as f64;
        let vol = grid.cell_volume();
        let mut points = Vec::new();
        for (j, snap) in snaps.iter().enumerate() {
            let left = if j > 0 { snap.time - snaps[j - 1].time } else { 0.0 };
            let right = if j + 1 < snaps.len() { snaps[j + 1].time - snap.time } else { 0.0 };
            let wt = 0.5 * (left + right);
            for (i, u) in snap.field.values.iter().enumerate() {
                let m = u.norm().powf(power) * vol * wt;
                if m > 0.0 {
                    let c = grid.coords(i);
                    points.push((SpaceTimePoint::new(snap.time, c[..n].to_vec()), m));
                }
            }
        }
        points.sort_by(|a, b| a.0.t.total_cmp(&b.0.t));
        Ok(Self { n, points })
    }

    /// Points with t < r+1, the time support of ψ_r.
    fn supported(&self, r: f64) -> &[(SpaceTimePoint, f64)] {
        let end = self.points.partition_point(|(pt, _)| pt.t < r + 1.0);
        &self.points[..end]
    }

    fn y(&self, r: f64) -> f64 {
        let params = TestFunctionParams::new(self.n as u32, r).expect("r >= 0");
        ordered_sum(self.supported(r), |(pt, m)| m * psi_r(pt, &params))
    }
}

/// Parallel sum over fixed chunks, added in order so the result does not
/// depend on scheduling.
fn ordered_sum<T: Sync, F: Fn(&T) -> f64 + Sync>(items: &[T], f: F) -> f64 {
    let partial: Vec<f64> = items.par_chunks(1024).map(|c| c.iter().map(&f).sum::<f64>()).collect();
    partial.iter().sum()
}

/// y(r) = ∬|u|^{(n+1)/n}ψ_r, Y(R) = ∫₀^R y(r)/(r+1) dr, Y′ by centered
/// differences on the R grid, and the fitted ODI constant. The time
/// integral runs over the snapshots of `trace`; `r_grid` must be increasing,
/// positive and keep R+1 within the last snapshot time so the test
/// functions are supported inside the trace.
pub fn odi_diagnostic(trace: &SolutionTrace, epsilon: f64, r_grid: &[f64]) -> Result<OdiTrace> {
    if r_grid.len() < 2 || r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("R grid must be positive, increasing, with two or more points".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let horizon = trace.snapshots.last().map(|s| s.time).unwrap_or(0.0);
    let r_max = *r_grid.last().unwrap();
    if r_max + 1.0 > horizon * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("R = {r_max} needs the trace to reach {}, it ends at {horizon}", r_max + 1.0)));
    }
    let mass = SpaceTimeMass::new(trace, r_max + 1.0)?;
    let n = mass.n as f64;

    let mut r = vec![0.0];
    r.extend_from_slice(r_grid);
    let y: Vec<f64> = r.iter().map(|&ri| mass.y(ri)).collect();
    let pieces = quadrature::integrate_by_interval(|s| mass.y(s) / (s + 1.0), &r, ODI_REL_TOL, 1e-300);
    let mut big_y = vec![0.0];
    for piece in pieces {
        big_y.push(big_y.last().unwrap() + piece.value);
    }
    let k = r.len();
    let big_y_prime: Vec<f64> = (0..k)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(k - 1));
            (big_y[b] - big_y[a]) / (r[b] - r[a])
        })
        .collect();

    let e = n / (n + 1.0);
    let mut fitted: Option<f64> = None;
    let mut excluded = 0;
    for i in 1..k {
        if !(big_y_prime[i] > 0.0) {
            excluded += 1;
            continue;
        }
        let ratio = (epsilon + big_y[i]) / ((r[i] + 1.0) * big_y_prime[i]).powf(e);
        fitted = Some(fitted.map_or(ratio, |c: f64| c.max(ratio)));
    }

    let mut closing_margins = Vec::new();
    if let Some(c) = fitted.filter(|c| *c > 0.0 && epsilon > 0.0) {
        let c_tilde = c.powf(-(n + 1.0) / n) / n;
        for i in 0..k {
            let bracket = epsilon.powf(-1.0 / n) - c_tilde * (r[i] + 1.0).ln();
            if bracket > 0.0 {
                closing_margins.push(big_y[i] - (bracket.powf(-n) - epsilon));
            }
        }
    }

    let params = TestFunctionParams::new(mass.n as u32, r_max)?;
    let tx_first = ordered_sum(mass.supported(r_max), |(pt, m)| m * psi_r_integral(pt, &params, r_max));
    let r_first = big_y[k - 1];
    let scale = r_first.abs().max(tx_first.abs());
    let fubini = Some(FubiniCheck {
        big_r: r_max,
        r_first,
        tx_first,
        relative_gap: if scale > 0.0 { (r_first - tx_first).abs() / scale } else { 0.0 },
    });

    Ok(OdiTrace {
        epsilon,
        r,
        y,
        big_y,
        big_y_prime,
        fitted_constant: fitted,
        excluded,
        closing_margins,
        fubini,
    })
}

/// Geometric R grid with `count` points on [lo, hi].
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * ratio.powi(i as i32)).collect()
}
