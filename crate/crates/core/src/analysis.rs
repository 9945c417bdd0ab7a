//! Error curves in `eps`, power-law fits, moment and interaction diagnostics,
//! and CSV/JSON reports.
//!
//! Report layout: `records.csv` has one row per (record, time) with columns
//! `eps,T,t,error,scenario,path,dt,delta,mass_drift`; `summary.json` holds a
//! [`Summary`] (named fits and named checks with tolerance and verdict).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::lab::{
    assemble_approx, evolve_exact_envelope, evolve_lognls, gauge_phase, EnvelopeSource, PacketSpec, PhaseMode,
    SemiclassicalProblem,
};
use crate::potentials::PotentialSpec;

/// Errors below this level are treated as scheme noise and left out of fits.
pub const FIT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// `||psi - phi||`: nonlinear (`alpha > 1`) against linear solution.
    Subcritical,
    /// `||phi - phi_app||`: linear solution against its coherent-state approximation.
    Linear,
    /// `||psi - psi_app||` at `alpha = 1`.
    Critical,
    /// `||psi - psi_1,app - psi_2,app||` for two packets.
    Superposition,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Subcritical => "subcritical",
            Scenario::Linear => "linear",
            Scenario::Critical => "critical",
            Scenario::Superposition => "superposition",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subcritical" => Ok(Scenario::Subcritical),
            "linear" => Ok(Scenario::Linear),
            "critical" => Ok(Scenario::Critical),
            "superposition" => Ok(Scenario::Superposition),
            _ => Err(Error::Format(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverPath {
    #[serde(rename = "y-frame")]
    MovingFrame,
    #[serde(rename = "lab")]
    Lab,
}

impl SolverPath {
    pub fn name(&self) -> &'static str {
        match self {
            SolverPath::MovingFrame => "y-frame",
            SolverPath::Lab => "lab",
        }
    }
}

impl FromStr for SolverPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "y-frame" => Ok(SolverPath::MovingFrame),
            "lab" => Ok(SolverPath::Lab),
            _ => Err(Error::Format(format!("unknown solver path {s:?}"))),
        }
    }
}

/// Errors of one scenario at one `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    pub scenario: Scenario,
    pub path: SolverPath,
    pub dt: f64,
    pub delta: f64,
    pub mass_drift: f64,
}

impl SweepRecord {
    /// Error at the sample closest to `t`.
    pub fn error_at(&self, t: f64) -> f64 {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.errors[k]
    }

    pub fn sup_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// How the reference envelope of the approximate solution is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxSource {
    /// Gaussian closure (Gaussian data only).
    #[default]
    Closure,
    /// Envelope PDE with the quadratic part of the potential.
    Pde,
}

/// Everything but `eps` that defines an error curve.
#[derive(Debug, Clone)]
pub struct SweepSetup {
    pub scenario: Scenario,
    pub potential: PotentialSpec,
    pub packets: Vec<PacketSpec>,
    pub lambda: f64,
    pub alpha: f64,
    pub horizon: f64,
    /// Times at which errors are recorded; the horizon is always added.
    pub times: Vec<f64>,
    pub dt: f64,
    /// When set, the field step is `min(dt, factor * eps)`.
    pub dt_eps_factor: Option<f64>,
    pub flow_dt: Option<f64>,
    pub delta: Option<f64>,
    pub source: ApproxSource,
}

impl SweepSetup {
    pub fn problem(&self, eps: f64) -> SemiclassicalProblem {
        let dt = match self.dt_eps_factor {
            Some(f) => self.dt.min(f * eps),
            None => self.dt,
        };
        let mut p = SemiclassicalProblem::new(eps, self.potential.clone(), self.packets.clone(), self.horizon, dt)
            .with_alpha(self.alpha)
            .with_lambda(self.lambda)
            .with_outputs(&self.output_times());
        p.flow_dt = self.flow_dt;
        p.delta = self.delta;
        p
    }

    fn output_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.times.iter().copied().filter(|&t| t > 0.0 && t < self.horizon).collect();
        t.push(self.horizon);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn path(&self) -> SolverPath {
        match self.scenario {
            Scenario::Superposition => SolverPath::Lab,
            _ => SolverPath::MovingFrame,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.scenario {
            Scenario::Superposition => {
                if self.packets.len() != 2 {
                    return Err(Error::param("superposition needs exactly two packets"));
                }
            }
            _ => {
                if self.packets.len() != 1 {
                    return Err(Error::param(format!("{} scenario needs exactly one packet", self.scenario)));
                }
            }
        }
        if self.scenario == Scenario::Subcritical && !(self.alpha > 1.0) {
            return Err(Error::param("subcritical scenario needs alpha > 1"));
        }
        if self.scenario == Scenario::Critical && self.alpha != 1.0 {
            return Err(Error::param("critical scenario needs alpha = 1"));
        }
        if self.source == ApproxSource::Closure && !self.potential.is_separable() {
            return Err(Error::param("the Gaussian closure needs a separable potential"));
        }
        Ok(())
    }
}

/// Errors of `setup` for every `eps`, computed in parallel.
pub fn error_curve(setup: &SweepSetup, eps_list: &[f64]) -> Result<Vec<SweepRecord>> {
    setup.validate()?;
    eps_list.par_iter().map(|&eps| sweep_point(setup, eps)).collect()
}

fn sweep_point(setup: &SweepSetup, eps: f64) -> Result<SweepRecord> {
    let problem = setup.problem(eps);
    problem.validate()?;
    let d = problem.dim();
    let mut record = SweepRecord {
        eps,
        horizon: setup.horizon,
        times: Vec::new(),
        errors: Vec::new(),
        scenario: setup.scenario,
        path: setup.path(),
        dt: problem.dt,
        delta: 0.0,
        mass_drift: 0.0,
    };
    match setup.scenario {
        Scenario::Subcritical => {
            let nonlinear = evolve_exact_envelope(&problem)?;
            let grid = nonlinear.run.final_field().grid().clone();
            let linear_problem = problem.clone().with_lambda(0.0).with_envelope_grid(grid);
            let linear = evolve_exact_envelope(&linear_problem)?;
            let coupling = problem.coupling();
            for ((t, u), v) in nonlinear.run.times.iter().zip(&nonlinear.run.snapshots).zip(&linear.run.snapshots) {
                let rot = Complex64::from_polar(1.0, gauge_phase(coupling, d, *t, eps));
                record.times.push(*t);
                record.errors.push(u.scaled(rot).l2_distance(v)?);
            }
            record.dt = nonlinear.run.report.dt;
            record.delta = nonlinear.run.report.delta;
            record.mass_drift = nonlinear.run.report.max_mass_drift.max(linear.run.report.max_mass_drift);
        }
        Scenario::Linear | Scenario::Critical => {
            let problem = if setup.scenario == Scenario::Linear { problem.with_lambda(0.0) } else { problem };
            let exact = evolve_exact_envelope(&problem)?;
            let reference = match setup.source {
                ApproxSource::Closure => None,
                ApproxSource::Pde => {
                    let env = exact.problem.clone().with_mode(crate::envelope::PotentialMode::Quadratic);
                    Some(crate::envelope::evolve_envelope(&env)?)
                }
            };
            for (k, (t, u)) in exact.run.times.iter().zip(&exact.run.snapshots).enumerate() {
                let approx = match &reference {
                    None => exact.closure.synthesize(*t, u.grid())?,
                    Some(run) => run.snapshots[k].clone(),
                };
                record.times.push(*t);
                record.errors.push(u.l2_distance(&approx)?);
            }
            record.dt = exact.run.report.dt;
            record.delta = exact.run.report.delta;
            record.mass_drift = exact.run.report.max_mass_drift;
        }
        Scenario::Superposition => {
            let trace = superposition_trace(&problem)?;
            record.times = trace.times;
            record.errors = trace.errors;
            record.dt = trace.dt;
            record.delta = trace.delta;
            record.mass_drift = trace.mass_drift;
        }
    }
    Ok(record)
}

/// Diagnostics of a two-packet lab run at its output times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionTrace {
    pub eps: f64,
    pub times: Vec<f64>,
    /// `||psi - psi_1,app - psi_2,app||`.
    pub errors: Vec<f64>,
    /// `|q_1(t) - q_2(t)|`.
    pub separation: Vec<f64>,
    /// `sqrt(eps)` times the larger packet width.
    pub packet_scale: Vec<f64>,
    /// `(1/eps) ||N_I||` evaluated on the approximate packets.
    pub interaction: Vec<f64>,
    pub dt: f64,
    pub delta: f64,
    pub mass_drift: f64,
}

/// Runs the lab solver for a two-packet problem and compares it with the sum
/// of the single-packet critical approximations.
pub fn superposition_trace(problem: &SemiclassicalProblem) -> Result<SuperpositionTrace> {
    if problem.packets.len() != 2 {
        return Err(Error::param("superposition needs exactly two packets"));
    }
    let lab = evolve_lognls(problem)?;
    let eps = problem.eps;
    let coupling = problem.coupling();
    let mode = PhaseMode::Critical { coupling };
    let mut trace = SuperpositionTrace {
        eps,
        times: Vec::new(),
        errors: Vec::new(),
        separation: Vec::new(),
        packet_scale: Vec::new(),
        interaction: Vec::new(),
        dt: lab.run.report.dt,
        delta: lab.run.report.delta,
        mass_drift: lab.run.report.max_mass_drift,
    };
    for (t, psi) in lab.run.times.iter().zip(&lab.run.snapshots) {
        let parts = lab
            .trajectories
            .iter()
            .zip(&lab.closures)
            .map(|(tr, cl)| assemble_approx(tr, &EnvelopeSource::Closure(cl), eps, mode, &lab.grid, *t))
            .collect::<Result<Vec<_>>>()?;
        let approx = parts[0].add(&parts[1])?;
        let q1 = lab.trajectories[0].state_at(*t).q;
        let q2 = lab.trajectories[1].state_at(*t).q;
        let sep = q1.iter().zip(&q2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let width = lab
            .closures
            .iter()
            .flat_map(|cl| cl.state_at(*t).a.into_iter().map(|a| 1.0 / a.re.sqrt()))
            .fold(0.0, f64::max);
        trace.times.push(*t);
        trace.errors.push(psi.l2_distance(&approx)?);
        trace.separation.push(sep);
        trace.packet_scale.push(eps.sqrt() * width);
        trace.interaction.push(interaction_norm(&parts[0], &parts[1], problem.lambda, 0.0)?);
    }
    Ok(trace)
}

/// Largest interaction norm at times where the packets are at least
/// `factor` packet scales apart, relative to the norm at closest approach.
/// `None` when no recorded time is that well separated.
pub fn separated_interaction_ratio(trace: &SuperpositionTrace, factor: f64) -> Option<f64> {
    let closest = (0..trace.times.len()).min_by(|&i, &j| trace.separation[i].total_cmp(&trace.separation[j]))?;
    let reference = trace.interaction[closest];
    trace
        .times
        .iter()
        .enumerate()
        .filter(|&(k, _)| trace.separation[k] >= factor * trace.packet_scale[k])
        .map(|(k, _)| trace.interaction[k] / reference)
        .reduce(f64::max)
}

/// Least-squares fit of `log error = slope log eps + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
}

/// Fits the errors at the `time_index`-th recorded time, ignoring errors below [`FIT_FLOOR`].
pub fn fit_slope(records: &[SweepRecord], time_index: usize) -> Result<SlopeFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records {
        let e = *r
            .errors
            .get(time_index)
            .ok_or_else(|| Error::param(format!("record at eps = {} has no time index {time_index}", r.eps)))?;
        if e.is_nan() || e < 0.0 {
            return Err(Error::DegenerateFit(format!("invalid error {e} at eps = {}", r.eps)));
        }
        if e >= FIT_FLOOR {
            xs.push(r.eps);
            ys.push(e);
        }
    }
    fit_power_law(&xs, &ys)
}

/// Ordinary least squares on `(log x, log y)`; needs at least three positive points.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::param("abscissae and ordinates differ in length"));
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} usable points; at least 3 above the {FIT_FLOOR:e} floor are needed",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit("power-law fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        eps_min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        eps_max: xs.iter().copied().fold(0.0, f64::max),
        points: xs.len(),
    })
}

/// `||y^beta f||_{L^2}` by grid quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Share of the squared integral coming from the outer 10% of each axis.
    pub outer_fraction: f64,
}

impl MomentEstimate {
    /// Unreliable when the outer region contributes more than 1%.
    pub fn is_reliable(&self) -> bool {
        self.outer_fraction <= 0.01
    }
}

pub fn moment_norm(field: &WaveField, beta: &[usize]) -> Result<MomentEstimate> {
    let grid = field.grid();
    if beta.len() != grid.dims() {
        return Err(Error::param("multi-index length must equal the dimension"));
    }
    if beta.iter().sum::<usize>() > 4 {
        return Err(Error::param("moment order above 4 is not supported"));
    }
    let shape = grid.shape();
    let mut x = vec![0.0; grid.dims()];
    let mut total = 0.0;
    let mut outer = 0.0;
    for (i, z) in field.values().iter().enumerate() {
        grid.point_into(i, &mut x);
        let w: f64 = x.iter().zip(beta).map(|(xj, &b)| xj.powi(2 * b as i32)).product();
        let v = w * z.norm_sqr();
        total += v;
        let idx = grid.unravel(i);
        let edge = idx.iter().zip(&shape).any(|(&m, &n)| 20 * m < n || 20 * (n - 1 - m) < n);
        if edge {
            outer += v;
        }
    }
    let dv = grid.cell_volume();
    Ok(MomentEstimate {
        value: (total * dv).sqrt(),
        outer_fraction: if total == 0.0 { 0.0 } else { outer / total },
    })
}

/// `g(z) = lambda z log(delta + |z|^2)`, with `g(0) = 0` when `delta = 0`.
fn log_term(lambda: f64, z: Complex64, delta: f64) -> Complex64 {
    let rho = delta + z.norm_sqr();
    if rho == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        z * (lambda * rho.ln())
    }
}

/// `(1/eps) ||N_I||` with `N_I = eps (g(psi_1 + psi_2) - g(psi_1) - g(psi_2))`.
pub fn interaction_norm(psi1: &WaveField, psi2: &WaveField, lambda: f64, delta: f64) -> Result<f64> {
    psi1.check_same_grid(psi2)?;
    if !(delta >= 0.0) {
        return Err(Error::param("delta must be >= 0"));
    }
    let sum: f64 = psi1
        .values()
        .iter()
        .zip(psi2.values())
        .map(|(&a, &b)| (log_term(lambda, a + b, delta) - (log_term(lambda, a, delta) + log_term(lambda, b, delta))).norm_sqr())
        .sum();
    Ok((sum * psi1.grid().cell_volume()).sqrt())
}

/// `2 |z2 - z1|^2 - |Im((z2 log|z2|^2 - z1 log|z1|^2) conj(z2 - z1))|`; never
/// negative. The imaginary part equals `Im(z1 conj z2) (log|z2|^2 - log|z1|^2)`,
/// which is how it is evaluated.
pub fn log_lipschitz_gap(z1: Complex64, z2: Complex64) -> f64 {
    let d = (z2 - z1).norm_sqr();
    let (r1, r2) = (z1.norm_sqr(), z2.norm_sqr());
    let im = if r1 == 0.0 || r2 == 0.0 {
        0.0
    } else {
        let cross = z1.im * z2.re - z1.re * z2.im;
        let dlog = if r1 <= r2 { ((r2 - r1) / r1).ln_1p() } else { -((r1 - r2) / r2).ln_1p() };
        (cross * dlog).abs()
    };
    2.0 * d - im
}

/// `values <= amplitude exp(rate t)` on the given samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpEnvelope {
    pub amplitude: f64,
    pub rate: f64,
}

impl ExpEnvelope {
    /// Single constant `C` with `values <= C exp(C t)`.
    pub fn constant(&self) -> f64 {
        self.amplitude.max(self.rate)
    }
}

/// Tightest envelope anchored at the first sample: amplitude `f(t_0)`, rate the
/// largest `log(f(t)/f(t_0)) / (t - t_0)`, floored at zero.
pub fn exponential_envelope(times: &[f64], values: &[f64]) -> Result<ExpEnvelope> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::param("need matching, nonempty samples"));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit("envelope fit needs positive finite values".into()));
    }
    let (t0, f0) = (times[0], values[0]);
    let mut rate = 0.0_f64;
    let mut amplitude = f0;
    for (&t, &f) in times.iter().zip(values).skip(1) {
        if t > t0 {
            rate = rate.max((f / f0).ln() / (t - t0));
        } else {
            amplitude = amplitude.max(f);
        }
    }
    Ok(ExpEnvelope { amplitude, rate })
}

/// Named fit in a report summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: SlopeFit,
}

/// Named scalar check with its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub fits: Vec<NamedFit>,
    pub checks: Vec<Check>,
    /// Informational scalars.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Records a finite metric; a non-finite one becomes a note.
    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        if value.is_finite() {
            self.metrics.insert(name, value);
        } else {
            self.notes.push(format!("{name} = {value}"));
        }
    }

    /// Adds a check that passes when `value` lies in `[lo, hi]`; missing bounds are open.
    pub fn check_range(&mut self, name: impl Into<String>, value: f64, lo: Option<f64>, hi: Option<f64>) {
        if lo.is_none() && hi.is_none() {
            return;
        }
        let tolerance = match (lo, hi) {
            (Some(l), Some(h)) => format!("in [{}, {}]", bound(l), bound(h)),
            (Some(l), None) => format!(">= {}", bound(l)),
            (None, Some(h)) => format!("<= {}", bound(h)),
            (None, None) => unreachable!(),
        };
        let pass = lo.is_none_or(|l| value >= l) && hi.is_none_or(|h| value <= h);
        self.checks.push(Check { name: name.into(), value, tolerance, pass });
    }
}

fn bound(x: f64) -> String {
    if x != 0.0 && !(1e-3..1e6).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";
const CSV_HEADER: &str = "eps,T,t,error,scenario,path,dt,delta,mass_drift";

pub fn write_records_csv<W: Write>(records: &[SweepRecord], w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        for (t, e) in r.times.iter().zip(&r.errors) {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e}",
                r.eps,
                r.horizon,
                t,
                e,
                r.scenario,
                r.path.name(),
                r.dt,
                r.delta,
                r.mass_drift
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Regroups rows into records (consecutive rows sharing every column but `t`
/// and `error`).
pub fn read_records_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut lines = BufReader::new(r).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Format(format!("records CSV must start with {CSV_HEADER:?}"))),
    }
    let num = |s: &str, line: usize| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Format(format!("line {line}: bad number {s:?}")))
    };
    let mut out: Vec<SweepRecord> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(Error::Format(format!("line {lineno}: expected 9 columns, got {}", cols.len())));
        }
        let row = SweepRecord {
            eps: num(cols[0], lineno)?,
            horizon: num(cols[1], lineno)?,
            times: vec![num(cols[2], lineno)?],
            errors: vec![num(cols[3], lineno)?],
            scenario: cols[4].parse()?,
            path: cols[5].parse()?,
            dt: num(cols[6], lineno)?,
            delta: num(cols[7], lineno)?,
            mass_drift: num(cols[8], lineno)?,
        };
        match out.last_mut() {
            Some(last)
                if last.eps == row.eps
                    && last.horizon == row.horizon
                    && last.scenario == row.scenario
                    && last.path == row.path
                    && last.dt == row.dt
                    && last.delta == row.delta
                    && last.mass_drift == row.mass_drift
                    && last.times.last().is_some_and(|&t| t < row.times[0]) =>
            {
                last.times.push(row.times[0]);
                last.errors.push(row.errors[0]);
            }
            _ => out.push(row),
        }
    }
    Ok(out)
}

/// Writes `records.csv` and `summary.json` into `dir`, creating it if needed.
pub fn emit_report(records: &[SweepRecord], summary: &Summary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_records_csv(records, fs::File::create(dir.join(RECORDS_FILE))?)?;
    let json = serde_json::to_string_pretty(summary)?;
    fs::write(dir.join(SUMMARY_FILE), json + "\n")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::lab::GaussianProfile;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn synthetic(eps: &[f64], f: impl Fn(f64) -> f64) -> Vec<SweepRecord> {
        eps.iter()
            .map(|&e| SweepRecord {
                eps: e,
                horizon: 1.0,
                times: vec![1.0],
                errors: vec![f(e)],
                scenario: Scenario::Critical,
                path: SolverPath::MovingFrame,
                dt: 1e-3,
                delta: 0.0,
                mass_drift: 0.0,
            })
            .collect()
    }

    #[test]
    fn exact_power_laws_are_recovered() {
        let eps = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3];
        let fit = fit_slope(&synthetic(&eps, |e| e.sqrt()), 0).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let fit = fit_slope(&synthetic(&eps, |e| 3.0 * e), 0).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert_eq!(fit.points, 5);
    }

    #[test]
    fn fits_reject_degenerate_data() {
        let eps = [1e-1, 5e-2, 2e-2];
        assert!(matches!(fit_slope(&synthetic(&eps, |_| 0.0), 0), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_slope(&synthetic(&eps[..2], |e| e), 0), Err(Error::DegenerateFit(_))));
        assert!(fit_slope(&synthetic(&eps, |_| -1.0), 0).is_err());
        // the floor drops points instead of failing while three remain
        let mixed = synthetic(&[1e-1, 5e-2, 2e-2, 1e-2], |e| if e < 0.015 { 1e-12 } else { e });
        assert_eq!(fit_slope(&mixed, 0).unwrap().points, 3);
    }

    #[test]
    fn gaussian_moments_by_quadrature() {
        let g = Grid::line(-15.0, 15.0, 512).unwrap();
        let f = WaveField::sample(&g, |y| c((-0.5 * y[0] * y[0]).exp(), 0.0)).unwrap();
        let m0 = moment_norm(&f, &[0]).unwrap();
        assert!((m0.value - PI.powf(0.25)).abs() < 1e-12);
        assert!(m0.is_reliable());
        // int y^2 e^{-y^2} = sqrt(pi)/2
        let m1 = moment_norm(&f, &[1]).unwrap();
        assert!((m1.value - (PI.sqrt() / 2.0).sqrt()).abs() < 1e-8);
        let zero = WaveField::zeros(g.clone());
        assert_eq!(moment_norm(&zero, &[2]).unwrap().value, 0.0);
        let wide = WaveField::sample(&g, |y| c((-0.01 * y[0] * y[0]).exp(), 0.0)).unwrap();
        assert!(!moment_norm(&wide, &[2]).unwrap().is_reliable());
        assert!(moment_norm(&f, &[5]).is_err());
    }

    #[test]
    fn interaction_norm_identities() {
        let g = Grid::line(-10.0, 10.0, 256).unwrap();
        let phi = WaveField::sample(&g, |y| c((-0.5 * y[0] * y[0]).exp(), 0.3)).unwrap();
        let zero = WaveField::zeros(g.clone());
        assert_eq!(interaction_norm(&phi, &zero, -1.0, 0.0).unwrap(), 0.0);
        assert_eq!(interaction_norm(&zero, &phi, -1.0, 0.0).unwrap(), 0.0);
        let same = interaction_norm(&phi, &phi, -1.0, 0.0).unwrap();
        let expected = 2.0 * 4f64.ln() * phi.l2_norm();
        assert!((same - expected).abs() < 1e-12 * expected);

        let a = WaveField::sample(&g, |y| c((-(y[0] + 5.0).powi(2)).exp(), 0.0)).unwrap();
        let b = WaveField::sample(&g, |y| c((-(y[0] - 5.0).powi(2)).exp(), 0.0)).unwrap();
        let ab = interaction_norm(&a, &b, -1.0, 0.0).unwrap();
        assert_eq!(ab, interaction_norm(&b, &a, -1.0, 0.0).unwrap());
        assert!(ab <= 1e-6 * a.l2_norm());
    }

    #[test]
    fn log_lipschitz_examples() {
        assert_eq!(log_lipschitz_gap(c(0.3, 0.4), c(0.3, 0.4)), 0.0);
        assert_eq!(log_lipschitz_gap(c(1.0, 0.0), c(-1.0, 0.0)), 8.0);
        assert_eq!(log_lipschitz_gap(c(0.0, 0.0), c(0.0, 2.0)), 8.0);
        // direct evaluation of the defining expression agrees
        let (z1, z2) = (c(0.7, -0.2), c(-0.1, 1.3));
        let g = |z: Complex64| z * z.norm_sqr().ln();
        let direct = 2.0 * (z2 - z1).norm_sqr() - ((g(z2) - g(z1)) * (z2 - z1).conj()).im.abs();
        assert!((log_lipschitz_gap(z1, z2) - direct).abs() < 1e-14);
    }

    #[test]
    fn exponential_envelope_bounds_samples() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let f: Vec<f64> = t.iter().map(|t| 2.0 * (0.3 * t).exp() * (1.0 + 0.1 * t.sin())).collect();
        let env = exponential_envelope(&t, &f).unwrap();
        for (t, f) in t.iter().zip(&f) {
            assert!(*f <= env.amplitude * (env.rate * t).exp() * (1.0 + 1e-12));
        }
        assert!(env.constant().is_finite());
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&[], &Summary::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(RECORDS_FILE)).unwrap();
        assert_eq!(text, format!("{CSV_HEADER}\n"));
        assert_eq!(read_summary(&dir.path().join(SUMMARY_FILE)).unwrap(), Summary::default());

        let mut recs = synthetic(&[0.1, 0.01], |e| e.sqrt() / 3.0);
        recs[0].times = vec![0.5, 1.0];
        recs[0].errors = vec![0.1 / 7.0, 0.2 / 7.0];
        recs[1].path = SolverPath::Lab;
        recs[1].scenario = Scenario::Superposition;
        let summary = Summary {
            fits: vec![NamedFit { name: "x".into(), fit: fit_power_law(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap() }],
            checks: vec![Check { name: "c".into(), value: 0.1, tolerance: "<= 1".into(), pass: true }],
            ..Default::default()
        };
        emit_report(&recs, &summary, dir.path()).unwrap();
        let file = fs::File::open(dir.path().join(RECORDS_FILE)).unwrap();
        assert_eq!(read_records_csv(file).unwrap(), recs);
        assert_eq!(read_summary(&dir.path().join(SUMMARY_FILE)).unwrap(), summary);
    }

    #[test]
    fn setup_validation() {
        let pk = PacketSpec::new(GaussianProfile::standard(1), &[0.0], &[0.0]).unwrap();
        let setup = SweepSetup {
            scenario: Scenario::Superposition,
            potential: PotentialSpec::zero(1),
            packets: vec![pk.clone()],
            lambda: -1.0,
            alpha: 1.0,
            horizon: 1.0,
            times: vec![],
            dt: 1e-3,
            dt_eps_factor: None,
            flow_dt: None,
            delta: None,
            source: ApproxSource::Closure,
        };
        assert!(setup.validate().is_err());
        let sub = SweepSetup { scenario: Scenario::Subcritical, ..setup.clone() };
        assert!(sub.validate().is_err());
        let lin = SweepSetup { scenario: Scenario::Linear, ..setup };
        assert!(lin.validate().is_ok());
    }

    #[test]
    fn zero_potential_linear_errors_vanish() {
        let pk = PacketSpec::new(GaussianProfile::standard(1), &[0.0], &[1.0]).unwrap();
        let setup = SweepSetup {
            scenario: Scenario::Linear,
            potential: PotentialSpec::zero(1),
            packets: vec![pk],
            lambda: 0.0,
            alpha: 1.0,
            horizon: 1.0,
            times: vec![0.5],
            dt: 1e-3,
            dt_eps_factor: None,
            flow_dt: Some(1e-3),
            delta: None,
            source: ApproxSource::Closure,
        };
        let recs = error_curve(&setup, &[0.1, 0.01]).unwrap();
        for r in &recs {
            assert_eq!(r.times, vec![0.5, 1.0]);
            assert!(r.sup_error() < 1e-9, "{:?}", r.errors);
        }
    }
}
