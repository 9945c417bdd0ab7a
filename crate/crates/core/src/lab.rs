//! Semiclassical equation in the original variable,
//! `i eps psi_t + eps^2/2 Lap psi = V psi + lambda eps^alpha psi log|psi|^2`,
//! its coherent-state initial data, the exact envelope in the moving frame,
//! and assembly of approximate solutions from envelopes.
//!
//! Frame convention: with `y = (x - q(t)) / sqrt(eps)`,
//!
//! ```text
//! psi(t, x) = eps^(-d/4) u(t, y) exp(i (S(t) + p(t).(x - q(t))) / eps) exp(i theta(t)),
//! theta(t) = lambda eps^(alpha-1) (d/2) t log(eps),
//! ```
//!
//! and `u` solves `i u_t + 1/2 Lap u = V^eps u + lambda eps^(alpha-1) u log|u|^2`.
//! The factor `exp(i theta)` absorbs the constant `-(d/2) log eps` that
//! `log|psi|^2` picks up from the amplitude `eps^(-d/4)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{integrate_flow, Trajectory};
use crate::envelope::{run_split, EnvelopeProblem, EnvelopeRun, PotentialMode, SplitRun, DEFAULT_DELTA_FACTOR};
use crate::error::{Error, Result};
use crate::field::{SpectralInterpolant, WaveField};
use crate::gaussian::{gaussian_moment, gaussian_profile, GaussianClosure};
use crate::grid::{Axis, Grid};
use crate::potentials::PotentialSpec;

/// Half-width of the region a packet occupies, in units of its width.
pub const PACKET_EXTENT: f64 = 12.0;

/// Multi-packet lab domains extend this many relative-momentum travel
/// distances beyond the packets' range.
pub const SCATTER_HARMONICS: f64 = 3.0;

/// Gaussian profile `b exp(-1/2 sum_j a_j y_j^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProfile {
    pub a: Vec<Complex64>,
    pub b: Complex64,
}

impl GaussianProfile {
    pub fn new(a: Vec<Complex64>, b: Complex64) -> Result<Self> {
        let profile = GaussianProfile { a, b };
        profile.validate()?;
        Ok(profile)
    }

    /// `pi^(-d/4) exp(-|y|^2 / 2)`, unit mass.
    pub fn standard(d: usize) -> Self {
        GaussianProfile {
            a: vec![Complex64::new(1.0, 0.0); d],
            b: Complex64::new(std::f64::consts::PI.powf(-0.25 * d as f64), 0.0),
        }
    }

    /// Stationary profile `e^((1+d)/2) exp(lambda |y|^2)` for `lambda < 0`.
    pub fn gausson(lambda: f64, d: usize) -> Result<Self> {
        if !(lambda < 0.0) {
            return Err(Error::param("the Gausson needs lambda < 0"));
        }
        Ok(GaussianProfile {
            a: vec![Complex64::new(-2.0 * lambda, 0.0); d],
            b: Complex64::new((0.5 * (1.0 + d as f64)).exp(), 0.0),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(Error::param("profile needs at least one dimension"));
        }
        if self.a.iter().any(|a| !(a.re > 0.0 && a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::param("profile coefficients need finite a with Re a > 0"));
        }
        if !(self.b.re.is_finite() && self.b.im.is_finite()) || self.b.norm() == 0.0 {
            return Err(Error::param("profile amplitude must be finite and nonzero"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn value(&self, y: &[f64]) -> Complex64 {
        gaussian_profile(&self.a, self.b, y)
    }

    pub fn l2_norm(&self) -> f64 {
        gaussian_moment(&self.a, self.b, &vec![0; self.dim()])
    }

    /// `1 / sqrt(Re a_j)`.
    pub fn widths(&self) -> Vec<f64> {
        self.a.iter().map(|a| 1.0 / a.re.sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub profile: GaussianProfile,
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
}

impl PacketSpec {
    pub fn new(profile: GaussianProfile, q0: &[f64], p0: &[f64]) -> Result<Self> {
        let packet = PacketSpec { profile, q0: q0.to_vec(), p0: p0.to_vec() };
        packet.validate()?;
        Ok(packet)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        let d = self.profile.dim();
        if self.q0.len() != d || self.p0.len() != d {
            return Err(Error::param(format!("packet centre and momentum must have dimension {d}")));
        }
        if self.q0.iter().chain(&self.p0).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("packet centre or momentum".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }
}

/// `eps^(-d/4) env((x - q)/sqrt(eps)) exp(i (S + p.(x - q)) / eps) exp(i theta)` on `grid`.
fn packet_field<F>(
    grid: &Grid,
    eps: f64,
    q: &[f64],
    p: &[f64],
    action: f64,
    theta: f64,
    envelope: F,
) -> Result<WaveField>
where
    F: Fn(&[f64]) -> Complex64,
{
    let d = grid.dims();
    let scale = eps.powf(-0.25 * d as f64);
    let s = eps.sqrt();
    let mut y = vec![0.0; d];
    WaveField::sample(grid, |x| {
        let mut lin = 0.0;
        for j in 0..d {
            let dx = x[j] - q[j];
            y[j] = dx / s;
            lin += p[j] * dx;
        }
        let env = envelope(&y);
        if env == Complex64::new(0.0, 0.0) {
            return env;
        }
        env * scale * Complex64::from_polar(1.0, (action + lin) / eps + theta)
    })
}

/// Sum of coherent states `eps^(-d/4) u0((x - q0)/sqrt(eps)) exp(i p0.(x - q0)/eps)`.
pub fn coherent_init(packets: &[PacketSpec], eps: f64, grid: &Grid) -> Result<WaveField> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1], got {eps}")));
    }
    if packets.is_empty() {
        return Err(Error::param("at least one packet required"));
    }
    let dx = grid.spacing();
    let mut total = WaveField::zeros(grid.clone());
    for packet in packets {
        packet.validate()?;
        if packet.dim() != grid.dims() {
            return Err(Error::GridMismatch(format!(
                "{}-d packet on a {}-d grid",
                packet.dim(),
                grid.dims()
            )));
        }
        for (j, (&pj, &h)) in packet.p0.iter().zip(&dx).enumerate() {
            if pj != 0.0 && h > eps / (8.0 * pj.abs()) {
                return Err(Error::Resolution(format!(
                    "spacing {h:.3e} on axis {j} does not resolve the carrier: need <= eps/(8|p0|) = {:.3e}",
                    eps / (8.0 * pj.abs())
                )));
            }
        }
        let field = packet_field(grid, eps, &packet.q0, &packet.p0, 0.0, 0.0, |y| packet.profile.value(y))?;
        total = total.add(&field)?;
    }
    Ok(total)
}

/// Gauge phase `theta(t) = coupling (d/2) t log eps` carried by nonlinear packets.
pub fn gauge_phase(coupling: f64, dim: usize, t: f64, eps: f64) -> f64 {
    coupling * 0.5 * dim as f64 * t * eps.ln()
}

#[derive(Debug, Clone)]
pub struct SemiclassicalProblem {
    pub eps: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub potential: PotentialSpec,
    pub packets: Vec<PacketSpec>,
    pub horizon: f64,
    /// Time step of the field solvers.
    pub dt: f64,
    /// Time step of the classical flow; `None` picks `1e-4`, or `1e-5` for `eps <= 1e-2`.
    pub flow_dt: Option<f64>,
    pub delta: Option<f64>,
    /// Lab-frame grid; `None` sizes one from the trajectories.
    pub grid: Option<Grid>,
    /// Moving-frame grid for the exact envelope; `None` sizes one automatically.
    pub envelope_grid: Option<Grid>,
    pub output_times: Vec<f64>,
}

impl SemiclassicalProblem {
    pub fn new(eps: f64, potential: PotentialSpec, packets: Vec<PacketSpec>, horizon: f64, dt: f64) -> Self {
        SemiclassicalProblem {
            eps,
            alpha: 1.0,
            lambda: 0.0,
            potential,
            packets,
            horizon,
            dt,
            flow_dt: None,
            delta: None,
            grid: None,
            envelope_grid: None,
            output_times: Vec::new(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_envelope_grid(mut self, grid: Grid) -> Self {
        self.envelope_grid = Some(grid);
        self
    }

    pub fn with_flow_dt(mut self, dt: f64) -> Self {
        self.flow_dt = Some(dt);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_outputs(mut self, times: &[f64]) -> Self {
        self.output_times = times.to_vec();
        self
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    /// Coefficient of the nonlinearity in the `u` equation, `lambda eps^(alpha-1)`.
    pub fn coupling(&self) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda * self.eps.powf(self.alpha - 1.0)
        }
    }

    pub fn flow_step(&self) -> f64 {
        let default = if self.eps <= 1e-2 { 1e-5 } else { 1e-4 };
        self.flow_dt.unwrap_or(default).min(self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::param(format!("eps must lie in (0, 1], got {}", self.eps)));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::NonFinite("lambda".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon must be positive"));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::param("need 0 < dt <= horizon"));
        }
        if let Some(d) = self.flow_dt {
            if !(d > 0.0) {
                return Err(Error::param("flow dt must be positive"));
            }
        }
        if self.packets.is_empty() {
            return Err(Error::param("at least one packet required"));
        }
        for p in &self.packets {
            p.validate()?;
            if p.dim() != self.dim() {
                return Err(Error::param(format!(
                    "{}-d packet for a {}-d potential",
                    p.dim(),
                    self.dim()
                )));
            }
        }
        if let Some(g) = &self.grid {
            if g.dims() != self.dim() {
                return Err(Error::GridMismatch("lab grid dimension differs from the potential".into()));
            }
        }
        Ok(())
    }

    pub fn trajectories(&self) -> Result<Vec<Arc<Trajectory>>> {
        self.packets
            .iter()
            .map(|p| integrate_flow(&self.potential, &p.q0, &p.p0, self.horizon, self.flow_step()).map(Arc::new))
            .collect()
    }

    /// Gaussian closure of each packet with the problem's coupling; besides
    /// supplying approximate solutions it estimates packet widths for grid sizing.
    pub fn closures(&self, trajectories: &[Arc<Trajectory>]) -> Result<Vec<GaussianClosure>> {
        self.packets
            .iter()
            .zip(trajectories)
            .map(|(p, tr)| GaussianClosure::along(tr, &p.profile.a, p.profile.b, self.coupling()))
            .collect()
    }

    /// The lab grid: the configured one after checking it resolves and
    /// contains every packet, or an automatically sized one.
    pub fn lab_grid(&self, trajectories: &[Arc<Trajectory>], closures: &[GaussianClosure]) -> Result<Grid> {
        let need = LabExtent::measure(self.eps, trajectories, closures);
        match &self.grid {
            Some(g) => {
                need.check(g)?;
                Ok(g.clone())
            }
            None => need.build(),
        }
    }

    /// The moving-frame grid for a single packet.
    pub fn moving_grid(&self, closure: &GaussianClosure) -> Result<Grid> {
        if let Some(g) = &self.envelope_grid {
            return Ok(g.clone());
        }
        let axes = (0..closure.dims())
            .map(|j| {
                let (wmax, wmin, kmax) = envelope_scales(closure, j);
                let half = PACKET_EXTENT * wmax;
                let dx = (wmin / 4.0).min(std::f64::consts::PI / kmax);
                let n = ((2.0 * half / dx).ceil() as usize).next_power_of_two().max(64);
                Axis::new(-half, half, n)
            })
            .collect::<Result<Vec<_>>>()?;
        Grid::from_axes(axes)
    }
}

/// `(max width, min width, wavenumber bound)` of a closure along dimension `j`
/// in the moving frame.
fn envelope_scales(closure: &GaussianClosure, j: usize) -> (f64, f64, f64) {
    let c = closure.coeffs(j);
    let mut wmax = 0.0_f64;
    let mut wmin = f64::INFINITY;
    let mut kmax = 0.0_f64;
    for a in &c.a {
        let w = 1.0 / a.re.sqrt();
        wmax = wmax.max(w);
        wmin = wmin.min(w);
        // chirp at the packet edge plus the Gaussian spectral spread
        kmax = kmax.max(PACKET_EXTENT * w * a.im.abs() + PACKET_EXTENT * a.re.sqrt());
    }
    (wmax, wmin, kmax)
}

/// Region and resolution required by a set of packets in the lab frame.
struct LabExtent {
    lower: Vec<f64>,
    upper: Vec<f64>,
    max_dx: Vec<f64>,
}

impl LabExtent {
    fn measure(eps: f64, trajectories: &[Arc<Trajectory>], closures: &[GaussianClosure]) -> Self {
        let d = trajectories[0].dim();
        let s = eps.sqrt();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        let mut max_dx = vec![f64::INFINITY; d];
        for (tr, cl) in trajectories.iter().zip(closures) {
            let stride = (tr.len() / 2000).max(1);
            for j in 0..d {
                let (_, wmin, kmax) = envelope_scales(cl, j);
                let coeffs = cl.coeffs(j);
                let mut pmax = 0.0_f64;
                let mut k = 0;
                while k < tr.len() {
                    let w = 1.0 / coeffs.a[k.min(coeffs.a.len() - 1)].re.sqrt();
                    let q = tr.q(k)[j];
                    lower[j] = lower[j].min(q - PACKET_EXTENT * s * w);
                    upper[j] = upper[j].max(q + PACKET_EXTENT * s * w);
                    pmax = pmax.max(tr.p(k)[j].abs());
                    k = if k + 1 == tr.len() { k + 1 } else { (k + stride).min(tr.len() - 1) };
                }
                let mut dx = (s * wmin / 4.0).min(std::f64::consts::PI / (pmax / eps + kmax / s));
                if pmax > 0.0 {
                    dx = dx.min(eps / (8.0 * pmax));
                }
                max_dx[j] = max_dx[j].min(dx);
            }
        }
        // Overlapping packets scatter a little mass at momenta shifted by
        // multiples of their relative momentum; keep room for the first few.
        if trajectories.len() > 1 {
            let horizon = trajectories[0].horizon();
            for j in 0..d {
                let mut dp = 0.0_f64;
                for a in trajectories {
                    for b in trajectories {
                        let stride = (a.len() / 2000).max(1);
                        for k in (0..a.len().min(b.len())).step_by(stride) {
                            dp = dp.max((a.p(k)[j] - b.p(k)[j]).abs());
                        }
                    }
                }
                lower[j] -= SCATTER_HARMONICS * horizon * dp;
                upper[j] += SCATTER_HARMONICS * horizon * dp;
            }
        }
        LabExtent { lower, upper, max_dx }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        for (j, ax) in grid.axes().iter().enumerate() {
            if ax.dx() > self.max_dx[j] * (1.0 + 1e-12) {
                return Err(Error::Resolution(format!(
                    "lab spacing {:.3e} on axis {j} exceeds {:.3e} (eps/(8 p_max) and packet width); use n >= {}",
                    ax.dx(),
                    self.max_dx[j],
                    ((ax.length() / self.max_dx[j]).ceil() as usize).next_power_of_two()
                )));
            }
            let margin = ax.length() / 16.0;
            if self.lower[j] < ax.lower + margin || self.upper[j] > ax.upper - margin {
                return Err(Error::Resolution(format!(
                    "lab axis {j} [{}, {}] does not contain the packets' range [{:.3}, {:.3}] away from its boundary",
                    ax.lower, ax.upper, self.lower[j], self.upper[j]
                )));
            }
        }
        Ok(())
    }

    fn build(&self) -> Result<Grid> {
        let axes = (0..self.lower.len())
            .map(|j| {
                let core = self.upper[j] - self.lower[j];
                // keep the diagnostic boundary strips (1/16 of the axis each) clear
                let length = core * 8.0 / 7.0;
                let n = ((length / self.max_dx[j]).ceil() as usize).next_power_of_two().max(64);
                let mid = 0.5 * (self.upper[j] + self.lower[j]);
                Axis::new(mid - 0.5 * length, mid + 0.5 * length, n)
            })
            .collect::<Result<Vec<_>>>()?;
        Grid::from_axes(axes)
    }
}

/// Lab-frame solution with the data it was computed from.
#[derive(Debug, Clone)]
pub struct LabRun {
    pub grid: Grid,
    pub trajectories: Vec<Arc<Trajectory>>,
    pub closures: Vec<GaussianClosure>,
    pub initial: WaveField,
    pub run: EnvelopeRun,
}

/// Strang split-step solution of the semiclassical equation on the lab grid:
/// kinetic factor `exp(-i eps dt |k|^2 / 2)`, pointwise phase
/// `exp(-i dt/2 (V/eps + lambda eps^(alpha-1) log(delta + |psi|^2)))`.
pub fn evolve_lognls(problem: &SemiclassicalProblem) -> Result<LabRun> {
    problem.validate()?;
    let trajectories = problem.trajectories()?;
    let closures = problem.closures(&trajectories)?;
    let grid = problem.lab_grid(&trajectories, &closures)?;
    let initial = coherent_init(&problem.packets, problem.eps, &grid)?;
    let run = evolve_lognls_from(problem, &initial)?;
    Ok(LabRun { grid, trajectories, closures, initial, run })
}

/// Lab-frame evolution of arbitrary initial data on its own grid.
pub fn evolve_lognls_from(problem: &SemiclassicalProblem, initial: &WaveField) -> Result<EnvelopeRun> {
    problem.validate()?;
    if initial.grid().dims() != problem.dim() {
        return Err(Error::GridMismatch("initial data dimension differs from the potential".into()));
    }
    for &t in &problem.output_times {
        if !(t > 0.0 && t <= problem.horizon * (1.0 + 1e-12)) {
            return Err(Error::param(format!("output time {t} outside (0, {}]", problem.horizon)));
        }
    }
    let delta = problem
        .delta
        .unwrap_or_else(|| DEFAULT_DELTA_FACTOR * initial.max_abs().powi(2));
    let setup = SplitRun {
        initial,
        hbar: problem.eps,
        coupling: problem.coupling(),
        delta,
        horizon: problem.horizon,
        dt: problem.dt,
        outputs: &problem.output_times,
    };
    let grid = initial.grid().clone();
    let inv_eps = 1.0 / problem.eps;
    run_split(
        setup,
        |_, w| {
            let mut x = vec![0.0; grid.dims()];
            for (i, wi) in w.iter_mut().enumerate() {
                grid.point_into(i, &mut x);
                *wi = problem.potential.value(&x) * inv_eps;
            }
        },
        true,
    )
}

/// Gauge residual of the lab solver:
/// `||Psi_k(T) - k psi(T) exp(-i lambda eps^(alpha-1) T log|k|^2)|| / ||k psi0||`.
pub fn lab_gauge_scaling_check(problem: &SemiclassicalProblem, k: Complex64) -> Result<f64> {
    if k.norm() == 0.0 {
        return Err(Error::param("gauge factor must be nonzero"));
    }
    let mut p = problem.clone();
    p.output_times.clear();
    let base = evolve_lognls(&p)?;
    if let Some(d) = p.delta {
        p.delta = Some(d * k.norm_sqr());
    }
    let scaled0 = base.initial.scaled(k);
    let scaled = evolve_lognls_from(&p, &scaled0)?;
    let phase = Complex64::from_polar(1.0, -problem.coupling() * problem.horizon * k.norm_sqr().ln());
    let expected = base.run.final_field().scaled(k * phase);
    Ok(scaled.final_field().l2_distance(&expected)? / scaled0.l2_norm())
}

/// Exact envelope of a single packet in the moving frame.
#[derive(Debug, Clone)]
pub struct FrameRun {
    pub trajectory: Arc<Trajectory>,
    pub closure: GaussianClosure,
    pub problem: EnvelopeProblem,
    pub run: EnvelopeRun,
}

/// Solves `i u_t + 1/2 Lap u = V^eps u + lambda eps^(alpha-1) u log|u|^2` for
/// the single packet of `problem`, starting from its profile.
pub fn evolve_exact_envelope(problem: &SemiclassicalProblem) -> Result<FrameRun> {
    problem.validate()?;
    if problem.packets.len() != 1 {
        return Err(Error::param(format!(
            "the moving frame follows one packet, got {}",
            problem.packets.len()
        )));
    }
    let trajectory = problem.trajectories()?.remove(0);
    let closure = problem.closures(std::slice::from_ref(&trajectory))?.remove(0);
    let grid = problem.moving_grid(&closure)?;
    let packet = &problem.packets[0];
    let u0 = WaveField::sample(&grid, |y| packet.profile.value(y))?;
    let mut env = EnvelopeProblem::new(problem.potential.clone(), trajectory.clone(), u0, problem.horizon, problem.dt)
        .with_mode(PotentialMode::Exact { eps: problem.eps })
        .with_lambda(problem.coupling())
        .with_outputs(&problem.output_times);
    env.delta = problem.delta;
    let run = crate::envelope::evolve_envelope(&env)?;
    Ok(FrameRun { trajectory, closure, problem: env, run })
}

/// Where the envelope of an approximate solution comes from.
pub enum EnvelopeSource<'a> {
    /// Gaussian closure, evaluated in closed form.
    Closure(&'a GaussianClosure),
    /// Envelope PDE snapshot, interpolated spectrally.
    Field(&'a WaveField),
}

/// Phase convention of an approximate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseMode {
    /// `phi = S + p.(x - q)`.
    Linear,
    /// Linear phase times `exp(i theta(t))` with the given coupling `lambda eps^(alpha-1)`.
    Critical { coupling: f64 },
}

/// `eps^(-d/4) u(t, (x - q(t))/sqrt(eps)) exp(i phi / eps)` on `grid`.
///
/// Fails when part of the envelope's mass falls outside `grid` or when a PDE
/// envelope is not negligible at its own boundary.
pub fn assemble_approx(
    traj: &Trajectory,
    source: &EnvelopeSource<'_>,
    eps: f64,
    mode: PhaseMode,
    grid: &Grid,
    t: f64,
) -> Result<WaveField> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1], got {eps}")));
    }
    if traj.dim() != grid.dims() {
        return Err(Error::GridMismatch("trajectory and lab grid dimensions differ".into()));
    }
    if t < 0.0 || t > traj.horizon() * (1.0 + 1e-12) {
        return Err(Error::param(format!("time {t} outside the trajectory")));
    }
    let state = traj.state_at(t);
    let theta = match mode {
        PhaseMode::Linear => 0.0,
        PhaseMode::Critical { coupling } => gauge_phase(coupling, grid.dims(), t, eps),
    };
    let (field, envelope_mass) = match source {
        EnvelopeSource::Closure(cl) => {
            let st = cl.state_at(t);
            let f = packet_field(grid, eps, &state.q, &state.p, state.action, theta, |y| gaussian_profile(&st.a, st.b, y))?;
            (f, gaussian_moment(&st.a, st.b, &vec![0; grid.dims()]).powi(2))
        }
        EnvelopeSource::Field(u) => {
            if u.grid().dims() != grid.dims() {
                return Err(Error::GridMismatch("envelope and lab grid dimensions differ".into()));
            }
            let bm = u.boundary_mass();
            if bm > crate::envelope::BOUNDARY_MASS_LIMIT {
                return Err(Error::Resolution(format!(
                    "envelope has boundary mass {bm:.2e}; its grid does not cover the packet"
                )));
            }
            let interp = SpectralInterpolant::new(u);
            let f = packet_field(grid, eps, &state.q, &state.p, state.action, theta, |y| interp.eval(y))?;
            (f, u.mass())
        }
    };
    let lost = (field.mass() - envelope_mass).abs() / envelope_mass;
    if lost > 1e-6 {
        return Err(Error::Resolution(format!(
            "lab grid captures the envelope mass only to {lost:.2e}; enlarge or refine it"
        )));
    }
    Ok(field)
}
