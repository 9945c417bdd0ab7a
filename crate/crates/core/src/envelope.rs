//! Split-step spectral solver for `i u_t + 1/2 Lap u = W(t, y) u + lambda u log(delta + |u|^2)`.
//!
//! `W` is either the quadratic part `1/2 <y, Hess V(q(t)) y>` or the full rescaled
//! potential `V^eps(t, y)` along a classical trajectory. One Strang step is
//!
//! 1. `u <- u exp(-i dt/2 [W(t + dt/2) + lambda log(delta + |u|^2)])`
//! 2. `u <- F^-1 exp(-i dt |k|^2 / 2) F u`
//! 3. step 1 again with the updated `|u|`.
//!
//! Both pointwise substeps preserve `|u|` and are therefore exact.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::Trajectory;
use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::Grid;
use crate::potentials::PotentialSpec;
use crate::spectral::SpectralPlan;

/// Relative mass drift at which a run is abandoned as under-resolved.
pub const MASS_DRIFT_LIMIT: f64 = 1e-6;
/// Largest boundary mass fraction tolerated during a run.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-8;
/// Largest boundary mass fraction of admissible initial data.
pub const INITIAL_BOUNDARY_LIMIT: f64 = 1e-12;
/// Largest relative spectral tail of admissible initial data.
pub const INITIAL_TAIL_LIMIT: f64 = 1e-10;
/// Default regularisation relative to the peak density of the initial data.
pub const DEFAULT_DELTA_FACTOR: f64 = 1e-14;

const BOUNDARY_CHECK_INTERVAL: usize = 64;

/// Which potential the envelope feels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PotentialMode {
    /// `W = 1/2 <y, Hess V(q(t)) y>`.
    Quadratic,
    /// `W = V^eps(t, y)`.
    Exact { eps: f64 },
}

#[derive(Debug, Clone)]
pub struct EnvelopeProblem {
    pub potential: PotentialSpec,
    pub trajectory: Arc<Trajectory>,
    pub mode: PotentialMode,
    /// Coefficient of `u log(delta + |u|^2)`.
    pub lambda: f64,
    /// `None` selects `1e-14 max |u0|^2`.
    pub delta: Option<f64>,
    pub initial: WaveField,
    pub horizon: f64,
    pub dt: f64,
    /// Snapshot times in `(0, horizon]`; the final time is always included.
    pub output_times: Vec<f64>,
}

impl EnvelopeProblem {
    pub fn new(
        potential: PotentialSpec,
        trajectory: Arc<Trajectory>,
        initial: WaveField,
        horizon: f64,
        dt: f64,
    ) -> Self {
        EnvelopeProblem {
            potential,
            trajectory,
            mode: PotentialMode::Quadratic,
            lambda: 0.0,
            delta: None,
            initial,
            horizon,
            dt,
            output_times: Vec::new(),
        }
    }

    pub fn with_mode(mut self, mode: PotentialMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
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

    pub fn with_initial(mut self, initial: WaveField) -> Self {
        self.initial = initial;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.initial.grid()
    }

    pub fn delta_value(&self) -> f64 {
        self.delta
            .unwrap_or_else(|| DEFAULT_DELTA_FACTOR * self.initial.max_abs().powi(2))
    }

    /// Parameter checks that do not depend on the initial data.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::param("horizon must be at least one step"));
        }
        if let Some(delta) = self.delta {
            if !(delta >= 0.0 && delta.is_finite()) {
                return Err(Error::param(format!("delta must be >= 0, got {delta}")));
            }
        }
        if !self.lambda.is_finite() {
            return Err(Error::NonFinite("lambda".into()));
        }
        if let PotentialMode::Exact { eps } = self.mode {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::param(format!("eps must lie in (0, 1], got {eps}")));
            }
        }
        let d = self.grid().dims();
        if self.potential.dim() != d || self.trajectory.dim() != d {
            return Err(Error::GridMismatch(format!(
                "grid is {d}-d, potential {}-d, trajectory {}-d",
                self.potential.dim(),
                self.trajectory.dim()
            )));
        }
        if self.trajectory.horizon() < self.horizon * (1.0 - 1e-12) {
            return Err(Error::param(format!(
                "trajectory ends at {} before the horizon {}",
                self.trajectory.horizon(),
                self.horizon
            )));
        }
        for &t in &self.output_times {
            if !(t > 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
                return Err(Error::param(format!("output time {t} outside (0, {}]", self.horizon)));
            }
        }
        Ok(())
    }

    /// Fills `out` with `W(t, .)` on the grid.
    pub fn potential_at(&self, t: f64, out: &mut [f64]) {
        let grid = self.grid();
        let per_axis: Vec<Vec<f64>> = match self.mode {
            PotentialMode::Quadratic => {
                let h = self.trajectory.hessian_diag_at(t);
                grid.axes()
                    .iter()
                    .zip(&h)
                    .map(|(ax, &hj)| ax.points().iter().map(|y| 0.5 * hj * y * y).collect())
                    .collect()
            }
            PotentialMode::Exact { eps } => {
                let q = self.trajectory.state_at(t).q;
                let s = eps.sqrt();
                grid.axes()
                    .iter()
                    .enumerate()
                    .map(|(j, ax)| {
                        ax.points()
                            .iter()
                            .map(|&y| self.potential.veps_component(j, q[j], s, y))
                            .collect()
                    })
                    .collect()
            }
        };
        separable_sum(&per_axis, out);
    }
}

/// Row-major `out[i_1..i_d] = sum_j f_j[i_j]`.
pub(crate) fn separable_sum(per_axis: &[Vec<f64>], out: &mut [f64]) {
    let inner: usize = per_axis[1..].iter().map(Vec::len).product();
    if per_axis.len() == 1 {
        out.copy_from_slice(&per_axis[0]);
        return;
    }
    let mut rest = vec![0.0; inner];
    separable_sum(&per_axis[1..], &mut rest);
    for (i, &v) in per_axis[0].iter().enumerate() {
        for (o, r) in out[i * inner..(i + 1) * inner].iter_mut().zip(&rest) {
            *o = v + r;
        }
    }
}

/// Strang splitting for `u_t = i (hbar/2) Lap u - i (W + coupling log(delta + |u|^2)) u`.
/// The envelope uses `hbar = 1`; the lab frame uses `hbar = eps`.
pub(crate) struct SplitStepper {
    plan: SpectralPlan,
    k_squared: Vec<f64>,
    hbar: f64,
    kinetic: Vec<Complex64>,
    kinetic_dt: f64,
}

impl SplitStepper {
    pub(crate) fn new(grid: &Grid, hbar: f64) -> Self {
        SplitStepper {
            plan: SpectralPlan::new(grid),
            k_squared: grid.frequencies().k_squared(),
            hbar,
            kinetic: Vec::new(),
            kinetic_dt: f64::NAN,
        }
    }

    fn prepare(&mut self, dt: f64) {
        if self.kinetic_dt != dt {
            let c = -0.5 * self.hbar * dt;
            self.kinetic = self.k_squared.iter().map(|k2| Complex64::from_polar(1.0, c * k2)).collect();
            self.kinetic_dt = dt;
        }
    }

    pub(crate) fn step(&mut self, u: &mut [Complex64], w: &[f64], coupling: f64, delta: f64, dt: f64) {
        self.prepare(dt);
        let half = 0.5 * dt;
        nonlinear_phase(u, w, coupling, delta, half);
        self.plan.forward(u);
        for (z, m) in u.iter_mut().zip(&self.kinetic) {
            *z *= m;
        }
        self.plan.inverse(u);
        nonlinear_phase(u, w, coupling, delta, half);
    }
}

fn nonlinear_phase(u: &mut [Complex64], w: &[f64], coupling: f64, delta: f64, h: f64) {
    for (z, &wv) in u.iter_mut().zip(w) {
        let rho = delta + z.norm_sqr();
        let nl = if coupling == 0.0 { 0.0 } else { coupling * rho.ln() };
        *z *= Complex64::from_polar(1.0, -h * (wv + nl));
    }
}

/// Metadata of one evolution, serialisable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dt: f64,
    pub delta: f64,
    pub steps: usize,
    pub initial_mass: f64,
    pub max_mass_drift: f64,
    pub max_boundary_mass: f64,
    pub final_spectral_tail: f64,
}

#[derive(Debug, Clone)]
pub struct EnvelopeRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<WaveField>,
    pub report: RunReport,
}

impl EnvelopeRun {
    pub fn final_field(&self) -> &WaveField {
        self.snapshots.last().expect("a run stores at least the final snapshot")
    }
}

/// One Strang step from `t` to `t + dt`.
pub fn strang_step(u: &WaveField, problem: &EnvelopeProblem, t: f64, dt: f64) -> Result<WaveField> {
    if u.grid() != problem.grid() {
        return Err(Error::GridMismatch("field and problem grids differ".into()));
    }
    let mut stepper = SplitStepper::new(u.grid(), 1.0);
    let mut w = vec![0.0; u.grid().len()];
    problem.potential_at(t + 0.5 * dt, &mut w);
    let mut values = u.values().to_vec();
    stepper.step(&mut values, &w, problem.lambda, problem.delta_value(), dt);
    if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite(format!(
            "envelope after step at t = {t} (delta = 0 with vanishing amplitude?)"
        )));
    }
    WaveField::new(u.grid().clone(), values)
}

/// Step boundaries: each output segment is split into equal steps no longer than `dt`.
pub(crate) fn segments(horizon: f64, dt: f64, outputs: &[f64]) -> Vec<(f64, f64, usize)> {
    let mut stops: Vec<f64> = outputs.to_vec();
    stops.push(horizon);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon);
    let mut out = Vec::with_capacity(stops.len());
    let mut t0 = 0.0;
    for t1 in stops {
        let n = (((t1 - t0) / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        out.push((t0, t1, n));
        t0 = t1;
    }
    out
}

/// Evolves the envelope, returning snapshots at the requested times (and at
/// the horizon). Aborts when the relative mass drift exceeds `1e-6` or the
/// mass near the boundary exceeds `1e-8`.
pub fn evolve_envelope(problem: &EnvelopeProblem) -> Result<EnvelopeRun> {
    problem.validate()?;
    let setup = SplitRun {
        initial: &problem.initial,
        hbar: 1.0,
        coupling: problem.lambda,
        delta: problem.delta_value(),
        horizon: problem.horizon,
        dt: problem.dt,
        outputs: &problem.output_times,
    };
    run_split(setup, |t, w| problem.potential_at(t, w), false)
}

/// Inputs of the shared split-step driver.
pub(crate) struct SplitRun<'a> {
    pub initial: &'a WaveField,
    pub hbar: f64,
    pub coupling: f64,
    pub delta: f64,
    pub horizon: f64,
    pub dt: f64,
    pub outputs: &'a [f64],
}

/// Checks the initial data, then steps with `W` refreshed at every step
/// midpoint (or once, when `static_w`), recording snapshots and diagnostics.
pub(crate) fn run_split<F>(setup: SplitRun<'_>, mut w_at: F, static_w: bool) -> Result<EnvelopeRun>
where
    F: FnMut(f64, &mut [f64]),
{
    let u0 = setup.initial;
    let b0 = u0.boundary_mass();
    if b0 > INITIAL_BOUNDARY_LIMIT {
        return Err(Error::Resolution(format!(
            "initial data has boundary mass {b0:.2e} > {INITIAL_BOUNDARY_LIMIT:.0e}; enlarge the domain"
        )));
    }
    let tail = u0.spectral_tail();
    if tail > INITIAL_TAIL_LIMIT {
        return Err(Error::Resolution(format!(
            "initial data has spectral tail {tail:.2e} > {INITIAL_TAIL_LIMIT:.0e}; refine the grid"
        )));
    }
    let grid = u0.grid().clone();
    let mut stepper = SplitStepper::new(&grid, setup.hbar);
    let mut w = vec![0.0; grid.len()];
    if static_w {
        w_at(0.0, &mut w);
    }
    let mut u = u0.values().to_vec();
    let m0 = u0.mass();
    let mut report = RunReport {
        dt: setup.dt,
        delta: setup.delta,
        steps: 0,
        initial_mass: m0,
        max_mass_drift: 0.0,
        max_boundary_mass: b0,
        final_spectral_tail: tail,
    };
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let dv = grid.cell_volume();
    for (t0, t1, n) in segments(setup.horizon, setup.dt, setup.outputs) {
        let h = (t1 - t0) / n as f64;
        report.dt = report.dt.min(h);
        for k in 0..n {
            let t = t0 + k as f64 * h;
            if !static_w {
                w_at(t + 0.5 * h, &mut w);
            }
            stepper.step(&mut u, &w, setup.coupling, setup.delta, h);
            report.steps += 1;
            let mass: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv;
            if !mass.is_finite() {
                return Err(Error::NonFinite(format!(
                    "solution at t = {} (delta = 0 with vanishing amplitude?)",
                    t + h
                )));
            }
            let drift = (mass - m0).abs() / m0;
            report.max_mass_drift = report.max_mass_drift.max(drift);
            if drift > MASS_DRIFT_LIMIT {
                return Err(Error::MassDrift { drift, limit: MASS_DRIFT_LIMIT });
            }
            if report.steps.is_multiple_of(BOUNDARY_CHECK_INTERVAL) || k + 1 == n {
                let field = WaveField::new(grid.clone(), u.clone())?;
                let bm = field.boundary_mass();
                report.max_boundary_mass = report.max_boundary_mass.max(bm);
                if bm > BOUNDARY_MASS_LIMIT {
                    return Err(Error::BoundaryMass { t: t + h, mass: bm, limit: BOUNDARY_MASS_LIMIT });
                }
            }
        }
        times.push(t1);
        snapshots.push(WaveField::new(grid.clone(), u.clone())?);
    }
    let mut run = EnvelopeRun { times, snapshots, report };
    run.report.final_spectral_tail = run.final_field().spectral_tail();
    log::debug!("split-step run: {:?}", run.report);
    Ok(run)
}

/// `||evolve(k u0)(T) - k evolve(u0)(T) exp(-i lambda T log|k|^2)|| / ||k u0||`.
/// With the default regularisation `delta` scales with `|k|^2`, so the
/// property holds for the scheme up to rounding.
pub fn gauge_scaling_check(problem: &EnvelopeProblem, k: Complex64) -> Result<f64> {
    if k.norm() == 0.0 {
        return Err(Error::param("gauge factor must be nonzero"));
    }
    let base = evolve_envelope(&problem.clone().with_outputs(&[]))?;
    let scaled_problem = problem.clone().with_outputs(&[]).with_initial(problem.initial.scaled(k));
    let scaled_problem = match problem.delta {
        Some(d) => scaled_problem.with_delta(d * k.norm_sqr()),
        None => scaled_problem,
    };
    let scaled = evolve_envelope(&scaled_problem)?;
    let phase = Complex64::from_polar(1.0, -problem.lambda * problem.horizon * k.norm_sqr().ln());
    let expected = base.final_field().scaled(k * phase);
    Ok(scaled.final_field().l2_distance(&expected)? / problem.initial.scaled(k).l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::integrate_flow;
    use crate::gaussian::gaussian_profile;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn still(d: usize, horizon: f64) -> (PotentialSpec, Arc<Trajectory>) {
        let v = PotentialSpec::zero(d);
        let tr = integrate_flow(&v, &vec![0.0; d], &vec![0.0; d], horizon, 1e-2).unwrap();
        (v, Arc::new(tr))
    }

    fn gaussian(grid: &Grid, a: Complex64, b: Complex64) -> WaveField {
        WaveField::sample(grid, |y| gaussian_profile(&[a], b, y)).unwrap()
    }

    #[test]
    fn free_step_matches_closed_form() {
        let g = Grid::line(-16.0, 16.0, 256).unwrap();
        let (v, tr) = still(1, 1.0);
        let u0 = gaussian(&g, c(1.0, 0.0), c(1.0, 0.0));
        let p = EnvelopeProblem::new(v, tr, u0.clone(), 1.0, 1e-3);
        let dt = 1e-3;
        let u1 = strang_step(&u0, &p, 0.0, dt).unwrap();
        // e^{-y^2/2} evolves to (1 + i t)^{-1/2} e^{-y^2 / (2 (1 + i t))}
        let s = c(1.0, dt);
        let exact = WaveField::sample(&g, |y| (-(y[0] * y[0]) / (2.0 * s)).exp() / s.sqrt()).unwrap();
        assert!(u1.l2_distance(&exact).unwrap() < 1e-10);
    }

    #[test]
    fn strang_local_error_is_third_order() {
        let g = Grid::line(-16.0, 16.0, 256).unwrap();
        let v = PotentialSpec::harmonic(&[1.0]).unwrap();
        let tr = Arc::new(integrate_flow(&v, &[0.5], &[0.0], 1.0, 1e-3).unwrap());
        let u0 = gaussian(&g, c(1.3, 0.4), c(1.0, 0.0));
        let p = EnvelopeProblem::new(v, tr, u0.clone(), 1.0, 1e-2).with_lambda(-1.0);
        let fine = |h: f64, n: usize| {
            let mut u = u0.clone();
            for k in 0..n {
                u = strang_step(&u, &p, k as f64 * h, h).unwrap();
            }
            u
        };
        let reference = fine(0.1 / 64.0, 64);
        let e1 = strang_step(&u0, &p, 0.0, 0.1).unwrap().l2_distance(&reference).unwrap();
        let e2 = strang_step(&u0, &p, 0.0, 0.05).unwrap();
        let e2 = strang_step(&e2, &p, 0.05, 0.05).unwrap().l2_distance(&reference).unwrap();
        let ratio = e1 / e2;
        // two half steps carry two local errors of size C h^3 / 8
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
        let half = strang_step(&u0, &p, 0.0, 0.05).unwrap().l2_distance(&fine(0.05 / 64.0, 64)).unwrap();
        let local = e1 / half;
        assert!(local > 7.0 && local < 9.0, "local ratio {local}");
    }

    #[test]
    fn constant_modulus_only_rotates() {
        let g = Grid::line(0.0, 2.0 * PI, 32).unwrap();
        let (v, tr) = still(1, 1.0);
        let amp = c(0.6, 0.8) * 1.7;
        let u0 = WaveField::sample(&g, |_| amp).unwrap();
        let lambda = -0.7;
        let p = EnvelopeProblem::new(v, tr, u0.clone(), 1.0, 0.1).with_lambda(lambda).with_delta(1e-3);
        let mut u = u0.clone();
        for k in 0..10 {
            u = strang_step(&u, &p, k as f64 * 0.1, 0.1).unwrap();
        }
        let rot = Complex64::from_polar(1.0, -lambda * 1.0 * (1e-3 + amp.norm_sqr()).ln());
        assert!(u.l2_distance(&u0.scaled(rot)).unwrap() < 1e-12);
    }

    #[test]
    fn gausson_modulus_is_stationary() {
        let g = Grid::line(-8.0, 8.0, 128).unwrap();
        let (v, tr) = still(1, 2.0);
        let u0 = gaussian(&g, c(2.0, 0.0), c(1f64.exp(), 0.0));
        let p = EnvelopeProblem::new(v, tr, u0.clone(), 2.0, 5e-4)
            .with_lambda(-1.0)
            .with_outputs(&[0.5, 1.0, 1.5]);
        let run = evolve_envelope(&p).unwrap();
        assert_eq!(run.times, vec![0.5, 1.0, 1.5, 2.0]);
        for snap in &run.snapshots {
            let worst = snap
                .values()
                .iter()
                .zip(u0.values())
                .map(|(a, b)| (a.norm() - b.norm()).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "{worst}");
        }
        assert!(run.report.max_mass_drift < 1e-10);
    }

    #[test]
    fn exact_and_quadratic_modes_agree_for_quadratic_potential() {
        let g = Grid::line(-12.0, 12.0, 128).unwrap();
        let v = PotentialSpec::harmonic(&[1.3]).unwrap();
        let tr = Arc::new(integrate_flow(&v, &[1.0], &[0.2], 0.5, 1e-3).unwrap());
        let u0 = gaussian(&g, c(1.0, 0.2), c(0.7, 0.0));
        let p = EnvelopeProblem::new(v, tr, u0, 0.5, 1e-2).with_lambda(-1.0);
        let quad = evolve_envelope(&p).unwrap();
        for eps in [1.0, 1e-2, 1e-4] {
            let ex = evolve_envelope(&p.clone().with_mode(PotentialMode::Exact { eps })).unwrap();
            assert!(ex.final_field().l2_distance(quad.final_field()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn gauge_scaling() {
        let g = Grid::line(-8.0, 8.0, 128).unwrap();
        let (v, tr) = still(1, 1.0);
        let u0 = gaussian(&g, c(2.0, 0.0), c(1f64.exp(), 0.0));
        let p = EnvelopeProblem::new(v, tr, u0, 1.0, 1e-2).with_lambda(-1.0);
        assert_eq!(gauge_scaling_check(&p, c(1.0, 0.0)).unwrap(), 0.0);
        assert!(gauge_scaling_check(&p, c(2.0, 0.0)).unwrap() < 1e-8);
        assert!(gauge_scaling_check(&p, Complex64::from_polar(1.0, 0.7)).unwrap() < 1e-12);
        assert!(gauge_scaling_check(&p, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn rejects_unresolved_or_clipped_data() {
        let (v, tr) = still(1, 1.0);
        let wide = gaussian(&Grid::line(-3.0, 3.0, 64).unwrap(), c(1.0, 0.0), c(1.0, 0.0));
        let p = EnvelopeProblem::new(v.clone(), tr.clone(), wide, 1.0, 1e-2);
        assert!(matches!(evolve_envelope(&p), Err(Error::Resolution(_))));
        let sharp = gaussian(&Grid::line(-10.0, 10.0, 16).unwrap(), c(1.0, 0.0), c(1.0, 0.0));
        let p = EnvelopeProblem::new(v.clone(), tr.clone(), sharp, 1.0, 1e-2);
        assert!(matches!(evolve_envelope(&p), Err(Error::Resolution(_))));
        let ok = gaussian(&Grid::line(-10.0, 10.0, 128).unwrap(), c(1.0, 0.0), c(1.0, 0.0));
        let p = EnvelopeProblem::new(v.clone(), tr.clone(), ok.clone(), 1.0, 1e-2).with_delta(-1.0);
        assert!(evolve_envelope(&p).is_err());
        let p = EnvelopeProblem::new(v.clone(), tr.clone(), ok.clone(), 2.0, 1e-2);
        assert!(evolve_envelope(&p).is_err());
        let p = EnvelopeProblem::new(v, tr, ok, 1.0, 1e-2).with_mode(PotentialMode::Exact { eps: 2.0 });
        assert!(evolve_envelope(&p).is_err());
    }

    #[test]
    fn spreading_into_boundary_aborts() {
        let g = Grid::line(-10.0, 10.0, 128).unwrap();
        let (v, tr) = still(1, 20.0);
        let u0 = gaussian(&g, c(1.0, 0.0), c(1.0, 0.0));
        let p = EnvelopeProblem::new(v, tr, u0, 20.0, 1e-2);
        assert!(matches!(evolve_envelope(&p), Err(Error::BoundaryMass { .. })));
    }

    #[test]
    fn separable_sum_layout() {
        let mut out = vec![0.0; 6];
        separable_sum(&[vec![0.0, 10.0], vec![1.0, 2.0, 3.0]], &mut out);
        assert_eq!(out, vec![1.0, 2.0, 3.0, 11.0, 12.0, 13.0]);
    }

    #[test]
    fn segments_hit_outputs() {
        let s = segments(1.0, 0.3, &[0.5, 1.0]);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].1, s[0].2), (0.5, 2));
        assert_eq!((s[1].0, s[1].2), (0.5, 2));
    }
}
