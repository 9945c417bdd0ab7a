//! Hamiltonian flow `q' = p, p' = -grad V(q)`, the classical action
//! `S(t) = int_0^t (|p|^2/2 - V(q)) ds`, energies, and the measure of the set of
//! times where two trajectories come close.

use std::io::Write;

use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

/// Uniformly sampled real function of time starting at `t = 0`, linearly
/// interpolated between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl UniformSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || values.is_empty() {
            return Err(Error::param("series needs dt > 0 and at least one sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sampled series".into()));
        }
        Ok(UniformSeries { dt, values })
    }

    pub fn constant(value: f64, horizon: f64, dt: f64) -> Result<Self> {
        let n = step_count(horizon, dt)?;
        UniformSeries::new(horizon / n as f64, vec![value; n + 1])
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    /// Clamped to the sampled range.
    pub fn at(&self, t: f64) -> f64 {
        let (k, s) = locate(t, self.dt, self.values.len());
        if s == 0.0 {
            self.values[k]
        } else {
            self.values[k] * (1.0 - s) + self.values[k + 1] * s
        }
    }
}

/// Number of fixed steps covering `[0, horizon]` with step at most `dt`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > 0.0 && dt <= horizon) {
        return Err(Error::param(format!("need 0 < dt <= horizon, got dt = {dt}")));
    }
    Ok(((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

/// Interval index and fractional position of `t` on a uniform sampling.
pub(crate) fn locate(t: f64, dt: f64, len: usize) -> (usize, f64) {
    if len < 2 || t <= 0.0 {
        return (0, 0.0);
    }
    let x = t / dt;
    let last = len - 1;
    if x >= last as f64 {
        return (last, 0.0);
    }
    let k = x.floor() as usize;
    let s = x - k as f64;
    // snap to a sample when t is one up to rounding
    if s < 1e-9 {
        (k, 0.0)
    } else if s > 1.0 - 1e-9 {
        (k + 1, 0.0)
    } else {
        (k, s)
    }
}

/// Cubic Hermite interpolant on `[t_k, t_k + h]` at fractional position `s`.
pub(crate) fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, s: f64, h: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

/// Classical state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub action: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    dt: f64,
    dim: usize,
    q: Vec<f64>,
    p: Vec<f64>,
    action: Vec<f64>,
    potential: Vec<f64>,
    force: Vec<f64>,
    hess_diag: Vec<f64>,
}

pub fn energy(potential: &PotentialSpec, q: &[f64], p: &[f64]) -> f64 {
    0.5 * p.iter().map(|x| x * x).sum::<f64>() + potential.value(q)
}

/// Integrates the flow with classic RK4, the action riding along as an extra
/// state component. The step is shrunk to `horizon / ceil(horizon / dt)` so the
/// last sample lands on `horizon`.
pub fn integrate_flow(
    potential: &PotentialSpec,
    q0: &[f64],
    p0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let d = potential.dim();
    if q0.len() != d || p0.len() != d {
        return Err(Error::param(format!("initial data must have dimension {d}")));
    }
    if q0.iter().chain(p0).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial phase-space point".into()));
    }
    let steps = step_count(horizon, dt)?;
    let h = horizon / steps as f64;

    let mut traj = Trajectory {
        dt: h,
        dim: d,
        q: Vec::with_capacity((steps + 1) * d),
        p: Vec::with_capacity((steps + 1) * d),
        action: Vec::with_capacity(steps + 1),
        potential: Vec::with_capacity(steps + 1),
        force: Vec::with_capacity((steps + 1) * d),
        hess_diag: Vec::with_capacity((steps + 1) * d),
    };

    // state layout: [q (d), p (d), S]
    let rhs = |y: &[f64], out: &mut [f64]| {
        let (q, p) = (&y[..d], &y[d..2 * d]);
        let mut v = 0.0;
        let mut kin = 0.0;
        for j in 0..d {
            let (vj, gj, _) = potential.component(j, q[j]);
            v += vj;
            kin += 0.5 * p[j] * p[j];
            out[j] = p[j];
            out[d + j] = -gj;
        }
        out[2 * d] = kin - v;
    };

    let n = 2 * d + 1;
    let mut y: Vec<f64> = q0.iter().chain(p0).copied().chain(std::iter::once(0.0)).collect();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    traj.push_sample(potential, &y);
    for step in 0..steps {
        rhs(&y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "classical state at t = {} (potential violates growth assumptions?)",
                (step + 1) as f64 * h
            )));
        }
        traj.push_sample(potential, &y);
    }
    Ok(traj)
}

impl Trajectory {
    fn push_sample(&mut self, potential: &PotentialSpec, y: &[f64]) {
        let d = self.dim;
        let q = &y[..d];
        let mut v = 0.0;
        for (j, &qj) in q.iter().enumerate() {
            let (vj, gj, hj) = potential.component(j, qj);
            v += vj;
            self.force.push(-gj);
            self.hess_diag.push(hj);
        }
        self.q.extend_from_slice(q);
        self.p.extend_from_slice(&y[d..2 * d]);
        self.action.push(y[2 * d]);
        self.potential.push(v);
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.action.len()
    }

    pub fn is_empty(&self) -> bool {
        self.action.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.len() - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn q(&self, k: usize) -> &[f64] {
        &self.q[k * self.dim..(k + 1) * self.dim]
    }

    pub fn p(&self, k: usize) -> &[f64] {
        &self.p[k * self.dim..(k + 1) * self.dim]
    }

    pub fn action(&self, k: usize) -> f64 {
        self.action[k]
    }

    pub fn hessian_diag(&self, k: usize) -> &[f64] {
        &self.hess_diag[k * self.dim..(k + 1) * self.dim]
    }

    pub fn energy(&self, k: usize) -> f64 {
        0.5 * self.p(k).iter().map(|x| x * x).sum::<f64>() + self.potential[k]
    }

    /// Energy of the initial point; conserved by the exact flow.
    pub fn initial_energy(&self) -> f64 {
        self.energy(0)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy(0);
        (0..self.len()).map(|k| (self.energy(k) - e0).abs()).fold(0.0, f64::max)
    }

    pub fn max_momentum(&self) -> f64 {
        (0..self.len())
            .map(|k| self.p(k).iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `|q(t)| + |p(t)|` at every sample.
    pub fn phase_space_sizes(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let q: f64 = self.q(k).iter().map(|x| x * x).sum::<f64>().sqrt();
                let p: f64 = self.p(k).iter().map(|x| x * x).sum::<f64>().sqrt();
                q + p
            })
            .collect()
    }

    /// State at an arbitrary time by cubic Hermite interpolation; `q' = p`,
    /// `p' = -grad V`, `S' = |p|^2/2 - V` are all stored so the interpolant is
    /// fourth-order accurate.
    pub fn state_at(&self, t: f64) -> PhasePoint {
        let (k, s) = locate(t, self.dt, self.len());
        if s == 0.0 {
            return PhasePoint { q: self.q(k).to_vec(), p: self.p(k).to_vec(), action: self.action[k] };
        }
        let h = self.dt;
        let hermite = |y0: f64, d0: f64, y1: f64, d1: f64| hermite(y0, d0, y1, d1, s, h);
        let d = self.dim;
        let (q0, q1, p0, p1) = (self.q(k), self.q(k + 1), self.p(k), self.p(k + 1));
        let f0 = &self.force[k * d..(k + 1) * d];
        let f1 = &self.force[(k + 1) * d..(k + 2) * d];
        let q = (0..d).map(|j| hermite(q0[j], p0[j], q1[j], p1[j])).collect();
        let p = (0..d).map(|j| hermite(p0[j], f0[j], p1[j], f1[j])).collect();
        let lag = |i: usize| {
            0.5 * self.p(i).iter().map(|x| x * x).sum::<f64>() - self.potential[i]
        };
        let action = hermite(self.action[k], lag(k), self.action[k + 1], lag(k + 1));
        PhasePoint { q, p, action }
    }

    /// Hessian diagonal `V_j''(q_j(t))`, linearly interpolated between samples.
    pub fn hessian_diag_at(&self, t: f64) -> Vec<f64> {
        let (k, s) = locate(t, self.dt, self.len());
        if s == 0.0 {
            return self.hessian_diag(k).to_vec();
        }
        let (a, b) = (self.hessian_diag(k), self.hessian_diag(k + 1));
        a.iter().zip(b).map(|(x, y)| x * (1.0 - s) + y * s).collect()
    }

    /// `V_j''(q_j(t))` for one dimension at every sample.
    pub fn curvature_series(&self, j: usize) -> UniformSeries {
        let values = (0..self.len()).map(|k| self.hessian_diag(k)[j]).collect();
        UniformSeries { dt: self.dt, values }
    }

    /// CSV with columns `t, q_1.., p_1.., S, E`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|j| format!("q{j}")));
        header.extend((1..=self.dim).map(|j| format!("p{j}")));
        header.push("S".into());
        header.push("E".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:e}", self.time(k))];
            row.extend(self.q(k).iter().map(|x| format!("{x:e}")));
            row.extend(self.p(k).iter().map(|x| format!("{x:e}")));
            row.push(format!("{:e}", self.action[k]));
            row.push(format!("{:e}", self.energy(k)));
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lebesgue measure of `{t in [0, T] : |q1(t) - q2(t)| <= threshold}`.
///
/// Within each step the separation vector is interpolated linearly and the
/// entry/exit times are solved for exactly, so the result carries no O(dt)
/// sampling bias at transversal crossings.
pub fn crossing_measure(a: &Trajectory, b: &Trajectory, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::param("crossing threshold must be positive"));
    }
    if a.len() != b.len() || a.dim != b.dim || (a.dt - b.dt).abs() > 1e-12 * a.dt {
        return Err(Error::param("trajectories must share dimension, step and horizon"));
    }
    let d = a.dim;
    let h2 = threshold * threshold;
    let mut measure = 0.0;
    let mut d0 = vec![0.0; d];
    let mut d1 = vec![0.0; d];
    for k in 0..a.len() - 1 {
        for j in 0..d {
            d0[j] = a.q(k)[j] - b.q(k)[j];
            d1[j] = a.q(k + 1)[j] - b.q(k + 1)[j];
        }
        // |d0 + s (d1 - d0)|^2 <= h^2  <=>  A s^2 + 2 B s + C <= 0
        let (mut aa, mut bb, mut cc) = (0.0, 0.0, -h2);
        for j in 0..d {
            let dd = d1[j] - d0[j];
            aa += dd * dd;
            bb += d0[j] * dd;
            cc += d0[j] * d0[j];
        }
        let inside = if aa == 0.0 {
            if cc <= 0.0 { 1.0 } else { 0.0 }
        } else {
            let disc = bb * bb - aa * cc;
            if disc <= 0.0 {
                0.0
            } else {
                let root = disc.sqrt();
                let lo = ((-bb - root) / aa).max(0.0);
                let hi = ((-bb + root) / aa).min(1.0);
                (hi - lo).max(0.0)
            }
        };
        measure += inside * a.dt;
    }
    Ok(measure)
}
