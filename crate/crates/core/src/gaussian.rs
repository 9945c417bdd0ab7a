//! Gaussian closure of the critical envelope equation for separable potentials.
//!
//! With `u(t, y) = b(t) exp(-1/2 sum_j a_j(t) y_j^2)` the envelope equation
//! reduces to the Riccati equations `i a_j' = a_j^2 - Omega_j(t) + 2 lambda Re a_j`,
//! `Omega_j(t) = V_j''(q_j(t))`, solved through `a_j = alpha_j / tau_j^2 - i tau_j' / tau_j`
//! where
//!
//! ```text
//! tau'' = alpha^2 / tau^3 + 2 lambda alpha / tau - Omega(t) tau,   tau(0) = 1, tau'(0) = -beta
//! ```
//!
//! and `b(t) = b0 exp(-i lambda t log|b0|^2 - i/2 sum_j A_j(t) - i lambda sum_j B_j(t))`
//! with `A_j = int a_j`, `B_j = int Im A_j`. Mass conservation pins
//! `|b(t)|^2 prod_j tau_j(t) = |b0|^2`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::{hermite, locate, step_count, Trajectory, UniformSeries};
use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::Grid;

/// Smallest width parameter accepted before the integration is aborted.
pub const TAU_MIN: f64 = 1e-8;

/// Relative tolerance between the two expressions for `|b(t)|`.
const MODULUS_TOLERANCE: f64 = 1e-6;

/// Sampled solution of the width equation for one dimension.
#[derive(Debug, Clone)]
pub struct TauPath {
    pub alpha0: f64,
    pub beta0: f64,
    pub lambda: f64,
    pub dt: f64,
    pub tau: Vec<f64>,
    pub tau_dot: Vec<f64>,
    /// `Omega` at the samples.
    pub omega: Vec<f64>,
}

impl TauPath {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.len() - 1) as f64
    }

    fn accel(&self, tau: f64, omega: f64) -> f64 {
        tau_accel(self.alpha0, self.lambda, tau, omega)
    }

    /// `(tau, tau')` at an arbitrary time, cubic Hermite between samples.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let (k, s) = locate(t, self.dt, self.len());
        if s == 0.0 {
            return (self.tau[k], self.tau_dot[k]);
        }
        let h = self.dt;
        let acc0 = self.accel(self.tau[k], self.omega[k]);
        let acc1 = self.accel(self.tau[k + 1], self.omega[k + 1]);
        let tau = hermite(self.tau[k], self.tau_dot[k], self.tau[k + 1], self.tau_dot[k + 1], s, h);
        let tau_dot = hermite(self.tau_dot[k], acc0, self.tau_dot[k + 1], acc1, s, h);
        (tau, tau_dot)
    }

    /// Smallest `C` with `1/tau^2 + tau^2 + tau'^2 <= C exp(C t)` on the samples.
    pub fn growth_constant(&self) -> f64 {
        let f = |k: usize| {
            let t = self.tau[k];
            1.0 / (t * t) + t * t + self.tau_dot[k] * self.tau_dot[k]
        };
        let f0 = f(0);
        let rate = (1..self.len())
            .map(|k| (f(k) / f0).ln() / (k as f64 * self.dt))
            .fold(0.0, f64::max);
        f0.max(rate)
    }
}

fn tau_accel(alpha0: f64, lambda: f64, tau: f64, omega: f64) -> f64 {
    alpha0 * alpha0 / (tau * tau * tau) + 2.0 * lambda * alpha0 / tau - omega * tau
}

/// RK4 for the width equation; `omega` is linearly interpolated at the stages.
pub fn integrate_tau(
    alpha0: f64,
    beta0: f64,
    lambda: f64,
    omega: &UniformSeries,
    horizon: f64,
    dt: f64,
) -> Result<TauPath> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::param(format!("Re a0 must be positive, got {alpha0}")));
    }
    if !beta0.is_finite() || !lambda.is_finite() {
        return Err(Error::NonFinite("closure parameters".into()));
    }
    if horizon > omega.horizon() * (1.0 + 1e-12) {
        return Err(Error::param(format!(
            "curvature sampled up to {} but horizon is {horizon}",
            omega.horizon()
        )));
    }
    let steps = step_count(horizon, dt)?;
    let h = horizon / steps as f64;
    let f = |t: f64, y: [f64; 2]| [y[1], tau_accel(alpha0, lambda, y[0], omega.at(t))];

    let mut path = TauPath {
        alpha0,
        beta0,
        lambda,
        dt: h,
        tau: Vec::with_capacity(steps + 1),
        tau_dot: Vec::with_capacity(steps + 1),
        omega: Vec::with_capacity(steps + 1),
    };
    let mut y = [1.0, -beta0];
    path.tau.push(y[0]);
    path.tau_dot.push(y[1]);
    path.omega.push(omega.at(0.0));
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t1 = (k + 1) as f64 * h;
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonFinite(format!("tau at t = {t1}")));
        }
        if y[0] <= TAU_MIN {
            return Err(Error::TauUnderflow { t: t1, tau: y[0], floor: TAU_MIN });
        }
        path.tau.push(y[0]);
        path.tau_dot.push(y[1]);
        path.omega.push(omega.at(t1));
    }
    Ok(path)
}

/// `a(t)`, `A(t) = int_0^t a` and `B(t) = int_0^t Im A` on the sampling of a [`TauPath`].
#[derive(Debug, Clone)]
pub struct GaussianCoeffs {
    pub dt: f64,
    pub a: Vec<Complex64>,
    pub big_a: Vec<Complex64>,
    pub big_b: Vec<f64>,
}

pub fn gaussian_coeffs(path: &TauPath) -> GaussianCoeffs {
    let a: Vec<Complex64> = path
        .tau
        .iter()
        .zip(&path.tau_dot)
        .map(|(&tau, &td)| coeff_from_tau(path.alpha0, tau, td))
        .collect();
    let big_a = cumulative_integral(path.dt, &a);
    let im_a: Vec<f64> = big_a.iter().map(|z| z.im).collect();
    let big_b = cumulative_integral(path.dt, &im_a);
    GaussianCoeffs { dt: path.dt, a, big_a, big_b }
}

fn coeff_from_tau(alpha0: f64, tau: f64, tau_dot: f64) -> Complex64 {
    Complex64::new(alpha0 / (tau * tau), -tau_dot / tau)
}

/// Running integral of uniformly sampled data. Each interval uses the cubic
/// through the four nearest samples (one-sided at the ends), so the result is
/// fourth-order accurate; short series fall back to the trapezoid rule.
pub fn cumulative_integral<T>(dt: f64, f: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = f.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(T::default());
    let c = dt / 24.0;
    for k in 0..n - 1 {
        let piece = if n < 4 {
            (f[k] + f[k + 1]) * (dt / 2.0)
        } else if k == 0 {
            f[0] * (9.0 * c) + f[1] * (19.0 * c) + f[2] * (-5.0 * c) + f[3] * c
        } else if k == n - 2 {
            f[k - 2] * c + f[k - 1] * (-5.0 * c) + f[k] * (19.0 * c) + f[k + 1] * (9.0 * c)
        } else {
            f[k - 1] * (-c) + f[k] * (13.0 * c) + f[k + 1] * (13.0 * c) + f[k + 2] * (-c)
        };
        let prev = out[k];
        out.push(prev + piece);
    }
    out
}

/// Amplitude path from the integrated phase law. The modulus is cross-checked
/// against `|b0|^2 / prod_j tau_j`; when they disagree by more than `1e-6` a
/// warning is logged and the mass-conserving modulus is used.
pub fn gaussian_b(
    b0: Complex64,
    lambda: f64,
    coeffs: &[GaussianCoeffs],
    taus: &[TauPath],
) -> Result<Vec<Complex64>> {
    amplitude_path(b0, lambda, coeffs, taus).map(|(b, _)| b)
}

fn amplitude_path(
    b0: Complex64,
    lambda: f64,
    coeffs: &[GaussianCoeffs],
    taus: &[TauPath],
) -> Result<(Vec<Complex64>, bool)> {
    if b0 == Complex64::new(0.0, 0.0) || !(b0.re.is_finite() && b0.im.is_finite()) {
        return Err(Error::param("b0 must be finite and nonzero"));
    }
    if coeffs.is_empty() || coeffs.len() != taus.len() {
        return Err(Error::param("one coefficient path and one tau path per dimension"));
    }
    let n = coeffs[0].a.len();
    if coeffs.iter().any(|c| c.a.len() != n) || taus.iter().any(|p| p.len() != n) {
        return Err(Error::param("closure paths must share their sampling"));
    }
    let log_b0 = b0.norm_sqr().ln();
    let dt = coeffs[0].dt;
    let mut worst = 0.0_f64;
    let mut b: Vec<Complex64> = (0..n)
        .map(|k| {
            let sum_a: Complex64 = coeffs.iter().map(|c| c.big_a[k]).sum();
            let sum_b: f64 = coeffs.iter().map(|c| c.big_b[k]).sum();
            let t = k as f64 * dt;
            let exponent = Complex64::i() * (-lambda * t * log_b0 - lambda * sum_b) - Complex64::i() * sum_a * 0.5;
            b0 * exponent.exp()
        })
        .collect();
    let lawful: Vec<f64> = (0..n)
        .map(|k| b0.norm() / taus.iter().map(|p| p.tau[k]).product::<f64>().sqrt())
        .collect();
    for (bk, &m) in b.iter().zip(&lawful) {
        worst = worst.max((bk.norm() - m).abs() / m);
    }
    let overridden = worst > MODULUS_TOLERANCE;
    if overridden {
        log::warn!(
            "closure amplitude modulus off the mass law by {worst:.3e}; using |b0|^2/prod tau"
        );
        for (bk, &m) in b.iter_mut().zip(&lawful) {
            *bk = Complex64::from_polar(m, bk.arg());
        }
    }
    Ok((b, overridden))
}

/// `b exp(-1/2 sum_j a_j y_j^2)`.
pub fn gaussian_profile(a: &[Complex64], b: Complex64, y: &[f64]) -> Complex64 {
    let q: Complex64 = a.iter().zip(y).map(|(aj, yj)| aj * (yj * yj)).sum();
    b * (-0.5 * q).exp()
}

/// Instantaneous closure parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub t: f64,
    pub tau: Vec<f64>,
    pub tau_dot: Vec<f64>,
    pub a: Vec<Complex64>,
    pub big_a: Vec<Complex64>,
    pub big_b: Vec<f64>,
    pub b: Complex64,
}

#[derive(Debug, Clone)]
pub struct GaussianClosure {
    lambda: f64,
    b0: Complex64,
    taus: Vec<TauPath>,
    coeffs: Vec<GaussianCoeffs>,
    b: Vec<Complex64>,
    modulus_overridden: bool,
}

impl GaussianClosure {
    /// Closure for initial data `b0 exp(-1/2 sum a0_j y_j^2)` with curvatures
    /// `omegas[j](t) = V_j''(q_j(t))`.
    pub fn new(
        a0: &[Complex64],
        b0: Complex64,
        lambda: f64,
        omegas: &[UniformSeries],
        horizon: f64,
        dt: f64,
    ) -> Result<Self> {
        if a0.is_empty() || a0.len() != omegas.len() {
            return Err(Error::param("one a0 entry and one curvature series per dimension"));
        }
        let taus = a0
            .par_iter()
            .zip(omegas)
            .map(|(a, om)| integrate_tau(a.re, a.im, lambda, om, horizon, dt))
            .collect::<Result<Vec<_>>>()?;
        let coeffs: Vec<GaussianCoeffs> = taus.iter().map(gaussian_coeffs).collect();
        let (b, modulus_overridden) = amplitude_path(b0, lambda, &coeffs, &taus)?;
        Ok(GaussianClosure { lambda, b0, taus, coeffs, b, modulus_overridden })
    }

    /// Closure along a classical trajectory, reusing its curvature samples.
    pub fn along(traj: &Trajectory, a0: &[Complex64], b0: Complex64, lambda: f64) -> Result<Self> {
        if a0.len() != traj.dim() {
            return Err(Error::param("a0 dimension differs from the trajectory"));
        }
        let omegas: Vec<UniformSeries> = (0..traj.dim()).map(|j| traj.curvature_series(j)).collect();
        GaussianClosure::new(a0, b0, lambda, &omegas, traj.horizon(), traj.dt())
    }

    pub fn dims(&self) -> usize {
        self.taus.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn b0(&self) -> Complex64 {
        self.b0
    }

    pub fn dt(&self) -> f64 {
        self.taus[0].dt
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.taus[0].horizon()
    }

    pub fn tau_path(&self, j: usize) -> &TauPath {
        &self.taus[j]
    }

    pub fn coeffs(&self, j: usize) -> &GaussianCoeffs {
        &self.coeffs[j]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.b
    }

    pub fn modulus_overridden(&self) -> bool {
        self.modulus_overridden
    }

    pub fn initial_coefficients(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| c.a[0]).collect()
    }

    /// Parameters at an arbitrary time in `[0, T]`; between samples `tau`, `A`
    /// and `B` are Hermite-interpolated using their known derivatives.
    pub fn state_at(&self, t: f64) -> GaussianState {
        let (k, s) = locate(t, self.dt(), self.len());
        let h = self.dt();
        let mut st = GaussianState {
            t,
            tau: Vec::with_capacity(self.dims()),
            tau_dot: Vec::with_capacity(self.dims()),
            a: Vec::with_capacity(self.dims()),
            big_a: Vec::with_capacity(self.dims()),
            big_b: Vec::with_capacity(self.dims()),
            b: self.b[k],
        };
        for (path, c) in self.taus.iter().zip(&self.coeffs) {
            if s == 0.0 {
                st.tau.push(path.tau[k]);
                st.tau_dot.push(path.tau_dot[k]);
                st.a.push(c.a[k]);
                st.big_a.push(c.big_a[k]);
                st.big_b.push(c.big_b[k]);
                continue;
            }
            let (tau, td) = path.at(t);
            let a = coeff_from_tau(path.alpha0, tau, td);
            let re = hermite(c.big_a[k].re, c.a[k].re, c.big_a[k + 1].re, c.a[k + 1].re, s, h);
            let im = hermite(c.big_a[k].im, c.a[k].im, c.big_a[k + 1].im, c.a[k + 1].im, s, h);
            let bb = hermite(c.big_b[k], c.big_a[k].im, c.big_b[k + 1], c.big_a[k + 1].im, s, h);
            st.tau.push(tau);
            st.tau_dot.push(td);
            st.a.push(a);
            st.big_a.push(Complex64::new(re, im));
            st.big_b.push(bb);
        }
        if s != 0.0 {
            let sum_a: Complex64 = st.big_a.iter().sum();
            let sum_b: f64 = st.big_b.iter().sum();
            let phase = Complex64::i()
                * (-self.lambda * t * self.b0.norm_sqr().ln() - self.lambda * sum_b)
                - Complex64::i() * sum_a * 0.5;
            let mut b = self.b0 * phase.exp();
            if self.modulus_overridden {
                b = Complex64::from_polar(self.b0.norm() / st.tau.iter().product::<f64>().sqrt(), b.arg());
            }
            st.b = b;
        }
        st
    }

    pub fn value_at(&self, state: &GaussianState, y: &[f64]) -> Complex64 {
        gaussian_profile(&state.a, state.b, y)
    }

    /// Samples `u(t, .)` on `grid`. Fails when the Gaussian is not negligible
    /// (relative amplitude `1e-12`) on the grid boundary.
    pub fn synthesize(&self, t: f64, grid: &Grid) -> Result<WaveField> {
        if grid.dims() != self.dims() {
            return Err(Error::GridMismatch(format!(
                "{}-d closure on a {}-d grid",
                self.dims(),
                grid.dims()
            )));
        }
        let st = self.state_at(t);
        let mut edge = 0.0_f64;
        for (j, ax) in grid.axes().iter().enumerate() {
            let y = ax.lower.abs().max(ax.point(ax.n - 1).abs());
            edge = edge.max((-0.5 * st.a[j].re * y * y).exp());
        }
        if edge > 1e-12 {
            return Err(Error::Resolution(format!(
                "Gaussian envelope at t = {t} reaches {edge:.2e} of its peak on the grid boundary"
            )));
        }
        WaveField::sample(grid, |y| gaussian_profile(&st.a, st.b, y))
    }

    /// Closed-form `||y^beta u(t)||_{L^2}`.
    pub fn l2_moment(&self, t: f64, beta: &[usize]) -> Result<f64> {
        if beta.len() != self.dims() {
            return Err(Error::param("multi-index length must equal the dimension"));
        }
        let st = self.state_at(t);
        Ok(gaussian_moment(&st.a, st.b, beta))
    }

    /// Exponential growth constant: the largest per-dimension [`TauPath::growth_constant`].
    pub fn growth_constant(&self) -> f64 {
        self.taus.iter().map(TauPath::growth_constant).fold(0.0, f64::max)
    }

    /// Largest residual of `i a' - a^2 + Omega - 2 lambda Re a` over interior
    /// samples, `a'` by the five-point central difference.
    pub fn ode_residual(&self) -> f64 {
        let h = self.dt();
        let mut worst = 0.0_f64;
        for (path, c) in self.taus.iter().zip(&self.coeffs) {
            for k in 2..c.a.len().saturating_sub(2) {
                let da = (c.a[k - 2] - c.a[k + 2] + (c.a[k + 1] - c.a[k - 1]) * 8.0) / (12.0 * h);
                let a = c.a[k];
                let r = Complex64::i() * da - a * a + path.omega[k] - 2.0 * self.lambda * a.re;
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    /// CSV with columns `t, tau_j, tau_dot_j, re_a_j, im_a_j (per j), re_b, im_b`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let mut header = vec!["t".to_string()];
        for j in 1..=self.dims() {
            header.extend([format!("tau{j}"), format!("tau_dot{j}"), format!("re_a{j}"), format!("im_a{j}")]);
        }
        header.extend(["re_b".to_string(), "im_b".to_string()]);
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:e}", k as f64 * self.dt())];
            for (p, c) in self.taus.iter().zip(&self.coeffs) {
                row.extend([p.tau[k], p.tau_dot[k], c.a[k].re, c.a[k].im].iter().map(|x| format!("{x:e}")));
            }
            row.push(format!("{:e}", self.b[k].re));
            row.push(format!("{:e}", self.b[k].im));
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `||y^beta b exp(-1/2 sum a_j y_j^2)||_{L^2}` from
/// `int y^(2n) exp(-alpha y^2) dy = Gamma(n + 1/2) / alpha^(n + 1/2)`.
pub fn gaussian_moment(a: &[Complex64], b: Complex64, beta: &[usize]) -> f64 {
    let mut sq = b.norm_sqr();
    for (aj, &n) in a.iter().zip(beta) {
        let alpha = aj.re;
        sq *= half_integer_gamma(n) / alpha.powf(n as f64 + 0.5);
    }
    sq.sqrt()
}

/// `Gamma(n + 1/2) = (2n - 1)!! sqrt(pi) / 2^n`.
fn half_integer_gamma(n: usize) -> f64 {
    (1..=n).fold(std::f64::consts::PI.sqrt(), |g, k| g * (k as f64 - 0.5))
}
