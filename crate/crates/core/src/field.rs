//! Complex fields sampled on a periodic grid, rectangle-rule norms, and the
//! on-disk wavefield formats.
//!
//! # Formats
//!
//! CSV (`.csv`): comment lines `# axis,<lower>,<upper>,<n>` (one per dimension,
//! in order), a header `index,re,im`, then one row per point in row-major order
//! (last axis fastest). Floats are written in shortest round-trip exponent form.
//!
//! Binary (`.wf`): magic `LNSWF001`, `u32` dimension count, then per axis
//! `f64 lower, f64 upper, u64 n`, then `re, im` as `f64` pairs per point. All
//! integers and floats little-endian.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};
use crate::spectral::SpectralPlan;

/// Fraction of each axis (at both ends) counted by [`WaveField::boundary_mass`].
pub const BOUNDARY_FRACTION: f64 = 1.0 / 16.0;

const BINARY_MAGIC: &[u8; 8] = b"LNSWF001";

#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(format!("wavefield entry {i}")));
        }
        Ok(WaveField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![Complex64::default(); grid.len()];
        WaveField { grid, values }
    }

    /// Samples `f` at every grid point.
    pub fn sample<F>(grid: &Grid, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        let mut x = vec![0.0; grid.dims()];
        let values = (0..grid.len())
            .map(|i| {
                grid.point_into(i, &mut x);
                f(&x)
            })
            .collect();
        WaveField::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scaled(&self, k: Complex64) -> WaveField {
        WaveField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z * k).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    /// `sum |f_i|^2 prod dx_j`.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn l2_distance(&self, other: &WaveField) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn check_same_grid(&self, other: &WaveField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &WaveField) -> Result<WaveField> {
        self.check_same_grid(other)?;
        Ok(WaveField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// Squared norm contained in the outer [`BOUNDARY_FRACTION`] of any axis,
    /// relative to the total mass. Zero fields report zero.
    pub fn boundary_mass(&self) -> f64 {
        let total: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let bands: Vec<usize> = self
            .grid
            .axes()
            .iter()
            .map(|ax| ((ax.n as f64 * BOUNDARY_FRACTION).ceil() as usize).max(1))
            .collect();
        let shape = self.grid.shape();
        let mut edge = 0.0;
        for (i, z) in self.values.iter().enumerate() {
            let idx = self.grid.unravel(i);
            let near = idx
                .iter()
                .zip(&shape)
                .zip(&bands)
                .any(|((&m, &n), &b)| m < b || m >= n - b);
            if near {
                edge += z.norm_sqr();
            }
        }
        edge / total
    }

    /// Relative L2 weight of Fourier modes in the outer eighth of the
    /// frequency band (|m| >= 3n/8 on any axis).
    pub fn spectral_tail(&self) -> f64 {
        let plan = SpectralPlan::new(&self.grid);
        let mut spec = self.values.clone();
        plan.forward(&mut spec);
        let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let shape = self.grid.shape();
        let tail: f64 = spec
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                self.grid.unravel(*i).iter().zip(&shape).any(|(&m, &n)| {
                    let signed = if m < n / 2 { m as isize } else { m as isize - n as isize };
                    signed.unsigned_abs() * 8 >= 3 * n
                })
            })
            .map(|(_, z)| z.norm_sqr())
            .sum();
        (tail / total).sqrt()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        for ax in self.grid.axes() {
            writeln!(w, "# axis,{:e},{:e},{}", ax.lower, ax.upper, ax.n)?;
        }
        writeln!(w, "index,re,im")?;
        for (i, z) in self.values.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e}", z.re, z.im)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut axes = Vec::new();
        let mut values = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("line {}: {what}", lineno + 1));
            if let Some(rest) = line.strip_prefix("# axis,") {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 3 {
                    return Err(bad("axis line needs lower,upper,n"));
                }
                let lower = parts[0].parse().map_err(|_| bad("axis lower"))?;
                let upper = parts[1].parse().map_err(|_| bad("axis upper"))?;
                let n = parts[2].parse().map_err(|_| bad("axis n"))?;
                axes.push(Axis::new(lower, upper, n)?);
            } else if line.starts_with('#') {
                continue;
            } else if !header_seen {
                if line != "index,re,im" {
                    return Err(bad("expected header index,re,im"));
                }
                header_seen = true;
            } else {
                let parts: Vec<&str> = line.split(',').collect();
                if parts.len() != 3 {
                    return Err(bad("expected index,re,im"));
                }
                let index: usize = parts[0].parse().map_err(|_| bad("index"))?;
                if index != values.len() {
                    return Err(bad("indices must be consecutive from 0"));
                }
                let re = parts[1].parse().map_err(|_| bad("re"))?;
                let im = parts[2].parse().map_err(|_| bad("im"))?;
                values.push(Complex64::new(re, im));
            }
        }
        let grid = Grid::from_axes(axes)?;
        WaveField::new(grid, values)
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.grid.dims() as u32).to_le_bytes())?;
        for ax in self.grid.axes() {
            w.write_all(&ax.lower.to_le_bytes())?;
            w.write_all(&ax.upper.to_le_bytes())?;
            w.write_all(&(ax.n as u64).to_le_bytes())?;
        }
        for z in &self.values {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("bad wavefield magic".into()));
        }
        let dims = read_u32(&mut r)? as usize;
        if dims == 0 || dims > 8 {
            return Err(Error::Format(format!("implausible dimension count {dims}")));
        }
        let mut axes = Vec::with_capacity(dims);
        for _ in 0..dims {
            let lower = read_f64(&mut r)?;
            let upper = read_f64(&mut r)?;
            let n = read_u64(&mut r)? as usize;
            axes.push(Axis::new(lower, upper, n)?);
        }
        let grid = Grid::from_axes(axes)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            values.push(Complex64::new(re, im));
        }
        WaveField::new(grid, values)
    }

    /// Writes CSV or binary depending on the extension (`.csv` or anything else).
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(file)
        } else {
            self.write_binary(file)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e == "csv") {
            WaveField::read_csv(file)
        } else {
            WaveField::read_binary(file)
        }
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Trigonometric interpolant of a periodic field, evaluated off-grid.
///
/// Points outside the grid box evaluate to zero: callers are expected to have
/// checked that the field is negligible near its boundary.
#[derive(Debug, Clone)]
pub struct SpectralInterpolant {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralInterpolant {
    pub fn new(field: &WaveField) -> Self {
        let grid = field.grid().clone();
        let plan = SpectralPlan::new(&grid);
        let mut coeffs = field.values().to_vec();
        plan.forward(&mut coeffs);
        let scale = 1.0 / grid.len() as f64;
        coeffs.iter_mut().for_each(|c| *c *= scale);
        SpectralInterpolant { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        if !self.grid.contains(x) {
            return Complex64::default();
        }
        let phases: Vec<Vec<Complex64>> = self
            .grid
            .axes()
            .iter()
            .zip(x)
            .map(|(ax, &xi)| axis_phases(ax, xi))
            .collect();
        contract(&self.coeffs, &phases)
    }
}

/// `exp(i k_m (x - a))` in FFT order; the Nyquist bin uses `cos` so that real
/// data interpolate to real values.
fn axis_phases(ax: &Axis, x: f64) -> Vec<Complex64> {
    let n = ax.n;
    let dk = 2.0 * std::f64::consts::PI / ax.length();
    let s = x - ax.lower;
    let step = Complex64::from_polar(1.0, dk * s);
    let mut out = vec![Complex64::default(); n];
    let mut up = Complex64::new(1.0, 0.0);
    let mut down = Complex64::new(1.0, 0.0);
    out[0] = up;
    for m in 1..n / 2 {
        up *= step;
        down *= step.conj();
        out[m] = up;
        out[n - m] = down;
    }
    out[n / 2] = Complex64::new((dk * s * (n / 2) as f64).cos(), 0.0);
    out
}

fn contract(coeffs: &[Complex64], phases: &[Vec<Complex64>]) -> Complex64 {
    let mut current: Vec<Complex64> = coeffs.to_vec();
    for ph in phases.iter().rev() {
        let n = ph.len();
        current = current
            .chunks(n)
            .map(|row| row.iter().zip(ph).map(|(c, p)| c * p).sum())
            .collect();
    }
    current[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: &Grid, a: f64, b: f64) -> WaveField {
        WaveField::sample(grid, |x| Complex64::new(b * (-a * x[0] * x[0] / 2.0).exp(), 0.0)).unwrap()
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = Grid::line(0.0, 1.0, 8).unwrap();
        assert_eq!(WaveField::zeros(g.clone()).l2_norm(), 0.0);
        let c = WaveField::sample(&g, |_| Complex64::new(0.0, -3.0)).unwrap();
        assert!((c.l2_norm() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_norm_matches_closed_form() {
        let g = Grid::line(-20.0, 20.0, 512).unwrap();
        for &(a, b) in &[(1.0, 1.0), (2.5, 0.3), (0.5, 2.0)] {
            let f = gaussian(&g, a, b);
            let exact = b * (PI / a).powf(0.25);
            assert!((f.l2_norm() - exact).abs() < 1e-10, "a={a}");
        }
    }

    #[test]
    fn distances() {
        let g = Grid::line(-20.0, 20.0, 512).unwrap();
        let f = gaussian(&g, 1.0, 1.0);
        assert_eq!(f.l2_distance(&f).unwrap(), 0.0);
        let minus = f.scaled(Complex64::new(-1.0, 0.0));
        assert!((f.l2_distance(&minus).unwrap() - 2.0 * f.l2_norm()).abs() < 1e-13);
        let g2 = gaussian(&g, 1.0, 2.0);
        assert!((f.l2_distance(&g2).unwrap() - PI.powf(0.25)).abs() < 1e-10);

        let other = WaveField::zeros(Grid::line(-20.0, 20.0, 256).unwrap());
        assert!(matches!(f.l2_distance(&other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn sampling() {
        let g = Grid::line(-10.0, 10.0, 256).unwrap();
        let ones = WaveField::sample(&g, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(ones.values().iter().all(|z| *z == Complex64::new(1.0, 0.0)));

        let f = WaveField::sample(&g, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0)).unwrap();
        // node 128 is x = 0
        assert_eq!(f.values()[128], Complex64::new(1.0, 0.0));
        assert!((f.max_abs() - 1.0).abs() < 1e-15);

        let wave = WaveField::sample(&g, |x| Complex64::from_polar(1.0, 3.7 * x[0])).unwrap();
        assert!(wave.values().iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));

        let bad = WaveField::sample(&g, |x| Complex64::new(1.0 / x[0], 0.0));
        assert!(matches!(bad, Err(Error::NonFinite(_))));
    }

    #[test]
    fn boundary_and_spectral_diagnostics() {
        let g = Grid::line(-20.0, 20.0, 256).unwrap();
        let f = gaussian(&g, 1.0, 1.0);
        assert!(f.boundary_mass() < 1e-30);
        assert!(f.spectral_tail() < 1e-12);
        let wide = gaussian(&g, 0.01, 1.0);
        assert!(wide.boundary_mass() > 1e-3);
        let rough = WaveField::sample(&g, |x| Complex64::new(if x[0].abs() < 1.0 { 1.0 } else { 0.0 }, 0.0)).unwrap();
        assert!(rough.spectral_tail() > 1e-4);
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let g = Grid::new(&[(-2.0, 2.0), (-1.0, 3.0)], &[8, 16]).unwrap();
        let f = WaveField::sample(&g, |x| Complex64::new(x[0].sin() * 1e-7, x[1] / 3.0)).unwrap();

        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# axis,-2e0,2e0,8\n# axis,-1e0,3e0,16\nindex,re,im\n0,"));
        assert_eq!(WaveField::read_csv(buf.as_slice()).unwrap(), f);

        let mut bin = Vec::new();
        f.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 8 + 4 + 2 * 24 + 16 * g.len());
        assert_eq!(WaveField::read_binary(bin.as_slice()).unwrap(), f);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let text = "# axis,0e0,1e0,8\nindex,re,im\n0,1,0\n2,1,0\n";
        assert!(matches!(WaveField::read_csv(text.as_bytes()), Err(Error::Format(_))));
        let short = "# axis,0e0,1e0,8\nindex,re,im\n0,1,0\n";
        assert!(matches!(WaveField::read_csv(short.as_bytes()), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn spectral_interpolation_of_smooth_field() {
        let g = Grid::line(-12.0, 12.0, 128).unwrap();
        let f = WaveField::sample(&g, |x| {
            Complex64::from_polar((-(x[0] - 0.3).powi(2) / 2.0).exp(), 0.7 * x[0])
        })
        .unwrap();
        let interp = SpectralInterpolant::new(&f);
        for &x in &[-3.21, -0.05, 0.0, 0.123456, 2.9] {
            let exact = Complex64::from_polar((-(x - 0.3f64).powi(2) / 2.0).exp(), 0.7 * x);
            assert!((interp.eval(&[x]) - exact).norm() < 1e-12, "x={x}");
        }
        assert_eq!(interp.eval(&[13.0]), Complex64::default());
    }

    #[test]
    fn spectral_interpolation_2d() {
        let g = Grid::new(&[(-10.0, 10.0), (-8.0, 8.0)], &[64, 64]).unwrap();
        let f = WaveField::sample(&g, |x| Complex64::new((-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp(), 0.0)).unwrap();
        let interp = SpectralInterpolant::new(&f);
        let p = [0.37, -0.81];
        let exact = (-(p[0] * p[0] + 2.0 * p[1] * p[1]) / 2.0f64).exp();
        assert!((interp.eval(&p) - exact).norm() < 1e-10);
    }
}
