//! Multi-dimensional FFT on a [`Grid`].
//!
//! Normalisation: the forward transform is the plain DFT
//! `F_m = sum_i f_i exp(-2 pi i m i / n)` (no scaling) and the inverse carries
//! the `1/N` factor, `N` being the total point count. Hence
//! `sum |f_i|^2 = (1/N) sum |F_m|^2`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

pub struct SpectralPlan {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    scale: f64,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("shape", &self.shape).finish()
    }
}

impl SpectralPlan {
    pub fn new(grid: &Grid) -> Self {
        let shape = grid.shape();
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scale = 1.0 / grid.len() as f64;
        SpectralPlan { shape, forward, inverse, scale }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
        for z in data.iter_mut() {
            *z *= self.scale;
        }
    }

    fn apply(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len(), "buffer does not match plan shape");
        let total = data.len();
        let mut stride = 1;
        let mut scratch = Vec::new();
        let mut line = Vec::new();
        for axis in (0..self.shape.len()).rev() {
            let n = self.shape[axis];
            let plan = &plans[axis];
            if stride == 1 {
                // contiguous lines: transform in place
                scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());
                plan.process_with_scratch(data, &mut scratch);
            } else {
                line.resize(n, Complex64::default());
                scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());
                let block = n * stride;
                for outer in (0..total).step_by(block) {
                    for inner in 0..stride {
                        let base = outer + inner;
                        for (m, slot) in line.iter_mut().enumerate() {
                            *slot = data[base + m * stride];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for (m, value) in line.iter().enumerate() {
                            data[base + m * stride] = *value;
                        }
                    }
                }
            }
            stride *= n;
        }
    }
}
