//! Periodic grid with `m` points per axis and an `d`-dimensional FFT built from
//! one-dimensional transforms along each axis.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::{box_points, LatticeVector};

pub struct SpectralGrid {
    pub dim: usize,
    /// Points per axis.
    pub m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl SpectralGrid {
    pub fn new(dim: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            dim,
            m,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            line: vec![Complex64::default(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of mode `n` (coordinates taken modulo `m`).
    pub fn index(&self, n: &LatticeVector) -> usize {
        let m = self.m as i64;
        n.coords()
            .iter()
            .fold(0, |acc, &c| acc * self.m + (c as i64).rem_euclid(m) as usize)
    }

    /// Signed mode of a flat index, in `(-m/2, m/2]`.
    pub fn mode(&self, mut idx: usize) -> LatticeVector {
        let mut coords = [0i32; 4];
        for axis in (0..self.dim).rev() {
            let r = (idx % self.m) as i32;
            idx /= self.m;
            coords[axis] = if r > (self.m as i32) / 2 { r - self.m as i32 } else { r };
        }
        LatticeVector::new(&coords[..self.dim])
    }

    /// Flat indices of the box `|n|_inf <= k`, in lexicographic mode order.
    pub fn box_indices(&self, k: u32) -> Vec<(LatticeVector, usize)> {
        box_points(self.dim, k)
            .into_iter()
            .map(|n| {
                let i = self.index(&n);
                (n, i)
            })
            .collect()
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        let m = self.m;
        let total = data.len();
        let fft = if inverse { &self.inverse } else { &self.forward };
        for axis in 0..self.dim {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let block = stride * m;
            for base in (0..total).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (j, x) in self.line.iter_mut().enumerate() {
                        *x = data[start + j * stride];
                    }
                    fft.process_with_scratch(&mut self.line, &mut self.scratch);
                    for (j, x) in self.line.iter().enumerate() {
                        data[start + j * stride] = *x;
                    }
                }
            }
        }
    }

    /// Physical values `u_j = sum_n uhat_n e^{i n x_j}`.
    pub fn to_physical(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Fourier coefficients `uhat_n = M^{-d} sum_j u_j e^{-i n x_j}`.
    pub fn to_spectral(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
        let scale = 1.0 / data.len() as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_two_dims() {
        let mut g = SpectralGrid::new(2, 5);
        let mut data: Vec<Complex64> = (0..25)
            .map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1))
            .collect();
        let orig = data.clone();
        g.to_physical(&mut data);
        g.to_spectral(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_is_plane_wave() {
        let mut g = SpectralGrid::new(1, 7);
        let mut data = vec![Complex64::default(); 7];
        let n = LatticeVector::new(&[-2]);
        data[g.index(&n)] = Complex64::new(1.0, 0.0);
        g.to_physical(&mut data);
        for (j, u) in data.iter().enumerate() {
            let x = 2.0 * std::f64::consts::PI * j as f64 / 7.0;
            assert!((u - Complex64::from_polar(1.0, -2.0 * x)).norm() < 1e-12);
        }
        assert_eq!(g.mode(g.index(&n)), n);
    }
}
