//! In-place 3D complex FFT over x-fastest arrays, built on rustfft.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

pub(crate) struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let plan = |planner: &mut FftPlanner<f64>, dir| {
            [
                planner.plan_fft(dims[0], dir),
                planner.plan_fft(dims[1], dir),
                planner.plan_fft(dims[2], dir),
            ]
        };
        let forward = plan(&mut planner, FftDirection::Forward);
        let inverse = plan(&mut planner, FftDirection::Inverse);
        Self { dims, forward, inverse }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|c| *c *= scale);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.dims;
        assert_eq!(data.len(), nx * ny * nz);
        let zero = Complex64::new(0.0, 0.0);

        let px = &plans[0];
        data.par_chunks_mut(nx).for_each_init(
            || vec![zero; px.get_inplace_scratch_len()],
            |scratch, line| px.process_with_scratch(line, scratch),
        );

        let py = &plans[1];
        data.par_chunks_mut(nx * ny).for_each_init(
            || (vec![zero; py.get_inplace_scratch_len()], vec![zero; ny]),
            |(scratch, line), slab| {
                for i in 0..nx {
                    for j in 0..ny {
                        line[j] = slab[i + nx * j];
                    }
                    py.process_with_scratch(line, scratch);
                    for j in 0..ny {
                        slab[i + nx * j] = line[j];
                    }
                }
            },
        );

        // z lines are made contiguous by a transpose into a scratch array.
        let pz = &plans[2];
        let plane = nx * ny;
        let mut columns = vec![zero; data.len()];
        columns.par_chunks_mut(nz).enumerate().for_each(|(col, line)| {
            for k in 0..nz {
                line[k] = data[col + plane * k];
            }
        });
        columns.par_chunks_mut(nz).for_each_init(
            || vec![zero; pz.get_inplace_scratch_len()],
            |scratch, line| pz.process_with_scratch(line, scratch),
        );
        data.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
            for (col, v) in slab.iter_mut().enumerate() {
                *v = columns[col * nz + k];
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], dims: [usize; 3]) -> Vec<Complex64> {
        let [nx, ny, nz] = dims;
        let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..nz {
                        for b in 0..ny {
                            for a in 0..nx {
                                let phase = -2.0
                                    * std::f64::consts::PI
                                    * ((i * a) as f64 / nx as f64
                                        + (j * b) as f64 / ny as f64
                                        + (k * c) as f64 / nz as f64);
                                acc += data[a + nx * (b + ny * c)] * Complex64::from_polar(1.0, phase);
                            }
                        }
                    }
                    out[i + nx * (j + ny * k)] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_direct_dft_and_inverts() {
        let dims = [4, 3, 5];
        let n = 60;
        let input: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(((i * 37) % 11) as f64 - 5.0, ((i * 13) % 7) as f64)).collect();
        let fft = Fft3::new(dims);
        let mut data = input.clone();
        fft.forward(&mut data);
        let reference = naive_dft(&input, dims);
        for (a, b) in data.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-10);
        }
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&input) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
