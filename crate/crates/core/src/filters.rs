//! Smoothing kernels and periodic FFT convolution.
//!
//! Kernel widths are dimensionless and scaled by the voxel length `h` when a
//! kernel is sampled. Sampled kernels are renormalized so that their discrete
//! integral is exactly one, which makes every filter mean-preserving.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::voxelgrid::{check_dims, check_spacing, Depth, VoxelGrid};

/// Gaussian kernels are truncated at this many standard deviations.
pub const GAUSSIAN_TRUNCATION: f64 = 3.0;

/// Filtered values may leave `[0, 1]` by this much through round-off before
/// it is treated as a normalization error.
pub const RANGE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Gaussian { sigma: f64 },
    Ball { sigma: f64 },
    None,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Gaussian { .. } => "gaussian",
            Kernel::Ball { .. } => "ball",
            Kernel::None => "none",
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            Kernel::Gaussian { sigma } | Kernel::Ball { sigma } => Some(sigma),
            Kernel::None => None,
        }
    }

    /// Builds a kernel from its name and width.
    pub fn from_name(name: &str, sigma: Option<f64>) -> Result<Self> {
        let need = || {
            sigma.ok_or_else(|| Error::InvalidKernel(format!("kernel '{name}' needs a width sigma")))
        };
        let k = match name.to_ascii_lowercase().as_str() {
            "none" => Kernel::None,
            "ball" => Kernel::Ball { sigma: need()? },
            "gaussian" | "gauss" => Kernel::Gaussian { sigma: need()? },
            other => return Err(Error::InvalidKernel(format!("unknown kernel '{other}'"))),
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self.sigma() {
            Some(s) if !(s.is_finite() && s > 0.0) => {
                Err(Error::InvalidKernel(format!("sigma must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }

    /// Radius of the sampled support in voxel lengths.
    pub fn support_radius(&self) -> f64 {
        match *self {
            Kernel::Gaussian { sigma } => GAUSSIAN_TRUNCATION * sigma,
            Kernel::Ball { sigma } => sigma,
            Kernel::None => 0.0,
        }
    }

    /// Continuum kernel value at squared distance `r2` (in voxel lengths
    /// squared), before truncation and renormalization.
    fn density(&self, r2: f64, h: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Kernel::Gaussian { sigma } => {
                let s = h * sigma;
                (-(r2 * h * h) / (2.0 * s * s)).exp() / (s.powi(3) * (2.0 * PI).powf(1.5))
            }
            Kernel::Ball { sigma } => 3.0 / (4.0 * PI * (h * sigma).powi(3)),
            Kernel::None => 0.0,
        }
    }
}

/// `none`, `ball:<sigma>` or `gaussian:<sigma>`.
impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, sigma) = match s.split_once(':') {
            Some((n, v)) => {
                let sigma = v
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidKernel(format!("bad kernel width in '{s}'")))?;
                (n.trim(), Some(sigma))
            }
            None => (s.trim(), None),
        };
        Kernel::from_name(name, sigma)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sigma() {
            Some(s) => write!(f, "{}:{}", self.name(), s),
            None => f.write_str(self.name()),
        }
    }
}

/// Kernel density sampled at voxel-center offsets in wrap-around layout:
/// offset `(0, 0, 0)` sits at index 0 and negative offsets wrap to the end.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledKernel {
    dims: [usize; 3],
    spacing: f64,
    values: Vec<f64>,
}

impl SampledKernel {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Signed offset (in voxels) represented by index `i` along an axis of length `n`.
    pub fn offset(i: usize, n: usize) -> isize {
        if i <= n / 2 {
            i as isize
        } else {
            i as isize - n as isize
        }
    }

    pub fn value_at_offset(&self, d: [isize; 3]) -> f64 {
        let w = |d: isize, n: usize| d.rem_euclid(n as isize) as usize;
        let [nx, ny, nz] = self.dims;
        self.values[w(d[0], nx) + nx * (w(d[1], ny) + ny * w(d[2], nz))]
    }
}

pub fn sample_kernel(kernel: &Kernel, dims: [usize; 3], spacing: f64) -> Result<SampledKernel> {
    check_dims(dims)?;
    check_spacing(spacing)?;
    kernel.validate()?;
    if let Kernel::None = kernel {
        return Err(Error::InvalidKernel("the identity filter has no sampled kernel".into()));
    }
    let radius = kernel.support_radius();
    let min_dim = *dims.iter().min().expect("three dims");
    if min_dim as f64 / 2.0 <= radius {
        return Err(Error::KernelTooLarge { radius, min_dim });
    }
    let r2_max = radius * radius;
    let [nx, ny, nz] = dims;
    let mut values = vec![0.0; nx * ny * nz];
    for k in 0..nz {
        let dz = SampledKernel::offset(k, nz);
        for j in 0..ny {
            let dy = SampledKernel::offset(j, ny);
            for i in 0..nx {
                let dx = SampledKernel::offset(i, nx);
                // Integer squared norm keeps the samples exactly cube-symmetric.
                let m = (dx * dx + dy * dy + dz * dz) as f64;
                if m <= r2_max {
                    values[i + nx * (j + ny * k)] = kernel.density(m, spacing);
                }
            }
        }
    }
    let integral: f64 = values.iter().sum::<f64>() * spacing.powi(3);
    let scale = 1.0 / integral;
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(SampledKernel { dims, spacing, values })
}

/// Periodic convolution with a fixed sampled kernel, reusable across fields.
pub struct Convolver {
    dims: [usize; 3],
    fft: Fft3,
    spectrum: Vec<Complex64>,
}

impl Convolver {
    pub fn new(kernel: &SampledKernel) -> Self {
        let fft = Fft3::new(kernel.dims);
        let h3 = kernel.spacing.powi(3);
        let mut spectrum: Vec<Complex64> =
            kernel.values.iter().map(|&v| Complex64::new(v * h3, 0.0)).collect();
        fft.forward(&mut spectrum);
        Self { dims: kernel.dims, fft, spectrum }
    }

    pub fn for_kernel(kernel: &Kernel, dims: [usize; 3], spacing: f64) -> Result<Self> {
        Ok(Self::new(&sample_kernel(kernel, dims, spacing)?))
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// `(F * f)(x) = sum_y F(x - y) f(y) h^3` for a real field `f`.
    pub fn apply(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), self.spectrum.len(), "field size does not match kernel grid");
        let mut data: Vec<Complex64> = field.par_iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut data);
        data.par_iter_mut().zip(self.spectrum.par_iter()).for_each(|(d, k)| *d *= k);
        self.fft.inverse(&mut data);
        data.into_par_iter().map(|c| c.re).collect()
    }
}

/// Applies `kernel` to `image` by periodic FFT convolution.
///
/// The identity filter returns the image unchanged. Otherwise the result is
/// continuous-valued; round-off excursions outside `[0, 1]` up to
/// [`RANGE_TOLERANCE`] are clamped and anything larger is an error.
pub fn fft_convolve(image: &VoxelGrid, kernel: &Kernel) -> Result<VoxelGrid> {
    kernel.validate()?;
    if let Kernel::None = kernel {
        return Ok(image.clone());
    }
    let conv = Convolver::for_kernel(kernel, image.dims(), image.spacing())?;
    convolve_grid(image, &conv)
}

pub fn convolve_grid(image: &VoxelGrid, conv: &Convolver) -> Result<VoxelGrid> {
    if conv.dims() != image.dims() {
        return Err(Error::DimensionMismatch { expected: conv.dims(), actual: image.dims() });
    }
    let mut out = conv.apply(image.values());
    if let Some((index, &value)) = out
        .iter()
        .enumerate()
        .find(|(_, &v)| !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&v))
    {
        return Err(Error::FilterRange { index, value });
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(VoxelGrid::from_parts_unchecked(image.dims(), image.spacing(), out, Depth::Continuous))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::CubeSymmetry;
    use crate::voxelgrid::{voxelize, ShapeSpec};

    fn nonzero_offsets(k: &SampledKernel) -> Vec<[isize; 3]> {
        let [nx, ny, nz] = k.dims();
        let mut out = Vec::new();
        for c in 0..nz {
            for b in 0..ny {
                for a in 0..nx {
                    if k.values()[a + nx * (b + ny * c)] != 0.0 {
                        out.push([
                            SampledKernel::offset(a, nx),
                            SampledKernel::offset(b, ny),
                            SampledKernel::offset(c, nz),
                        ]);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn kernels_integrate_to_one() {
        for kernel in [
            Kernel::Gaussian { sigma: 0.7 },
            Kernel::Gaussian { sigma: 2.0 },
            Kernel::Ball { sigma: 1.2 },
            Kernel::Ball { sigma: 3.5 },
        ] {
            for h in [1.0, 0.37, 2.5] {
                let k = sample_kernel(&kernel, [16, 18, 20], h).unwrap();
                let integral: f64 = k.values().iter().sum::<f64>() * h.powi(3);
                assert!((integral - 1.0).abs() < 1e-12, "{kernel:?} h={h}: {integral}");
            }
        }
    }

    #[test]
    fn ball_kernel_support_is_enumerated_offsets() {
        let k = sample_kernel(&Kernel::Ball { sigma: 1.2 }, [32; 3], 1.0).unwrap();
        let mut expected = Vec::new();
        for dz in -2isize..=2 {
            for dy in -2isize..=2 {
                for dx in -2isize..=2 {
                    if ((dx * dx + dy * dy + dz * dz) as f64).sqrt() <= 1.2 {
                        expected.push([dx, dy, dz]);
                    }
                }
            }
        }
        let mut got = nonzero_offsets(&k);
        got.sort();
        expected.sort();
        assert_eq!(got, expected);
        assert_eq!(got.len(), 7);
        let first = k.value_at_offset([0, 0, 0]);
        assert!(got.iter().all(|&d| k.value_at_offset(d) == first));
    }

    #[test]
    fn sub_voxel_ball_kernel_is_a_delta() {
        let k = sample_kernel(&Kernel::Ball { sigma: 0.4 }, [8; 3], 1.0).unwrap();
        assert_eq!(nonzero_offsets(&k), vec![[0, 0, 0]]);
        assert!((k.value_at_offset([0, 0, 0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oversized_kernels_are_rejected() {
        assert!(matches!(
            sample_kernel(&Kernel::Gaussian { sigma: 2.0 }, [12; 3], 1.0),
            Err(Error::KernelTooLarge { .. })
        ));
        assert!(sample_kernel(&Kernel::Gaussian { sigma: 2.0 }, [13; 3], 1.0).is_ok());
        assert!(sample_kernel(&Kernel::Ball { sigma: 3.0 }, [6; 3], 1.0).is_err());
        assert!(sample_kernel(&Kernel::None, [6; 3], 1.0).is_err());
        assert!(Kernel::from_name("ball", Some(-1.0)).is_err());
    }

    #[test]
    fn sampled_kernels_are_cube_symmetric() {
        for kernel in [Kernel::Gaussian { sigma: 1.5 }, Kernel::Ball { sigma: 2.3 }] {
            let k = sample_kernel(&kernel, [12, 14, 16], 1.0).unwrap();
            let [nx, ny, nz] = k.dims();
            for s in CubeSymmetry::all() {
                let r = s.matrix();
                for c in 0..nz {
                    for b in 0..ny {
                        for a in 0..nx {
                            let d = [
                                SampledKernel::offset(a, nx),
                                SampledKernel::offset(b, ny),
                                SampledKernel::offset(c, nz),
                            ];
                            let v = k.value_at_offset(d);
                            if v == 0.0 {
                                continue;
                            }
                            let mut rd = [0isize; 3];
                            for i in 0..3 {
                                for j in 0..3 {
                                    rd[i] += r[i][j] as isize * d[j];
                                }
                            }
                            assert_eq!(k.value_at_offset(rd), v);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn constant_and_identity_filters() {
        let g = VoxelGrid::new([10, 12, 14], 0.5, vec![0.3; 1680], Depth::Continuous).unwrap();
        for kernel in [Kernel::Gaussian { sigma: 1.0 }, Kernel::Ball { sigma: 2.0 }] {
            let f = fft_convolve(&g, &kernel).unwrap();
            assert!(f.values().iter().all(|v| (v - 0.3).abs() < 1e-12));
            assert_eq!(f.depth(), Depth::Continuous);
        }
        let ball = voxelize(&ShapeSpec::ball([5.0; 3], 3.0), [10; 3], 1.0, 2).unwrap();
        assert_eq!(fft_convolve(&ball, &Kernel::None).unwrap(), ball);
    }

    #[test]
    fn matches_direct_convolution() {
        let ball = voxelize(&ShapeSpec::ball([4.1, 3.9, 4.3], 2.2), [9, 8, 10], 1.0, 3).unwrap();
        let kernel = Kernel::Ball { sigma: 1.8 };
        let k = sample_kernel(&kernel, ball.dims(), 1.0).unwrap();
        let f = fft_convolve(&ball, &kernel).unwrap();
        let [nx, ny, nz] = ball.dims();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut acc = 0.0;
                    for c in 0..nz {
                        for b in 0..ny {
                            for a in 0..nx {
                                let d = [x as isize - a as isize, y as isize - b as isize, z as isize - c as isize];
                                acc += k.value_at_offset(d) * ball.get(a, b, c);
                            }
                        }
                    }
                    assert!((f.get(x, y, z) - acc).abs() < 1e-12);
                }
            }
        }
    }

    /// Volume fraction of a ball of radius `r` on the far side of a plane at
    /// signed distance `t` from its center.
    fn cap_fraction(t: f64, r: f64) -> f64 {
        let u = (t / r).clamp(-1.0, 1.0);
        0.5 + 0.75 * u - 0.25 * u * u * u
    }

    #[test]
    fn ball_filtered_laminate_has_ramp_of_width_two_sigma() {
        // Slab 0 <= x <= 32 in a 64-voxel periodic box; interfaces at x = 0 and x = 32.
        let (n, h, sigma) = (64usize, 1.0, 6.0);
        let slab = ShapeSpec::Laminate { normal_axis: 0, slabs: vec![(0.0, 32.0)] };
        let g = voxelize(&slab, [n, 16, 16], h, 1).unwrap();
        let f = fft_convolve(&g, &Kernel::Ball { sigma }).unwrap();
        let profile: Vec<f64> = (0..n).map(|i| f.get(i, 3, 5)).collect();
        let r = h * sigma;
        for (i, &v) in profile.iter().enumerate() {
            let x = (i as f64 + 0.5) * h;
            // Solid and void plateaus survive away from the interfaces.
            if (x - 16.0).abs() + r < 16.0 {
                assert!((v - 1.0).abs() < 1e-12);
            }
            if (x - 48.0).abs() + r < 16.0 {
                assert!(v.abs() < 1e-12);
            }
        }
        // Across the interface at x = 32 the profile follows the continuum cap
        // fraction, which rises from 0 to 1 over a ramp of width 2 h sigma.
        for (i, &v) in profile.iter().enumerate().take(40).skip(24) {
            let x = (i as f64 + 0.5) * h;
            let expected = cap_fraction(32.0 - x, r);
            assert!((v - expected).abs() < 0.02, "x={x}: {v} vs {expected}");
        }
        let mean_slope = (cap_fraction(r, r) - cap_fraction(-r, r)) / (2.0 * r);
        assert!((mean_slope - 1.0 / (2.0 * r)).abs() < 1e-15);
        // Discrete mean slope across the ramp, between the last voxels fully
        // outside it on either side.
        let (lo, hi) = (25usize, 38usize);
        let discrete = (profile[lo] - profile[hi]) / ((hi - lo) as f64 * h);
        assert!((discrete - 1.0 / (2.0 * r)).abs() / (1.0 / (2.0 * r)) < 0.2);
    }
}
