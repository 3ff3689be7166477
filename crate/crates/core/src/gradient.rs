//! Finite-difference gradients with periodic wrap, and unit normals.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::vec3::{self, Vec3};
use crate::voxelgrid::VoxelGrid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Forward,
    Backward,
    #[default]
    Central,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Forward => "forward",
            Scheme::Backward => "backward",
            Scheme::Central => "central",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(Scheme::Forward),
            "backward" => Ok(Scheme::Backward),
            "central" => Ok(Scheme::Central),
            other => Err(Error::InvalidParameter(format!("unknown difference scheme '{other}'"))),
        }
    }
}

/// Per-voxel 3-vectors on the grid of the image they were derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    dims: [usize; 3],
    spacing: f64,
    scheme: Scheme,
    data: Vec<Vec3>,
}

impl VectorField {
    /// Wraps raw vectors, e.g. to rescale a field in tests or experiments.
    pub fn from_vectors(dims: [usize; 3], spacing: f64, scheme: Scheme, data: Vec<Vec3>) -> Result<Self, Error> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidParameter(format!(
                "vector field of {} entries does not match dims {dims:?}",
                data.len()
            )));
        }
        if data.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("vector field has non-finite entries".into()));
        }
        Ok(Self { dims, spacing, scheme, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.data[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { data: self.data.iter().map(|&v| vec3::scale(v, c)).collect(), ..self.clone() }
    }
}

/// Partial derivatives of `image` by the selected stencil, wrapping indices
/// periodically.
pub fn gradient(image: &VoxelGrid, scheme: Scheme) -> VectorField {
    let dims = image.dims();
    let h = image.spacing();
    let data = gradient_of(image.values(), dims, h, scheme);
    VectorField { dims, spacing: h, scheme, data }
}

pub(crate) fn gradient_of(f: &[f64], dims: [usize; 3], h: f64, scheme: Scheme) -> Vec<Vec3> {
    let [nx, ny, nz] = dims;
    let plane = nx * ny;
    let mut out = vec![[0.0; 3]; f.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
        let kp = (k + 1) % nz;
        let km = (k + nz - 1) % nz;
        for j in 0..ny {
            let jp = (j + 1) % ny;
            let jm = (j + ny - 1) % ny;
            for i in 0..nx {
                let ip = (i + 1) % nx;
                let im = (i + nx - 1) % nx;
                let at = |a: usize, b: usize, c: usize| f[a + nx * (b + ny * c)];
                let here = at(i, j, k);
                let plus = [at(ip, j, k), at(i, jp, k), at(i, j, kp)];
                let minus = [at(im, j, k), at(i, jm, k), at(i, j, km)];
                let g = &mut slab[i + nx * j];
                for a in 0..3 {
                    g[a] = match scheme {
                        Scheme::Central => (plus[a] - minus[a]) / (2.0 * h),
                        Scheme::Forward => (plus[a] - here) / h,
                        Scheme::Backward => (here - minus[a]) / h,
                    };
                }
            }
        }
    });
    out
}

/// Outward unit normals `-g / |g|`; zero where the gradient vanishes.
pub fn unit_normals(field: &VectorField) -> VectorField {
    let data = field
        .data
        .par_iter()
        .map(|&g| vec3::normalized(g).map_or([0.0; 3], |n| vec3::scale(n, -1.0)))
        .collect();
    VectorField { data, ..field.clone() }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::voxelgrid::Depth;
    use proptest::prelude::*;

    fn grid() -> impl Strategy<Value = VoxelGrid> {
        ([2usize..7, 2usize..7, 2usize..7], 0.1f64..3.0).prop_flat_map(|(dims, h)| {
            let n = dims[0] * dims[1] * dims[2];
            proptest::collection::vec(0.0f64..=1.0, n)
                .prop_map(move |v| VoxelGrid::new(dims, h, v, Depth::Continuous).unwrap())
        })
    }

    proptest! {
        #[test]
        fn central_field_sums_to_zero(g in grid()) {
            let f = gradient(&g, Scheme::Central);
            let tol = g.len() as f64 * 1e-12 / g.spacing();
            for a in 0..3 {
                let s: f64 = f.vectors().iter().map(|v| v[a]).sum();
                prop_assert!(s.abs() <= tol);
            }
        }

        #[test]
        fn central_field_is_mirror_equivariant(g in grid(), axis in 0usize..3) {
            let [nx, ny, nz] = g.dims();
            let n = g.dims()[axis];
            let mirror = |c: [usize; 3]| {
                let mut m = c;
                m[axis] = n - 1 - c[axis];
                m
            };
            let mirrored = VoxelGrid::from_fn(g.dims(), g.spacing(), Depth::Continuous, |i, j, k| {
                let m = mirror([i, j, k]);
                g.get(m[0], m[1], m[2])
            }).unwrap();
            let f = gradient(&g, Scheme::Central);
            let fm = gradient(&mirrored, Scheme::Central);
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let m = mirror([i, j, k]);
                        let mut expected = f.get(m[0], m[1], m[2]);
                        expected[axis] = -expected[axis];
                        prop_assert_eq!(fm.get(i, j, k), expected);
                    }
                }
            }
        }
    }
}
