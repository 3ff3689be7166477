//! Periodic voxel grids, analytic shape descriptions and sub-voxel voxelization.
//!
//! Values are stored with x varying fastest and z slowest: the voxel
//! `(i, j, k)` lives at `i + nx * (j + ny * k)`. Voxel `(i, j, k)` covers
//! `[i h, (i + 1) h) x [j h, (j + 1) h) x [k h, (k + 1) h)` and its center
//! sits at `((i + 1/2) h, (j + 1/2) h, (k + 1/2) h)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Tolerance used when checking that a stored value belongs to a color set.
const LEVEL_TOLERANCE: f64 = 1e-9;

/// Gray-value depth of a grid.
///
/// `Levels(p)` restricts values to the color set `C^p`: `{0, 1}` for `p = 1`
/// and the multiples of `1 / (p^3 - 1)` in `[0, 1]` for `p >= 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Depth {
    Levels(u32),
    Continuous,
}

impl Depth {
    /// Number of equal steps between 0 and 1 in `C^p`.
    pub fn steps(p: u32) -> u64 {
        let p = p as u64;
        if p <= 1 {
            1
        } else {
            p * p * p - 1
        }
    }

    /// The `j`-th member of `C^p`.
    pub fn level(p: u32, j: u64) -> f64 {
        j as f64 / Self::steps(p) as f64
    }

    /// Nearest member of `C^p`; exact ties go to the larger member.
    pub fn nearest(p: u32, value: f64) -> f64 {
        let n = Self::steps(p);
        let j = (value.clamp(0.0, 1.0) * n as f64 + 0.5).floor() as u64;
        Self::level(p, j.min(n))
    }

    pub fn contains(self, value: f64) -> bool {
        if !(0.0..=1.0).contains(&value) {
            return false;
        }
        match self {
            Depth::Continuous => true,
            Depth::Levels(p) => {
                let scaled = value * Self::steps(p) as f64;
                (scaled - scaled.round()).abs() <= LEVEL_TOLERANCE
            }
        }
    }
}

/// Scalar gray values in `[0, 1]` on a periodic regular grid with spacing `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    spacing: f64,
    values: Vec<f64>,
    depth: Depth,
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], spacing: f64, values: Vec<f64>, depth: Depth) -> Result<Self> {
        check_dims(dims)?;
        check_spacing(spacing)?;
        if let Depth::Levels(0) = depth {
            return Err(Error::InvalidGrid("depth p must be at least 1".into()));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if values.len() != expected {
            return Err(Error::InvalidGrid(format!(
                "expected {expected} values for dims {dims:?}, got {}",
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|&v| !depth.contains(v)) {
            return Err(Error::InvalidGrid(format!(
                "value {} at index {idx} is not a member of the {depth:?} color set",
                values[idx]
            )));
        }
        Ok(Self { dims, spacing, values, depth })
    }

    pub fn zeros(dims: [usize; 3], spacing: f64) -> Result<Self> {
        check_dims(dims)?;
        Self::new(dims, spacing, vec![0.0; dims[0] * dims[1] * dims[2]], Depth::Levels(1))
    }

    /// Builds a grid from a function of the voxel index.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: f64,
        depth: Depth,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(dims)?;
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, spacing, values, depth)
    }

    /// Wraps already-validated values. Only for values produced by this crate.
    pub(crate) fn from_parts_unchecked(
        dims: [usize; 3],
        spacing: f64,
        values: Vec<f64>,
        depth: Depth,
    ) -> Self {
        debug_assert_eq!(values.len(), dims[0] * dims[1] * dims[2]);
        Self { dims, spacing, values, depth }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn depth(&self) -> Depth {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    /// Edge lengths of the periodic box.
    pub fn box_lengths(&self) -> Vec3 {
        box_lengths(self.dims, self.spacing)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn mean(&self) -> f64 {
        crate::reduce::sum(&self.values, |&v| v) / self.values.len() as f64
    }

    /// Re-tags the grid as continuous-valued.
    pub fn into_continuous(mut self) -> Self {
        self.depth = Depth::Continuous;
        self
    }

    /// Periodic circular shift: the value at `x` moves to `x + offset`.
    pub fn shift(&self, offset: [isize; 3]) -> Self {
        let [nx, ny, nz] = self.dims;
        let d = [
            offset[0].rem_euclid(nx as isize) as usize,
            offset[1].rem_euclid(ny as isize) as usize,
            offset[2].rem_euclid(nz as isize) as usize,
        ];
        let mut out = vec![0.0; self.values.len()];
        for k in 0..nz {
            let kk = (k + d[2]) % nz;
            for j in 0..ny {
                let jj = (j + d[1]) % ny;
                let src = nx * (j + ny * k);
                let dst = nx * (jj + ny * kk);
                for i in 0..nx {
                    out[dst + (i + d[0]) % nx] = self.values[src + i];
                }
            }
        }
        Self { dims: self.dims, spacing: self.spacing, values: out, depth: self.depth }
    }

    /// Replaces every value with its nearest member of `C^p`.
    pub fn quantize(&self, p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("depth p must be at least 1".into()));
        }
        let values = self.values.iter().map(|&v| Depth::nearest(p, v)).collect();
        Ok(Self { dims: self.dims, spacing: self.spacing, values, depth: Depth::Levels(p) })
    }

    /// Multiplies every value by `factor` in `[0, 1]`; the result is continuous.
    pub fn scale_values(&self, factor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::InvalidParameter(format!("scale factor {factor} outside [0, 1]")));
        }
        let values = self.values.iter().map(|v| v * factor).collect();
        Ok(Self { dims: self.dims, spacing: self.spacing, values, depth: Depth::Continuous })
    }
}

pub(crate) fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.iter().any(|&n| n < 2) {
        return Err(Error::InvalidGrid(format!(
            "every dimension must be at least 2, got {dims:?}"
        )));
    }
    Ok(())
}

pub(crate) fn check_spacing(spacing: f64) -> Result<()> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
    }
    Ok(())
}

pub fn box_lengths(dims: [usize; 3], spacing: f64) -> Vec3 {
    [dims[0] as f64 * spacing, dims[1] as f64 * spacing, dims[2] as f64 * spacing]
}

/// Analytic description of a solid.
///
/// Lengths are in the same units as the grid spacing. Points on the
/// boundary count as inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Ball { center: Vec3, radius: f64 },
    /// Flat-capped circular cylinder; `axis` must have unit norm.
    Cylinder { center: Vec3, axis: Vec3, length: f64, diameter: f64 },
    /// Slabs `lo <= x[normal_axis] <= hi`, unbounded in the other two directions.
    Laminate { normal_axis: usize, slabs: Vec<(f64, f64)> },
    Union(Vec<ShapeSpec>),
}

impl ShapeSpec {
    pub fn ball(center: Vec3, radius: f64) -> Self {
        ShapeSpec::Ball { center, radius }
    }

    pub fn cylinder(center: Vec3, axis: Vec3, length: f64, diameter: f64) -> Self {
        ShapeSpec::Cylinder { center, axis, length, diameter }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ShapeSpec::Ball { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidShape(format!("radius must be positive, got {radius}")));
                }
            }
            ShapeSpec::Cylinder { axis, length, diameter, .. } => {
                if !(*length > 0.0 && *diameter > 0.0) {
                    return Err(Error::InvalidShape(format!(
                        "cylinder length and diameter must be positive, got L = {length}, D = {diameter}"
                    )));
                }
                let norm = vec3::norm(*axis);
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidShape(format!("cylinder axis has norm {norm}, expected 1")));
                }
            }
            ShapeSpec::Laminate { normal_axis, slabs } => {
                if *normal_axis > 2 {
                    return Err(Error::InvalidShape(format!("laminate axis {normal_axis} is not 0, 1 or 2")));
                }
                if let Some((lo, hi)) = slabs.iter().find(|(lo, hi)| !(lo < hi)) {
                    return Err(Error::InvalidShape(format!("empty slab [{lo}, {hi}]")));
                }
            }
            ShapeSpec::Union(members) => {
                for m in members {
                    m.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: Vec3) -> bool {
        match self {
            ShapeSpec::Ball { center, radius } => {
                vec3::norm_sq(vec3::sub(x, *center)) <= radius * radius
            }
            ShapeSpec::Cylinder { center, axis, length, diameter } => {
                let d = vec3::sub(x, *center);
                let t = vec3::dot(d, *axis);
                if t.abs() > 0.5 * length {
                    return false;
                }
                let radial = vec3::sub(d, vec3::scale(*axis, t));
                let r = 0.5 * diameter;
                vec3::norm_sq(radial) <= r * r
            }
            ShapeSpec::Laminate { normal_axis, slabs } => {
                let c = x[*normal_axis];
                slabs.iter().any(|&(lo, hi)| lo <= c && c <= hi)
            }
            ShapeSpec::Union(members) => members.iter().any(|m| m.contains(x)),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`; laminates span the whole box
    /// transversally.
    pub fn bounding_box(&self, box_len: Vec3) -> (Vec3, Vec3) {
        match self {
            ShapeSpec::Ball { center, radius } => (
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
            ShapeSpec::Cylinder { center, axis, length, diameter } => {
                let r = 0.5 * diameter;
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                for a in 0..3 {
                    let ext = 0.5 * length * axis[a].abs()
                        + r * (1.0 - axis[a] * axis[a]).max(0.0).sqrt();
                    lo[a] = center[a] - ext;
                    hi[a] = center[a] + ext;
                }
                (lo, hi)
            }
            ShapeSpec::Laminate { normal_axis, slabs } => {
                let mut lo = [0.0; 3];
                let mut hi = box_len;
                lo[*normal_axis] = slabs.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
                hi[*normal_axis] = slabs.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            ShapeSpec::Union(members) => {
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for m in members {
                    let (l, h) = m.bounding_box(box_len);
                    for a in 0..3 {
                        lo[a] = lo[a].min(l[a]);
                        hi[a] = hi[a].max(h[a]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Checks that every member lies inside `[0, box_len]`.
    pub fn check_inside(&self, box_len: Vec3) -> Result<()> {
        if let ShapeSpec::Union(members) = self {
            return members.iter().try_for_each(|m| m.check_inside(box_len));
        }
        let (lo, hi) = self.bounding_box(box_len);
        let tol = 1e-9 * box_len.iter().cloned().fold(0.0, f64::max);
        for a in 0..3 {
            if lo[a] < -tol || hi[a] > box_len[a] + tol {
                return Err(Error::ShapeOutsideBox(format!(
                    "{self:?} spans [{}, {}] along axis {a}, box is [0, {}]",
                    lo[a], hi[a], box_len[a]
                )));
            }
        }
        Ok(())
    }

    fn is_convex(&self) -> bool {
        match self {
            ShapeSpec::Ball { .. } | ShapeSpec::Cylinder { .. } => true,
            ShapeSpec::Laminate { slabs, .. } => slabs.len() == 1,
            ShapeSpec::Union(_) => false,
        }
    }

    fn flatten<'a>(&'a self, out: &mut Vec<&'a ShapeSpec>) {
        match self {
            ShapeSpec::Union(members) => members.iter().for_each(|m| m.flatten(out)),
            other => out.push(other),
        }
    }
}

struct Primitive<'a> {
    shape: &'a ShapeSpec,
    lo: Vec3,
    hi: Vec3,
    convex: bool,
}

/// Rasterizes `shape` onto a grid of depth `p`.
///
/// For `p = 1` a voxel is lit iff its center is inside the shape. For `p > 1`
/// the centers of the `p^3` equal sub-cells are tested and the lit fraction
/// is snapped to the nearest member of `C^p`.
pub fn voxelize(shape: &ShapeSpec, dims: [usize; 3], spacing: f64, p: u32) -> Result<VoxelGrid> {
    if dims.contains(&0) {
        return Err(Error::InvalidGrid(format!("zero dimension in {dims:?}")));
    }
    check_dims(dims)?;
    check_spacing(spacing)?;
    if p == 0 {
        return Err(Error::InvalidParameter("depth p must be at least 1".into()));
    }
    shape.validate()?;
    let box_len = box_lengths(dims, spacing);

    let mut flat = Vec::new();
    shape.flatten(&mut flat);
    let prims: Vec<Primitive> = flat
        .into_iter()
        .map(|s| {
            let (lo, hi) = s.bounding_box(box_len);
            Primitive { shape: s, lo, hi, convex: s.is_convex() }
        })
        .collect();

    let [nx, ny, _] = dims;
    let samples = (p as usize).pow(3);
    let sub = spacing / p as f64;
    let mut values = vec![0.0; dims[0] * dims[1] * dims[2]];
    values.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
        let mut candidates: Vec<&Primitive> = Vec::with_capacity(prims.len());
        for j in 0..ny {
            for i in 0..nx {
                let lo = [i as f64 * spacing, j as f64 * spacing, k as f64 * spacing];
                let hi = [lo[0] + spacing, lo[1] + spacing, lo[2] + spacing];
                candidates.clear();
                candidates.extend(prims.iter().filter(|pr| {
                    (0..3).all(|a| pr.lo[a] <= hi[a] && pr.hi[a] >= lo[a])
                }));
                if candidates.is_empty() {
                    continue;
                }
                let count = if candidates.iter().any(|pr| pr.convex && covers_cell(pr.shape, lo, spacing)) {
                    samples
                } else {
                    count_inside(&candidates, lo, sub, p as usize)
                };
                let fraction = count as f64 / samples as f64;
                slab[i + nx * j] = if p == 1 { fraction } else { Depth::nearest(p, fraction) };
            }
        }
    });
    Ok(VoxelGrid::from_parts_unchecked(dims, spacing, values, Depth::Levels(p)))
}

/// True when all eight corners of the cell lie in the convex `shape`.
fn covers_cell(shape: &ShapeSpec, lo: Vec3, h: f64) -> bool {
    (0..8).all(|c| {
        let corner = [
            lo[0] + if c & 1 != 0 { h } else { 0.0 },
            lo[1] + if c & 2 != 0 { h } else { 0.0 },
            lo[2] + if c & 4 != 0 { h } else { 0.0 },
        ];
        shape.contains(corner)
    })
}

fn count_inside(candidates: &[&Primitive], lo: Vec3, sub: f64, p: usize) -> usize {
    let mut count = 0;
    for c in 0..p {
        let z = lo[2] + (c as f64 + 0.5) * sub;
        for b in 0..p {
            let y = lo[1] + (b as f64 + 0.5) * sub;
            for a in 0..p {
                let x = [lo[0] + (a as f64 + 0.5) * sub, y, z];
                if candidates.iter().any(|pr| pr.shape.contains(x)) {
                    count += 1;
                }
            }
        }
    }
    count
}
