//! Multigrid convergence sweeps against closed-form references, and a simple
//! lattice placer for fiber arrays.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ball_quantities, cylinder_w, FiberSpec};
use crate::error::{Error, Result};
use crate::filters::Kernel;
use crate::gradient::Scheme;
use crate::io::fmt_float;
use crate::minkowski::{analyze, qnt, tensor_error};
use crate::tensor::SymTensor3;
use crate::vec3::Vec3;
use crate::voxelgrid::{voxelize, ShapeSpec};

/// Default offset of the body from the box center, in voxels. A body centered
/// on the lattice keeps the cube symmetry, which makes its QNT exactly
/// isotropic at every resolution and hides the discretization error.
pub const DEFAULT_DISPLACEMENT: Vec3 = [0.3, 0.1, 0.2];

/// Test body for a sweep. Lengths are in µm; `displacement` moves the body
/// off the box center, in voxels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyShape {
    /// Ball in a cube of edge `box_factor * diameter`.
    Ball { diameter: f64, box_factor: f64, displacement: Vec3 },
    /// Flat-capped cylinder along `e_x` with a margin of one diameter around it.
    Cylinder { diameter: f64, aspect: f64, displacement: Vec3 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    pub volume: f64,
    pub surface: f64,
    pub w: SymTensor3,
    pub qnt: SymTensor3,
}

impl StudyShape {
    pub fn ball(diameter: f64) -> Self {
        StudyShape::Ball { diameter, box_factor: 1.5, displacement: DEFAULT_DISPLACEMENT }
    }

    pub fn cylinder(diameter: f64, aspect: f64) -> Self {
        StudyShape::Cylinder { diameter, aspect, displacement: DEFAULT_DISPLACEMENT }
    }

    pub fn with_displacement(self, d: Vec3) -> Self {
        match self {
            StudyShape::Ball { diameter, box_factor, .. } => StudyShape::Ball { diameter, box_factor, displacement: d },
            StudyShape::Cylinder { diameter, aspect, .. } => StudyShape::Cylinder { diameter, aspect, displacement: d },
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            StudyShape::Ball { diameter, .. } | StudyShape::Cylinder { diameter, .. } => diameter,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StudyShape::Ball { diameter, box_factor, .. } => diameter > 0.0 && box_factor > 1.0,
            StudyShape::Cylinder { diameter, aspect, .. } => diameter > 0.0 && aspect > 0.0,
        };
        if !ok {
            return Err(Error::InvalidShape(format!("invalid study shape {self:?}")));
        }
        Ok(())
    }

    /// Shape, grid dimensions and spacing at resolution `d_over_h`.
    pub fn setup(&self, d_over_h: f64) -> Result<(ShapeSpec, [usize; 3], f64)> {
        self.validate()?;
        if !(d_over_h > 0.0) {
            return Err(Error::InvalidParameter(format!("D/h must be positive, got {d_over_h}")));
        }
        let d = self.diameter();
        let h = d / d_over_h;
        let cells = |len: f64| ((len / h).round() as usize).max(2);
        let center = |dims: [usize; 3], disp: Vec3| -> Vec3 {
            std::array::from_fn(|a| dims[a] as f64 * h / 2.0 + disp[a] * h)
        };
        match *self {
            StudyShape::Ball { box_factor, displacement, .. } => {
                let dims = [cells(box_factor * d); 3];
                Ok((ShapeSpec::ball(center(dims, displacement), d / 2.0), dims, h))
            }
            StudyShape::Cylinder { aspect, displacement, .. } => {
                let dims = [cells((aspect + 1.0) * d), cells(2.0 * d), cells(2.0 * d)];
                let shape = ShapeSpec::cylinder(center(dims, displacement), [1.0, 0.0, 0.0], aspect * d, d);
                Ok((shape, dims, h))
            }
        }
    }

    pub fn reference(&self) -> Result<Reference> {
        self.validate()?;
        match *self {
            StudyShape::Ball { diameter, .. } => {
                let b = ball_quantities(diameter / 2.0)?;
                Ok(Reference { volume: b.volume, surface: b.surface, w: b.w, qnt: b.qnt })
            }
            StudyShape::Cylinder { diameter, aspect, .. } => {
                let f = FiberSpec::new([1.0, 0.0, 0.0], aspect * diameter, diameter)?;
                let w = cylinder_w(&f)?;
                let r = diameter / 2.0;
                Ok(Reference {
                    volume: std::f64::consts::PI * r * r * f.length,
                    surface: 3.0 * w.trace(),
                    w,
                    qnt: qnt(&w)?,
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub d_over_h: f64,
    pub p: u32,
    pub kernel: Kernel,
    pub scheme: Scheme,
    pub volume: f64,
    pub surface: f64,
    /// Relative Frobenius error of `W`.
    pub e: f64,
    /// Relative Frobenius error of the QNT.
    pub e_bar: f64,
    /// Seconds spent in the analysis, when timing was requested.
    pub wall_time: Option<f64>,
}

impl ConvergenceRow {
    pub fn surface_error(&self, reference: &Reference) -> f64 {
        self.surface / reference.surface - 1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub shape: StudyShape,
    pub resolutions: Vec<f64>,
    pub depths: Vec<u32>,
    pub kernels: Vec<Kernel>,
    pub scheme: Scheme,
    pub eps_rel: f64,
    pub timing: bool,
}

/// Runs every (D/h, p, kernel) combination; rows come back sorted by D/h,
/// then p, then kernel name and σ.
pub fn run_convergence(study: &ConvergenceStudy) -> Result<Vec<ConvergenceRow>> {
    let reference = study.shape.reference()?;
    let grid_points: Vec<(f64, u32)> =
        study.resolutions.iter().flat_map(|&r| study.depths.iter().map(move |&p| (r, p))).collect();
    let nested: Vec<Vec<ConvergenceRow>> = grid_points
        .par_iter()
        .map(|&(d_over_h, p)| {
            let (shape, dims, h) = study.shape.setup(d_over_h)?;
            let image = voxelize(&shape, dims, h, p)?;
            study
                .kernels
                .iter()
                .map(|kernel| {
                    let start = Instant::now();
                    let s = analyze(&image, kernel, study.scheme, study.eps_rel)?;
                    let elapsed = start.elapsed().as_secs_f64();
                    let q = s.qnt.ok_or(Error::EmptyInterface { trace: s.w.trace() })?;
                    Ok(ConvergenceRow {
                        d_over_h,
                        p,
                        kernel: *kernel,
                        scheme: study.scheme,
                        volume: s.volume,
                        surface: s.surface,
                        e: tensor_error(&s.w, &reference.w)?,
                        e_bar: tensor_error(&q, &reference.qnt)?,
                        wall_time: study.timing.then_some(elapsed),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<ConvergenceRow> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.d_over_h
            .total_cmp(&b.d_over_h)
            .then(a.p.cmp(&b.p))
            .then(a.kernel.name().cmp(b.kernel.name()))
            .then(a.kernel.sigma().unwrap_or(0.0).total_cmp(&b.kernel.sigma().unwrap_or(0.0)))
    });
    Ok(rows)
}

pub const CONVERGENCE_HEADER: &str = "d_over_h,p,kernel,sigma,scheme,volume,surface,e,e_bar,wall_time_s";

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in rows {
        let cols = [
            fmt_float(r.d_over_h),
            r.p.to_string(),
            r.kernel.name().to_string(),
            r.kernel.sigma().map(fmt_float).unwrap_or_default(),
            r.scheme.name().to_string(),
            fmt_float(r.volume),
            fmt_float(r.surface),
            fmt_float(r.e),
            fmt_float(r.e_bar),
            r.wall_time.map(fmt_float).unwrap_or_default(),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Places `fibers` on a lattice of `cells` boxes, one fiber per cell, filling
/// cells x-fastest. Each cell holds the largest fiber bounding box plus `gap`
/// on every side pair, and the lattice is centered in a box of whole voxels.
///
/// Returns the union shape and the grid dimensions.
pub fn place_fibers(fibers: &[FiberSpec], cells: [usize; 3], gap: f64, spacing: f64) -> Result<(ShapeSpec, [usize; 3])> {
    if fibers.is_empty() {
        return Err(Error::NoFibers);
    }
    let capacity = cells[0] * cells[1] * cells[2];
    if fibers.len() > capacity {
        return Err(Error::InvalidParameter(format!(
            "{} fibers do not fit in {capacity} lattice cells",
            fibers.len()
        )));
    }
    if !(gap >= 0.0 && spacing > 0.0) {
        return Err(Error::InvalidParameter(format!("gap must be >= 0 and spacing > 0, got {gap}, {spacing}")));
    }
    let mut cell = [0.0f64; 3];
    for f in fibers {
        f.validate()?;
        for (a, c) in cell.iter_mut().enumerate() {
            let pa = f.axis[a].abs();
            let half = f.length / 2.0 * pa + f.diameter / 2.0 * (1.0 - pa * pa).max(0.0).sqrt();
            *c = c.max(2.0 * half + gap);
        }
    }
    let dims: [usize; 3] = std::array::from_fn(|a| ((cells[a] as f64 * cell[a] / spacing).ceil() as usize).max(2));
    let origin: Vec3 = std::array::from_fn(|a| (dims[a] as f64 * spacing - cells[a] as f64 * cell[a]) / 2.0);
    let shapes = fibers
        .iter()
        .enumerate()
        .map(|(n, f)| {
            let idx = [n % cells[0], (n / cells[0]) % cells[1], n / (cells[0] * cells[1])];
            let center = std::array::from_fn(|a| origin[a] + (idx[a] as f64 + 0.5) * cell[a]);
            ShapeSpec::cylinder(center, f.axis, f.length, f.diameter)
        })
        .collect();
    Ok((ShapeSpec::Union(shapes), dims))
}
