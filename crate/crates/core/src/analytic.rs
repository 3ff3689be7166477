//! Closed-form reference values: balls, flat-capped cylinders and systems of
//! such cylinders.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Mat3, SymTensor3, SymTensor4};
use crate::vec3::{self, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallQuantities {
    pub volume: f64,
    pub surface: f64,
    pub w: SymTensor3,
    pub qnt: SymTensor3,
    /// Mean-width type coefficient of the Steiner polynomial.
    pub v1: f64,
    /// Euler characteristic.
    pub v0: f64,
}

pub fn ball_quantities(radius: f64) -> Result<BallQuantities> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidShape(format!("ball radius must be positive, got {radius}")));
    }
    let r2 = radius * radius;
    Ok(BallQuantities {
        volume: 4.0 * PI * r2 * radius / 3.0,
        surface: 4.0 * PI * r2,
        w: SymTensor3::identity() * (4.0 * PI * r2 / 9.0),
        qnt: SymTensor3::identity() * (1.0 / 3.0),
        v1: 4.0 * radius,
        v0: 1.0,
    })
}

/// Volume of the parallel body `B_R ⊕ B_ε` from the Steiner polynomial
/// `V + εS + πε²V₁ + (4π/3)ε³V₀`.
pub fn steiner_volume(radius: f64, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("parallel distance must be non-negative, got {eps}")));
    }
    let b = ball_quantities(radius)?;
    Ok(b.volume + eps * b.surface + PI * eps * eps * b.v1 + 4.0 * PI / 3.0 * eps.powi(3) * b.v0)
}

/// A straight cylinder with flat end caps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub axis: Vec3,
    pub length: f64,
    pub diameter: f64,
}

impl FiberSpec {
    pub fn new(axis: Vec3, length: f64, diameter: f64) -> Result<Self> {
        let f = Self { axis, length, diameter };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if (vec3::norm(self.axis) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidShape(format!("fiber axis {:?} is not a unit vector", self.axis)));
        }
        if !(self.length > 0.0 && self.diameter > 0.0) || !self.length.is_finite() || !self.diameter.is_finite() {
            return Err(Error::InvalidShape(format!(
                "fiber length and diameter must be positive, got L = {}, D = {}",
                self.length, self.diameter
            )));
        }
        Ok(())
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.length / self.diameter
    }
}

/// The minimal rotation taking `e_z` to the unit vector `p` (axis `e_z × p`).
/// For `p = -e_z` this is the half-turn about `e_x`.
pub fn rotation_from_ez(p: Vec3) -> Mat3 {
    let c = p[2];
    if c <= -1.0 + 1e-15 {
        return [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
    }
    // Rodrigues with k = e_z × p = (-p_y, p_x, 0): R = I + [k]× + [k]×² / (1 + c).
    let (kx, ky) = (-p[1], p[0]);
    let f = 1.0 / (1.0 + c);
    [
        [1.0 - f * ky * ky, f * kx * ky, ky],
        [f * kx * ky, 1.0 - f * kx * kx, -kx],
        [-ky, kx, c],
    ]
}

fn bracket(axis: Vec3, aspect: f64) -> SymTensor3 {
    let pp = SymTensor3::outer(axis);
    pp + (SymTensor3::identity() - pp) * aspect
}

/// `W_1^{0,2}` of a flat-capped cylinder: `(πD²/6)[p⊗p + (L/D)(I − p⊗p)]`.
///
/// Built from the axis-aligned tensor by conjugation, so the result is exactly
/// symmetric and its spectrum does not depend on the axis.
pub fn cylinder_w(fiber: &FiberSpec) -> Result<SymTensor3> {
    fiber.validate()?;
    let aligned = bracket([0.0, 0.0, 1.0], fiber.aspect_ratio()) * (PI * fiber.diameter.powi(2) / 6.0);
    Ok(aligned.conjugate(&rotation_from_ez(fiber.axis)))
}

pub fn fiber_qnt(fiber: &FiberSpec) -> Result<SymTensor3> {
    fiber.validate()?;
    let a = fiber.aspect_ratio();
    Ok(bracket(fiber.axis, a) * (1.0 / (1.0 + 2.0 * a)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSystemTensors {
    /// Second-order orientation tensor, the mean of `p⊗p`.
    pub a: SymTensor3,
    /// Fourth-order orientation tensor, the mean of `p⊗p⊗p⊗p`.
    pub a4: SymTensor4,
    pub w: SymTensor3,
    pub qnt: SymTensor3,
}

/// Orientation tensors and the summed Minkowski tensor of a set of fibers.
pub fn fiber_system_tensors(fibers: &[FiberSpec]) -> Result<FiberSystemTensors> {
    if fibers.is_empty() {
        return Err(Error::NoFibers);
    }
    // Sum in a canonical order so the result does not depend on list order.
    let mut sorted = fibers.to_vec();
    sorted.sort_by(|x, y| {
        let key = |f: &FiberSpec| [f.axis[0], f.axis[1], f.axis[2], f.length, f.diameter];
        key(x).partial_cmp(&key(y)).unwrap_or(std::cmp::Ordering::Equal)
    });
    let n = sorted.len() as f64;
    let mut a = SymTensor3::ZERO;
    let mut a4 = SymTensor4::default();
    let mut w = SymTensor3::ZERO;
    for f in &sorted {
        a += SymTensor3::outer(f.axis);
        a4 = a4 + SymTensor4::outer(f.axis);
        w += cylinder_w(f)?;
    }
    let qnt = crate::minkowski::qnt(&w)?;
    Ok(FiberSystemTensors { a: a * (1.0 / n), a4: a4.scaled(1.0 / n), w, qnt })
}
