//! Symmetric second- and fourth-order tensors in three dimensions.

use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::vec3::Vec3;

pub type Mat3 = [[f64; 3]; 3];

/// Symmetric 3x3 tensor stored by its six independent components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensor3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

/// Eigendecomposition of a [`SymTensor3`].
///
/// Eigenvalues are sorted in descending order; `vectors[i]` belongs to
/// `values[i]` and has its largest-magnitude component positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEigen {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

impl SymTensor3 {
    pub const ZERO: Self = Self { xx: 0.0, yy: 0.0, zz: 0.0, xy: 0.0, xz: 0.0, yz: 0.0 };

    pub fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(xx: f64, yy: f64, zz: f64) -> Self {
        Self { xx, yy, zz, ..Self::ZERO }
    }

    /// Components in the order `xx, yy, zz, xy, xz, yz`.
    pub fn from_components(c: [f64; 6]) -> Self {
        Self { xx: c[0], yy: c[1], zz: c[2], xy: c[3], xz: c[4], yz: c[5] }
    }

    pub fn components(&self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
    }

    /// `v ⊗ v`
    pub fn outer(v: Vec3) -> Self {
        Self {
            xx: v[0] * v[0],
            yy: v[1] * v[1],
            zz: v[2] * v[2],
            xy: v[0] * v[1],
            xz: v[0] * v[2],
            yz: v[1] * v[2],
        }
    }

    /// Symmetric part of a full matrix.
    pub fn from_matrix(m: Mat3) -> Self {
        Self {
            xx: m[0][0],
            yy: m[1][1],
            zz: m[2][2],
            xy: 0.5 * (m[0][1] + m[1][0]),
            xz: 0.5 * (m[0][2] + m[2][0]),
            yz: 0.5 * (m[1][2] + m[2][1]),
        }
    }

    pub fn to_matrix(&self) -> Mat3 {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.to_matrix()[i][j]
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn frobenius_norm(&self) -> f64 {
        let off = self.xy * self.xy + self.xz * self.xz + self.yz * self.yz;
        (self.xx * self.xx + self.yy * self.yy + self.zz * self.zz + 2.0 * off).sqrt()
    }

    pub fn max_abs_component(&self) -> f64 {
        self.components().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `R T Rᵀ`
    pub fn conjugate(&self, r: &Mat3) -> Self {
        let t = self.to_matrix();
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += r[i][k] * t[k][l] * r[j][l];
                    }
                }
                *o = s;
            }
        }
        Self::from_matrix(out)
    }

    pub fn eigen(&self) -> SymEigen {
        let m = self.to_matrix();
        let eig = SymmetricEigen::new(Matrix3::from_fn(|i, j| m[i][j]));
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut values = [0.0; 3];
        let mut vectors = [[0.0; 3]; 3];
        for (slot, &src) in order.iter().enumerate() {
            values[slot] = eig.eigenvalues[src];
            let col = eig.eigenvectors.column(src);
            let mut v = [col[0], col[1], col[2]];
            let lead = (0..3).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
            if v[lead] < 0.0 {
                v = [-v[0], -v[1], -v[2]];
            }
            vectors[slot] = v;
        }
        SymEigen { values, vectors }
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        self.eigen().values
    }
}

impl Add for SymTensor3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            xx: self.xx + o.xx,
            yy: self.yy + o.yy,
            zz: self.zz + o.zz,
            xy: self.xy + o.xy,
            xz: self.xz + o.xz,
            yz: self.yz + o.yz,
        }
    }
}

impl AddAssign for SymTensor3 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for SymTensor3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o * -1.0
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            xx: self.xx * s,
            yy: self.yy * s,
            zz: self.zz * s,
            xy: self.xy * s,
            xz: self.xz * s,
            yz: self.yz * s,
        }
    }
}

/// Exponents `(a, b, c)` of `x^a y^b z^c` for each stored component of a
/// totally symmetric fourth-order tensor.
pub const SYM4_LAYOUT: [[u8; 3]; 15] = [
    [4, 0, 0],
    [0, 4, 0],
    [0, 0, 4],
    [3, 1, 0],
    [3, 0, 1],
    [1, 3, 0],
    [0, 3, 1],
    [1, 0, 3],
    [0, 1, 3],
    [2, 2, 0],
    [2, 0, 2],
    [0, 2, 2],
    [2, 1, 1],
    [1, 2, 1],
    [1, 1, 2],
];

/// Totally symmetric fourth-order tensor, components ordered as [`SYM4_LAYOUT`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensor4(pub [f64; 15]);

impl SymTensor4 {
    /// `v ⊗ v ⊗ v ⊗ v`
    pub fn outer(v: Vec3) -> Self {
        let mut c = [0.0; 15];
        for (slot, e) in SYM4_LAYOUT.iter().enumerate() {
            c[slot] = v[0].powi(e[0] as i32) * v[1].powi(e[1] as i32) * v[2].powi(e[2] as i32);
        }
        Self(c)
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let mut e = [0u8; 3];
        for idx in [i, j, k, l] {
            e[idx] += 1;
        }
        let slot = SYM4_LAYOUT.iter().position(|x| *x == e).expect("complete layout");
        self.0[slot]
    }

    /// Contraction over the last index pair, `T_ijkk`.
    pub fn contract(&self) -> SymTensor3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.get(i, j, k, k)).sum();
            }
        }
        SymTensor3::from_matrix(m)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|c| c * s))
    }
}

impl Add for SymTensor4 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a += b;
        }
        Self(c)
    }
}
