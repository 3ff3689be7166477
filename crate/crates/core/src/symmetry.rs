//! The 48 symmetries of the cube acting on voxel grids and tensors.

use crate::tensor::{Mat3, SymTensor3};
use crate::voxelgrid::VoxelGrid;

/// Signed axis permutation: new axis `a` is `signs[a]` times old axis `perm[a]`.
///
/// On grids a negative sign mirrors the index range, `i -> n - 1 - i`, which
/// reflects voxel centers about the mid-plane of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CubeSymmetry {
    pub perm: [usize; 3],
    pub flip: [bool; 3],
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl CubeSymmetry {
    pub fn all() -> impl Iterator<Item = CubeSymmetry> {
        PERMS.into_iter().flat_map(|perm| {
            (0..8u8).map(move |bits| CubeSymmetry {
                perm,
                flip: [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0],
            })
        })
    }

    pub fn matrix(&self) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for a in 0..3 {
            r[a][self.perm[a]] = if self.flip[a] { -1.0 } else { 1.0 };
        }
        r
    }

    pub fn apply_tensor(&self, t: &SymTensor3) -> SymTensor3 {
        t.conjugate(&self.matrix())
    }

    pub fn apply_dims(&self, dims: [usize; 3]) -> [usize; 3] {
        [dims[self.perm[0]], dims[self.perm[1]], dims[self.perm[2]]]
    }

    pub fn apply_grid(&self, grid: &VoxelGrid) -> VoxelGrid {
        let old = grid.dims();
        let new = self.apply_dims(old);
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..new[2] {
            for j in 0..new[1] {
                for i in 0..new[0] {
                    let n = [i, j, k];
                    let mut o = [0usize; 3];
                    for a in 0..3 {
                        o[self.perm[a]] = if self.flip[a] { new[a] - 1 - n[a] } else { n[a] };
                    }
                    values.push(grid.get(o[0], o[1], o[2]));
                }
            }
        }
        VoxelGrid::from_parts_unchecked(new, grid.spacing(), values, grid.depth())
    }
}
