//! Fiber-orientation tensor from the structure tensor of a gray-value image.
//!
//! Pipeline: optional first blur, gradient, local `g ⊗ g`, a second blur of
//! its six components, then per voxel the eigenvector `v₁` of the smallest
//! eigenvalue (the direction along which the image varies least). The
//! orientation tensor is the trace-normalized sum of `v₁ ⊗ v₁`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{fft_convolve, Convolver, Kernel};
use crate::gradient::{gradient, Scheme};
use crate::reduce;
use crate::tensor::SymTensor3;
use crate::voxelgrid::VoxelGrid;

/// Default relative threshold on `tr I_μ(x)`; 0 sums over every voxel.
pub const DEFAULT_MASK_REL: f64 = 1e-3;

/// Relative gap under which neighboring eigenvalues count as equal.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationMetadata {
    pub first: Kernel,
    pub second: Kernel,
    pub scheme: Scheme,
    pub mask_rel: f64,
    /// Number of voxels that passed the mask.
    pub masked_voxels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationResult {
    /// Estimated second-order orientation tensor, trace 1.
    pub a: SymTensor3,
    pub metadata: OrientationMetadata,
}

/// The contribution of one voxel: `v₁ ⊗ v₁`, or the projector onto the
/// eigenspace of the smallest eigenvalue divided by its dimension when that
/// eigenvalue is repeated.
fn smallest_direction(t: &SymTensor3) -> SymTensor3 {
    let e = t.eigen();
    let [l3, l2, l1] = e.values;
    let tol = TIE_TOLERANCE * l3.abs().max(l1.abs());
    if l2 - l1 <= tol {
        if l3 - l1 <= tol {
            return SymTensor3::identity() * (1.0 / 3.0);
        }
        return (SymTensor3::identity() - SymTensor3::outer(e.vectors[0])) * 0.5;
    }
    SymTensor3::outer(e.vectors[2])
}

pub fn structure_tensor_orientation(
    image: &VoxelGrid,
    first: &Kernel,
    second: &Kernel,
    scheme: Scheme,
    mask_rel: f64,
) -> Result<OrientationResult> {
    if matches!(second, Kernel::None) {
        return Err(Error::MissingSecondFilter);
    }
    if !(0.0..=1.0).contains(&mask_rel) {
        return Err(Error::InvalidParameter(format!("mask threshold must lie in [0, 1], got {mask_rel}")));
    }
    let filtered = fft_convolve(image, first)?;
    let field = gradient(&filtered, scheme);
    let conv = Convolver::for_kernel(second, image.dims(), image.spacing())?;
    let g = field.vectors();
    let blurred: Vec<Vec<f64>> = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(a, b)| {
            let comp: Vec<f64> = g.iter().map(|v| v[a] * v[b]).collect();
            conv.apply(&comp)
        })
        .collect();
    let tensor_at = |i: usize| {
        SymTensor3::from_components([
            blurred[0][i],
            blurred[1][i],
            blurred[2][i],
            blurred[3][i],
            blurred[4][i],
            blurred[5][i],
        ])
    };

    let len = image.len();
    let traces: Vec<f64> = (0..len).map(|i| blurred[0][i] + blurred[1][i] + blurred[2][i]).collect();
    let max_trace = reduce::max(&traces, |&t| t);
    if !(max_trace > 0.0) {
        return Err(Error::EmptyMask);
    }
    // With no mask, FFT round-off slightly below zero must not exclude voxels.
    let threshold = if mask_rel == 0.0 { f64::NEG_INFINITY } else { mask_rel * max_trace };
    let [count, sum @ ..] = reduce::sum_indexed::<7>(len, |i| {
        if traces[i] < threshold {
            return [0.0; 7];
        }
        let c = smallest_direction(&tensor_at(i)).components();
        [1.0, c[0], c[1], c[2], c[3], c[4], c[5]]
    });
    if count == 0.0 {
        return Err(Error::EmptyMask);
    }
    let total = SymTensor3::from_components(sum);
    Ok(OrientationResult {
        a: total * (1.0 / total.trace()),
        metadata: OrientationMetadata {
            first: *first,
            second: *second,
            scheme,
            mask_rel,
            masked_voxels: count as usize,
        },
    })
}

/// Relative Frobenius error `|A − A_est| / |A|`.
pub fn orientation_error(estimate: &SymTensor3, reference: &SymTensor3) -> Result<f64> {
    crate::minkowski::tensor_error(estimate, reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::CubeSymmetry;
    use crate::voxelgrid::{voxelize, ShapeSpec};

    const FIRST: Kernel = Kernel::Ball { sigma: 1.2 };
    const SECOND: Kernel = Kernel::Gaussian { sigma: 2.0 };

    #[test]
    fn orientation_error_examples() {
        let r = SymTensor3::diag(0.49, 0.49, 0.02);
        assert_eq!(orientation_error(&r, &r).unwrap(), 0.0);
        let e = orientation_error(&SymTensor3::diag(0.5, 0.5, 0.0), &r).unwrap();
        let hand = (0.0006f64).sqrt() / (0.49f64 * 0.49 * 2.0 + 0.0004).sqrt();
        assert!((e - hand).abs() < 1e-15);
        assert!((e - 0.0353).abs() < 1e-4);
        let e = orientation_error(&(SymTensor3::identity() * (1.0 / 3.0)), &SymTensor3::diag(1.0, 0.0, 0.0)).unwrap();
        assert!((e - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(orientation_error(&r, &SymTensor3::ZERO).is_err());
    }

    #[test]
    fn tie_rule() {
        assert_eq!(smallest_direction(&SymTensor3::ZERO), SymTensor3::identity() * (1.0 / 3.0));
        let t = smallest_direction(&SymTensor3::diag(0.0, 0.0, 2.0));
        assert!((t - SymTensor3::diag(0.5, 0.5, 0.0)).frobenius_norm() < 1e-15);
        let t = smallest_direction(&SymTensor3::diag(3.0, 1.0, 2.0));
        assert!((t - SymTensor3::diag(0.0, 1.0, 0.0)).frobenius_norm() < 1e-15);
    }

    fn laminate() -> VoxelGrid {
        let slabs = ShapeSpec::Laminate { normal_axis: 2, slabs: vec![(2.0, 6.0), (10.0, 13.0)] };
        voxelize(&slabs, [14, 13, 16], 1.0, 1).unwrap()
    }

    #[test]
    fn laminate_directions_are_transverse_to_the_normal() {
        let r = structure_tensor_orientation(&laminate(), &Kernel::None, &SECOND, Scheme::Central, DEFAULT_MASK_REL)
            .unwrap();
        assert!(r.a.zz.abs() < 1e-12);
        assert!((r.a.trace() - 1.0).abs() < 1e-12);
        // Each voxel's tie in the slab plane spreads evenly over x and y.
        assert!((r.a.xx - 0.5).abs() < 1e-12 && (r.a.yy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let g = laminate();
        assert!(matches!(
            structure_tensor_orientation(&g, &FIRST, &Kernel::None, Scheme::Central, DEFAULT_MASK_REL),
            Err(Error::MissingSecondFilter)
        ));
        let empty = VoxelGrid::zeros([16; 3], 1.0).unwrap();
        assert!(matches!(
            structure_tensor_orientation(&empty, &FIRST, &SECOND, Scheme::Central, DEFAULT_MASK_REL),
            Err(Error::EmptyMask)
        ));
        assert!(structure_tensor_orientation(&g, &FIRST, &SECOND, Scheme::Central, 1.5).is_err());
    }

    fn three_fibers() -> VoxelGrid {
        let shape = ShapeSpec::Union(vec![
            ShapeSpec::cylinder([12.0, 4.5, 4.5], [1.0, 0.0, 0.0], 16.0, 3.0),
            ShapeSpec::cylinder([19.5, 12.0, 19.5], [0.0, 1.0, 0.0], 16.0, 3.0),
            ShapeSpec::cylinder([4.5, 19.5, 12.0], [0.0, 0.0, 1.0], 16.0, 3.0),
        ]);
        voxelize(&shape, [24; 3], 1.0, 2).unwrap()
    }

    #[test]
    fn axis_balanced_fibers_give_isotropic_tensor() {
        let r = structure_tensor_orientation(&three_fibers(), &FIRST, &SECOND, Scheme::Central, DEFAULT_MASK_REL)
            .unwrap();
        let iso = SymTensor3::identity() * (1.0 / 3.0);
        assert!(orientation_error(&r.a, &iso).unwrap() < 0.05, "{:?}", r.a);
    }

    #[test]
    fn shift_scale_and_symmetry_invariance() {
        let g = three_fibers();
        let base = structure_tensor_orientation(&g, &FIRST, &SECOND, Scheme::Central, DEFAULT_MASK_REL).unwrap();
        let shifted = structure_tensor_orientation(&g.shift([3, -5, 7]), &FIRST, &SECOND, Scheme::Central, DEFAULT_MASK_REL)
            .unwrap();
        assert!((shifted.a - base.a).frobenius_norm() < 1e-10);
        let scaled = g.clone().into_continuous().scale_values(0.37).unwrap();
        let scaled = structure_tensor_orientation(&scaled, &FIRST, &SECOND, Scheme::Central, DEFAULT_MASK_REL).unwrap();
        assert!((scaled.a - base.a).frobenius_norm() < 1e-10);
        for s in CubeSymmetry::all().step_by(5) {
            let r = structure_tensor_orientation(&s.apply_grid(&g), &FIRST, &SECOND, Scheme::Central, DEFAULT_MASK_REL)
                .unwrap();
            assert!((r.a - s.apply_tensor(&base.a)).frobenius_norm() < 1e-8);
        }
    }

    #[test]
    fn literal_unmasked_mode_runs() {
        let r = structure_tensor_orientation(&three_fibers(), &FIRST, &SECOND, Scheme::Central, 0.0).unwrap();
        assert_eq!(r.metadata.masked_voxels, 24 * 24 * 24);
        assert!((r.a.trace() - 1.0).abs() < 1e-12);
    }
}
