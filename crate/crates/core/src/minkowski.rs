//! Voxel estimators for volume, surface area, the Minkowski tensor `W_1^{0,2}`
//! and the quadratic normal tensor (QNT), together with the anisotropy ratio
//! and relative tensor errors.
//!
//! The surface estimators integrate the gradient `g` of the filtered image:
//!
//! ```text
//! V ≈ Σ χ_h(x) h³
//! S ≈ Σ |g(x)| h³
//! W ≈ (1/3) Σ g(x) ⊗ g(x) h³ / (|g(x)| + ε)
//! QNT = W / tr(W)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{fft_convolve, Kernel};
use crate::gradient::{gradient, Scheme, VectorField};
use crate::reduce;
use crate::vec3;
use crate::voxelgrid::{Depth, VoxelGrid};

pub use crate::tensor::SymTensor3;

pub const DEFAULT_EPS_REL: f64 = 1e-12;

/// Relative trace below which a tensor counts as empty.
const TRACE_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisMetadata {
    pub kernel: Kernel,
    pub scheme: Scheme,
    pub eps_rel: f64,
    pub depth: Depth,
    pub spacing: f64,
    pub dims: [usize; 3],
}

/// Everything Algorithm-1 style analysis produces for one image.
///
/// `qnt` and `beta` are `None` when the image has no interface (all solid
/// or all void); `degenerate` flags that case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiSummary {
    pub volume: f64,
    pub surface: f64,
    pub w: SymTensor3,
    pub qnt: Option<SymTensor3>,
    pub beta: Option<f64>,
    pub degenerate: bool,
    pub metadata: AnalysisMetadata,
}

pub fn estimate_volume(image: &VoxelGrid) -> f64 {
    reduce::sum(image.values(), |&v| v) * image.voxel_volume()
}

pub fn estimate_surface(field: &VectorField) -> f64 {
    reduce::sum(field.vectors(), |&g| vec3::norm(g)) * field.spacing().powi(3)
}

/// `ε = eps_rel · max |g|`; voxels with `g = 0` are skipped.
pub fn estimate_w(field: &VectorField, eps_rel: f64) -> Result<SymTensor3> {
    if !(eps_rel > 0.0 && eps_rel.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps_rel must be positive, got {eps_rel}")));
    }
    let data = field.vectors();
    let max_norm = reduce::max(data, |&g| vec3::norm(g));
    if max_norm == 0.0 {
        return Ok(SymTensor3::ZERO);
    }
    let eps = eps_rel * max_norm;
    let sums = reduce::sum_indexed(data.len(), |i| {
        let g = data[i];
        let n = vec3::norm(g);
        if n == 0.0 {
            return [0.0; 6];
        }
        SymTensor3::outer(g).components().map(|c| c / (n + eps))
    });
    Ok(SymTensor3::from_components(sums) * (field.spacing().powi(3) / 3.0))
}

/// Normalizes `w` to unit trace.
pub fn qnt(w: &SymTensor3) -> Result<SymTensor3> {
    let trace = w.trace();
    let scale = w.max_abs_component();
    if !(trace > TRACE_FLOOR * scale) || trace <= 0.0 {
        return Err(Error::EmptyInterface { trace });
    }
    let mut q = *w * (1.0 / trace);
    // Put the residual of the division on the diagonal so the trace is 1.
    let residual = (1.0 - q.trace()) / 3.0;
    q.xx += residual;
    q.yy += residual;
    q.zz += residual;
    Ok(q)
}

/// `min |λ| / max |λ|` over the eigenvalues of `t`.
pub fn eigenvalue_ratio(t: &SymTensor3) -> Result<f64> {
    let abs = t.eigenvalues().map(f64::abs);
    let max = abs.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((min / max).clamp(0.0, 1.0))
}

/// Relative Frobenius error `|reference - estimate| / |reference|`.
pub fn tensor_error(estimate: &SymTensor3, reference: &SymTensor3) -> Result<f64> {
    let denom = reference.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((*reference - *estimate).frobenius_norm() / denom)
}

/// Filter, differentiate, then integrate. The volume is taken from the
/// unfiltered image.
pub fn analyze(image: &VoxelGrid, kernel: &Kernel, scheme: Scheme, eps_rel: f64) -> Result<MinkowskiSummary> {
    let filtered = fft_convolve(image, kernel)?;
    let field = gradient(&filtered, scheme);
    let volume = estimate_volume(image);
    let surface = estimate_surface(&field);
    let w = estimate_w(&field, eps_rel)?;
    let (qnt, beta) = match qnt(&w) {
        Ok(q) => (Some(q), Some(eigenvalue_ratio(&q)?)),
        Err(Error::EmptyInterface { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(MinkowskiSummary {
        volume,
        surface,
        w,
        degenerate: qnt.is_none(),
        qnt,
        beta,
        metadata: AnalysisMetadata {
            kernel: *kernel,
            scheme,
            eps_rel,
            depth: image.depth(),
            spacing: image.spacing(),
            dims: image.dims(),
        },
    })
}
