//! Minkowski tensors, quadratic normal tensors and fiber orientation
//! tensors estimated from 3D gray-value voxel images.

pub mod analytic;
pub mod error;
pub mod fiberorient;
pub mod filters;
pub mod gradient;
pub mod io;
pub mod minkowski;
pub mod reduce;
pub mod study;
pub mod symmetry;
pub mod tensor;
pub mod vec3;
pub mod voxelgrid;

mod fft;

pub use analytic::{FiberSpec, FiberSystemTensors};
pub use error::{Error, Result};
pub use fiberorient::{structure_tensor_orientation, OrientationResult};
pub use filters::{fft_convolve, Kernel};
pub use gradient::{gradient, unit_normals, Scheme, VectorField};
pub use minkowski::{analyze, MinkowskiSummary};
pub use symmetry::CubeSymmetry;
pub use tensor::{SymTensor3, SymTensor4};
pub use voxelgrid::{voxelize, Depth, ShapeSpec, VoxelGrid};
