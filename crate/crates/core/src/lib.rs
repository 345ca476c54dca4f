//! Multi-angle maximum intensity projections of PET volumes with per-pixel
//! voxel provenance, occlusion correction of projected lesion annotations,
//! and 2D segmentation metrics.

pub mod error;
pub mod exec;
pub mod io;
pub mod metrics;
pub mod occlusion;
pub mod phantom;
pub mod projection;
pub mod volume;

pub use error::{Error, Result};
pub use exec::Execution;
pub use projection::{
    angular_plan, mirror, project_labels, project_mip, project_stack, AngularPlan, Interpolation,
    MipImage, MipKind, MipStack, ProvenanceMap,
};
pub use volume::{suv_normalize, validate, Dims, Spacing, SuvParams, Volume3D, VolumeKind};
