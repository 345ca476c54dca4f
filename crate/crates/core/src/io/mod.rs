//! File formats: NIfTI-1 volumes, MIPS stack containers, PGM previews,
//! CSV/JSON reports and the phantom spec text format.

pub mod container;
pub mod nifti;
pub mod pgm;
pub mod phantom_spec;
pub mod report;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use container::{read_container, read_provenance, read_stack, write_provenance, write_stack, MipContainer, ProvenanceStack};
pub use nifti::{read_nifti, read_nifti_with, write_nifti, AxisMap, NiftiHeader};
pub use pgm::export_pgm;
pub use phantom_spec::{format_phantom_spec, parse_phantom_spec, read_phantom_spec};
pub use report::{format_sig6, write_table, Cell, ReportFormat, Table};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
