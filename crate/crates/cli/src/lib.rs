//! Mesh sampling and OBJ export for softened cube patches.
//!
//! The binary in `main.rs` wires these together with the core pipeline stages.

pub mod mesh;
pub mod obj;

pub use mesh::{sample_meshes, BendSummary, CellMesh, MeshError};
pub use obj::{export_obj, format_sig9, Manifest, ObjError};
