//! Softening of polyhedral space tilings by edge bending.
//!
//! The crate is organised bottom-up:
//!
//! - [`tiling`]: finite tiling patches, vertex figures and their spherical
//!   subdivisions (vertex polyhedra).
//! - [`graphcolor`]: combinatorial maps on the sphere, triangulation, two-colorings
//!   without monochromatic faces, Hamiltonicity and the named graph fixtures.
//! - [`bend`]: the bending profile, axis selection, the translation field and the
//!   per-node deformation map with its inverse.
//! - [`verify`]: numerical certificates for the softness conditions.
//! - [`planar`]: spike/smooth accounting on planar tiling patches.

// `!(a < b)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bend;
pub mod graphcolor;
pub mod planar;
pub mod tiling;
pub mod verify;

mod geom;

pub use bend::{
    bend_map, bend_map_inverse, choose_axis, compute_kappa, phi_eval, soften_node, soften_patch,
    tau, AxisFrame, BendError, BendMode, BendParams, Interp, NodeBend, SoftenedPatch,
};
pub use graphcolor::{
    fixture_graph, hamiltonian_cycle_exists, triangulate, two_color, validate_coloring,
    ColoringReport, GraphError, PolyhedralGraph, TwoColoring,
};
pub use tiling::{
    check_normality, generate_cube_patch, spherical_subdivision, vertex_figure, EdgeCurve,
    FacePatch, TilingError, TilingPatch, VertexFigure,
};
pub use verify::{crease_ratio, verify_node, verify_phi_lemma, VerificationReport, VerifyOptions};

/// Version tag written into every serialized artifact.
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn format_version() -> u32 {
    FORMAT_VERSION
}
