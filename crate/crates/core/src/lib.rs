pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fem;
pub mod gamma;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod vec3;

pub use error::{Error, Result};
pub use fem::{
    assemble_curl_form, assemble_lumped_mass, assemble_stiffness, interpolate_at, FemOperators, LumpedMass,
    NodalVectorField, SparseOperator,
};
pub use mesh::{
    generate_disk, generate_square, mesh_stats, parse_msh2, parse_native, write_native, MeshStats, TriMesh,
};
pub use model::{
    derive_params, pi_thinfilm, AppliedField, EnergyBreakdown, EnergyModel, LocalOperator, MaterialParams,
    ThinFilmAnisotropy, UniaxialAnisotropy,
};
