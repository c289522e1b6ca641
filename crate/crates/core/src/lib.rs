//! Hierarchical compression of kernel matrices.
//!
//! Builds HSS and H² representations of kernel matrices in linear time by
//! combining analytic farfield bases with interpolative decompositions,
//! then applies them (matrix-vector products, ULV solves) without ever
//! forming the dense matrix.

pub mod apply;
pub mod bench;
pub mod cluster;
pub mod error;
pub mod generators;
pub mod h2;
pub mod hss;
pub mod io;
pub mod kernel;
pub mod lowrank;

pub use apply::{matvec_dense, matvec_levelwise, matvec_nodewise, relative_error, ulv_factor, ulv_solve, UlvFactor};
pub use bench::{choose_params, error_bound, eps_rank, run_experiment, storage_report, BoundInputs, ParamChoice, StorageReport};
pub use cluster::{leaf_sets, BoundingBox, Branching, ClusterTree, LeafSets, PointSet, Role, SeparationParams, Structure};
pub use error::{Result, SmashError};
pub use generators::{Basis, Block, HierMatrix};
pub use h2::{build_h2, reconstruct_dense_h2, H2Matrix, H2Params};
pub use hss::{build_hss, diag_scale, diag_scale_hier, hss_add, reconstruct_dense_hss, HssMatrix, HssParams};
pub use io::StoredMatrix;
pub use kernel::{KernelMatrix, KernelSpec, SharedKernel};
pub use lowrank::{compr, srrqr, InterpolativeFactor};
