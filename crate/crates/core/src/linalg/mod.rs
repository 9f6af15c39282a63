//! Dense linear algebra: matrices, SVD, Cholesky and the state projector.

mod chol;
mod mat;
mod projector;
mod svd;
pub mod text;

pub use chol::Cholesky;
pub use mat::{most_square_shape, Mat};
pub use projector::{build_projector, project_gradient, select_rank, ProjectionMode, StateProjector};
pub use svd::{psd_eigen, svd, SvdFactors};
