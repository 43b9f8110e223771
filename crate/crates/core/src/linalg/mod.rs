//! Dense and matrix-free linear algebra.

pub mod dense;
mod mat;
mod operator;
mod truncated;

pub use mat::{dot, norm2, Mat};
pub use operator::{build_pgram_operator, LinearMap, PgramOperator, Shifted};
pub(crate) use truncated::project_unchecked;
pub use truncated::{
    apply_projection, check_orthonormal, check_symmetric, soft_threshold_factors, soft_threshold_svd,
    symmetric_eig_topk, symmetric_eig_topk_with_info, truncated_svd, truncated_svd_with_info, IterInfo,
    SubspaceOptions, TopEig, TruncatedSvd, DENSE_CUTOFF,
};
