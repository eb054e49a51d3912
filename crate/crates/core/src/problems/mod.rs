//! Loss families: trimmed least squares, trimmed soft-max classification,
//! trimmed PCA and robust homography fitting.

mod homography;
mod ls;
mod pca;
mod softmax;

pub use homography::{
    algebraic_loss_and_grad, dlt_homography, dlt_homography_normalized, homography_loss_and_grad, fit_homography, homography_error, refine_homography,
    trimmed_algebraic_residual, Correspondence, HomographyFit, Residual, TrimmedHomography,
};
pub use ls::TrimmedLS;
pub use pca::{pca_loss_and_grad, top_left_singular_vectors, PcaEval, TrimmedPCA};
pub use softmax::{grad_softmax_example, lse, softmax, softmax_accuracy, TrimmedSoftmax};
