//! Base classifiers emitting per-class confidence vectors that sum to one:
//! a regularized quadratic discriminant (QDC), k-nearest-neighbor with
//! leave-one-out k selection, a Parzen density classifier with leave-one-out
//! bandwidth selection, and plain 1-NN.

mod neighbor;
mod qdc;

pub use neighbor::{
    neighbor_confidences, train_neighbor, NeighborMode, NeighborModel, SelectionGrid,
};
pub use qdc::{qdc_confidences, regularize_covariance, train_qdc, QdcModel};
