//! k-nearest-neighbor (KSG) estimators of mutual and conditional mutual information.

mod kdtree;
mod ksg;

pub use kdtree::{chebyshev, KdTree};
pub use ksg::{
    ground_truth_nonlinear, ksg_cmi, ksg_mi, neighbor_stats, KsgConfig, KsgEstimate, NeighborStat,
    JITTER_AMPLITUDE,
};
