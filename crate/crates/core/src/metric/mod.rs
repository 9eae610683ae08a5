//! Finite metric measure spaces and distances between point sets.
//!
//! A space is a [`MetricGraph`]: the metric is the shortest-path distance
//! under edge lengths and the measure lives on edges, so that line integrals
//! along paths are exact sums. Subsets of Euclidean space are handled as
//! [`PointCloud`]s, compared with the pointed Hausdorff discrepancy `d_R`
//! and, together with sampled maps, with the truncated distance `D`.

mod cloud;
mod graph;

pub use cloud::{
    dee_distance, pointed_hausdorff_distance, HausdorffProfile, MappedCloud, NearestIndex,
    PointCloud, DEE_EPS_MIN,
};
pub(crate) use cloud::{dist, norm};
pub use graph::{Edge, MetricGraph, ShortestPathTree};
