//! Curves, fragments and curve families.

mod curve;
mod family;
mod fragment;

pub use curve::{curve_length, line_integral, Density, DiscreteCurve};
pub use family::{
    boundary_sides, crossing_family, monotone_direction, monotone_steps, CrossingStrategy, CurveFamily,
    MonotoneDirection,
};
pub use fragment::{
    bilipschitz_constant, fragment_from_curve, fragment_from_samples, fragment_from_walk, heisenberg_curve_family,
    heisenberg_line, metric_derivative, split_into_fragments, Euclidean, Fragment, GraphMetric, HeisenbergLineKind,
    Koranyi, Metric, DEFAULT_MAX_LIPSCHITZ,
};
