//! Alberti representations: weighted fragments whose arc-length measures
//! average to a given measure, with cone conditions on their directions.

mod builders;
mod cone;
mod representation;

pub use builders::{
    curves_to_alberti, fubini_partition, fubini_representation, heisenberg_box_partition, heisenberg_jacobian,
    heisenberg_parameter_grid, heisenberg_representation, unit_time_grid, Orientation, AXIS_CONE_COS,
    HEISENBERG_BOX, HEISENBERG_B_RANGE,
};
pub use cone::{cone_contains, cones_independent, Cone, IndependenceCheck};
pub use representation::{
    fragment_direction, mass_bound, representation_direction, represented_measure, validate_representation,
    AlbertiRepresentation, BoxCell, DirectionCheck, DirectionSpec, Partition, RepresentationReport,
    WeightedFragment,
};
