//! Generators for the example spaces: unit-square grids, Sierpinski carpet
//! prefractals, slit-carpet prefractals and the Heisenberg group with its
//! Koranyi geometry.

mod grids;
pub mod heisenberg;

pub use grids::{
    carpet_cell_count, grid_square, sierpinski_carpet, slit_carpet_level, slits_up_to, Generator,
    Slit, SlitSpec,
};
pub use heisenberg::{
    h_dilate, h_dist, h_inv, h_mul, heisenberg_lattice, koranyi_norm, HeisenbergLattice,
    HeisenbergPoint,
};
