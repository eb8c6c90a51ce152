//! Operator-algebra verification engine for Galilean quantum mechanics on
//! periodic spectral grids.

pub mod dynamics;
pub mod error;
pub mod field;
pub mod fit;
pub mod galilei;
pub mod grid;
pub mod harness;
pub mod operators;
pub mod propagate;
pub mod sigma;
pub mod snapshot;
mod spectral;

pub use error::{GqkError, Result};
pub use field::{CMatrix, FieldSpec, FieldTerm, LatticeField, Profile, SpinCoefficient};
pub use grid::{
    gaussian_packet, inner_product, make_grid, ray_distance, standard_states, to_momentum,
    to_position, GridSpec, RayProjector, Representation, SpinSpec, State, StateSampler,
};
pub use operators::{
    angular_momentum_op, boost_generator, commutator_apply, commutator_residual, expectation,
    momentum_op, position_op, Expected, Generators, OperatorHandle, SpinMatrices,
};
