//! Dense linear algebra, seeded randomness and finite differences.

mod finite_diff;
mod matrix;
mod rng;

pub use finite_diff::{finite_diff_grad, relative_error};
pub use matrix::{dot, norm, squared_distance, Matrix};
pub use rng::SeededRng;
