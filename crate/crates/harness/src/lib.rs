//! Problem definitions, reference solutions, convergence ladders, error
//! fields and the property suite behind the `corrsplit` command.

pub mod convergence;
pub mod errorfield;
pub mod problems;
pub mod reference;
pub mod verify;
