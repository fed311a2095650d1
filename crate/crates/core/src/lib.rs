pub mod applications;
pub mod catalog;
pub mod combinatorics;
pub mod kernels;
pub mod numerics;
pub mod sampling;
pub mod spaces;
pub mod stein;
pub mod systems;
