pub mod cli;
pub mod cracking;
pub mod element;
pub mod fixtures;
pub mod linalg;
pub mod material;
pub mod mesh;
pub mod solver;
