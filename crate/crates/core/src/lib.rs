pub mod assembly;
pub mod config;
pub mod excitation;
pub mod gll;
pub mod material;
pub mod mesh;
pub mod numfmt;
pub mod solver;
pub mod validation;
