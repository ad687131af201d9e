pub mod analysis;
pub mod bench;
pub mod config;
pub mod cpa;
pub mod domains;
pub mod frontend;
pub mod interp;
pub mod report;
pub mod solver;
