pub mod acceptance;
pub mod brody;
pub mod cauchygreen;
pub mod cli;
pub mod diskgrid;
pub mod error;
pub mod kobayashi;
pub mod report;
pub mod solver;
pub mod structure;
