pub mod expr;
pub mod index_algebra;
pub mod spaces;
pub mod atlas;
pub mod connective;
pub mod connection;
pub mod multiplicity;
pub mod cli;
