pub mod cli;
pub mod dual;
pub mod error;
pub mod factorization;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod projectors;
pub mod quadratic_sets;
pub mod saddle;
pub mod sdp;
