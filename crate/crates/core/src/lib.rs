pub mod estimator;
pub mod expr;
pub mod models;
pub mod observability;
pub mod simulator;
