//! Forecasting harness for narrative-augmented macroeconomic prediction.

pub mod cli;
pub mod direction;
pub mod embed;
pub mod harness;
pub mod ingest;
pub mod models;
pub mod narrative;
pub mod retry;
pub mod sentiment;
pub mod synthgen;
pub mod text;

pub use direction::Direction;
