pub mod analysis;
pub mod engine;
pub mod envelope;
pub mod expr;
pub mod pipeline;
pub mod report;
pub mod repro;
pub mod specfile;
pub mod trajectory;
