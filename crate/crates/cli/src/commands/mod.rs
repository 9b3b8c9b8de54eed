pub mod check;
pub mod graph;
pub mod infer;
pub mod oracle;
pub mod stats;
