pub mod client;
pub mod codec;
pub mod dataset;
pub mod graph;
pub mod metrics;
pub mod pipeline;
pub mod prompt;
pub mod pyparse;
pub mod samples;
