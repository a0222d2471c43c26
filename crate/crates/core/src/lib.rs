pub mod assignment;
pub mod cli;
pub mod evaluation;
pub mod geometry;
pub mod pipeline;
pub mod prediction;
pub mod scenario;
pub mod tracker;
pub mod util;
