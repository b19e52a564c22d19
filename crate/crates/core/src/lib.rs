pub mod geometry;
pub mod glm;
pub mod ingest;
pub mod network;
pub mod pipeline;
pub mod visibility;
