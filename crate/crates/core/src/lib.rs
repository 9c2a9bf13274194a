pub mod analysis;
pub mod error;
pub mod hosting;
pub mod ingest;
pub mod model;
pub mod par;
pub mod scenario;
pub mod solver;
pub mod timegrid;
