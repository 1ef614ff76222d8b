pub mod rng;
pub mod schelling;
pub mod space;
pub mod doe;
pub mod dataset;
pub mod stats;
pub mod surrogates;
pub mod explain;
pub mod pipeline;
