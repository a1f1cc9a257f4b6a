pub mod curvature;
pub mod cutoff;
pub mod merge;
pub mod positivity;
pub mod profile;
