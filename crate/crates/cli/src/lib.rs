//! Front end for `folgal-core`: problem files, the command pipeline and
//! report rendering.

pub mod pipeline;
pub mod problem;
pub mod report;
