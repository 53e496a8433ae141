//! Formal normal forms of quasi-homogeneous foliation germs.

pub mod invariant;
pub mod linalg;
pub mod logforms;
pub mod onevar;
pub mod periods;
pub mod prenormal;
pub mod quasihomog;
pub mod scalar;
pub mod series;
