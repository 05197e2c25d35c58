//! Numerical building blocks shared by the estimation modules.

pub mod dual;
pub mod optim;
pub mod quad;
pub mod special;
