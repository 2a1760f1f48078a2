//! Ellipsoid-method solver for second-order cone programs, with offline
//! certification of iteration counts, condition-number bounds and
//! floating-point widening for parameterized receding-horizon problems.

pub mod linalg;
pub mod socp;
pub mod ellipsoid;
pub mod certify;
pub mod mpc;
