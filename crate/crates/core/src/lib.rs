// `!(a < b)` sends NaN to the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod billiards;
pub mod crofton;
pub mod ellipsoid;
pub mod geodesic;
pub mod level_set;
pub mod polynomial;
pub mod roots;
pub mod sweepout;
pub mod widths;
