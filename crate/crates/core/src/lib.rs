// `!(x > y)` is the NaN-rejecting form throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cdlp;
pub mod choice;
pub mod generate;
pub mod lp;
pub mod model;
pub mod par;
pub mod policies;
pub mod sim;
pub mod valuefn;
pub mod verify;
