#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod figures;
pub mod table;
