#![no_std]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
// `num_traits::Float` imports are marked `allow(unused_imports)`: whenever std
// is linked (tests, examples) its inherent float methods shadow the trait.
extern crate alloc;

pub mod config;
pub mod exterior;
pub mod field;
pub mod fowler;
pub mod gluing;
pub mod interior;
pub mod linop;
pub mod model;
pub mod norms;
pub mod num;
pub mod report;
pub mod spectral;
pub mod verify;
