pub mod bubble_energy;
pub mod cli;
pub mod critical;
pub mod defaults;
pub mod domain;
pub mod error;
pub mod field_solver;
pub mod kernels;
pub mod quadrature;
pub mod robin;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/domains.md")]
    mod domains {}
    #[doc = include_str!("../../../book/src/robin-function.md")]
    mod robin_function {}
    #[doc = include_str!("../../../book/src/critical-parameter.md")]
    mod critical_parameter {}
    #[doc = include_str!("../../../book/src/bubble-energy.md")]
    mod bubble_energy {}
}
