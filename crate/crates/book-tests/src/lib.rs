//! Compiles and runs the Rust snippets of the guide in `book/` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/combinatorics.md")]
pub mod combinatorics {}
#[doc = include_str!("../../../book/src/cumulants.md")]
pub mod cumulants {}
#[doc = include_str!("../../../book/src/fpt-cumulants.md")]
pub mod fpt_cumulants {}
#[doc = include_str!("../../../book/src/laguerre.md")]
pub mod laguerre {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
