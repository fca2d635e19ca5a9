//! Doc-test shim for the guide in `book/`.
//!
//! Each chapter is included as module documentation, so
//! `cargo test --doc` compiles and runs every code block in the book
//! against the current library. The modules themselves are empty.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/nets.md")]
pub mod nets {}

#[doc = include_str!("../../../book/src/harmonic.md")]
pub mod harmonic {}

#[doc = include_str!("../../../book/src/tension.md")]
pub mod tension {}

#[doc = include_str!("../../../book/src/stress.md")]
pub mod stress {}

#[doc = include_str!("../../../book/src/moves.md")]
pub mod moves {}

#[doc = include_str!("../../../book/src/deformation.md")]
pub mod deformation {}

#[doc = include_str!("../../../book/src/weights.md")]
pub mod weights {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
