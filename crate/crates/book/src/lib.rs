//! Doctest harness for the guide in `book/`: every Rust listing in the
//! chapters below is compiled and run by `cargo test -p brw-book`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/groups.md")]
pub mod groups {}

#[doc = include_str!("../../../book/src/trees.md")]
pub mod trees {}

#[doc = include_str!("../../../book/src/walks.md")]
pub mod walks {}

#[doc = include_str!("../../../book/src/magic.md")]
pub mod magic {}

#[doc = include_str!("../../../book/src/transport.md")]
pub mod transport {}

#[doc = include_str!("../../../book/src/intersections.md")]
pub mod intersections {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/limitations.md")]
pub mod limitations {}
