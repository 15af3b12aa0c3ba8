//! Doc-test shims: every fenced code block in the guide compiles and runs
//! under `cargo test --doc`, keeping the book in sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/families.md")]
pub mod families {}

#[doc = include_str!("../../../book/src/fisher-information.md")]
pub mod fisher_information {}

#[doc = include_str!("../../../book/src/cramer-rao.md")]
pub mod cramer_rao {}

#[doc = include_str!("../../../book/src/divergences.md")]
pub mod divergences {}

#[doc = include_str!("../../../book/src/exponential-families.md")]
pub mod exponential_families {}

#[doc = include_str!("../../../book/src/rao-distance.md")]
pub mod rao_distance {}

#[doc = include_str!("../../../book/src/dual-geometry.md")]
pub mod dual_geometry {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
