// mdbook cannot build listings against a dependency, so every chapter is
// pulled in as the docs of an empty module and `cargo test --doc` runs the
// code blocks. One module per chapter keeps failures traceable.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/series.md")]
pub mod series {}
#[doc = include_str!("src/reduction.md")]
pub mod reduction {}
#[doc = include_str!("src/kam.md")]
pub mod kam {}
#[doc = include_str!("src/degeneracy.md")]
pub mod degeneracy {}
#[doc = include_str!("src/conditions.md")]
pub mod conditions {}
#[doc = include_str!("src/verification.md")]
pub mod verification {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
