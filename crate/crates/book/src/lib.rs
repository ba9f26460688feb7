//! The guide under `book/` as doctests: one module per chapter, so a failing
//! listing names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/panel.md")]
pub mod panel {}
#[doc = include_str!("../../../book/src/production-functions.md")]
pub mod production_functions {}
#[doc = include_str!("../../../book/src/markups.md")]
pub mod markups {}
#[doc = include_str!("../../../book/src/staggered-did.md")]
pub mod staggered_did {}
#[doc = include_str!("../../../book/src/matching.md")]
pub mod matching {}
#[doc = include_str!("../../../book/src/deal-types.md")]
pub mod deal_types {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
