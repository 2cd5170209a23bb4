pub mod closed_region;
pub mod controller_stopper;
pub mod dual;
pub mod error;
pub mod free_boundary;
pub mod market;
pub mod monte_carlo;
pub mod roots;
pub mod value_surface;
pub mod verification;

pub use error::{Error, Result};
pub use market::{DerivedConstants, Market, MarketParams};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/market.md")]
    pub mod market {}
    #[doc = include_str!("../../../book/src/regimes.md")]
    pub mod regimes {}
    #[doc = include_str!("../../../book/src/free_boundary.md")]
    pub mod free_boundary {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
    #[doc = include_str!("../../../book/src/monte_carlo.md")]
    pub mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
