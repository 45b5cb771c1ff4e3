//! Dual-cycle conditional GAN training for mask segmentation.
//!
//! A U-Net generator is trained in two alternating cycles every iteration:
//! an image cycle (L1 plus adversarial loss on `(image, mask)` pairs) and a
//! noise cycle in which low-resolution uniform noise is routed through a
//! narrow noise bottleneck, with the encoder cut out of the gradient, so the
//! decoder learns the distribution of target masks on its own.
//!
//! The crate also carries the surrounding experiment kit: a synthetic
//! ellipse dataset, noise-injection ablations, Dice/Jaccard evaluation and a
//! VAE probe of how compressible a mask distribution is.

pub mod data;
pub mod error;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod scenarios;
pub mod seed;
pub mod train;
pub mod vae;

pub use error::{Error, Result};
pub use grid::ImageGrid;

// Compiles and runs every snippet of the guide in book/.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/vae.md")]
    mod vae {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
