//! Latent-space tooling for generative models: interpolation, analogies,
//! neighbourhood grids, attribute vectors and attribute classifiers, with a
//! linear toy codec and file formats for exchanging latents.

pub mod analogy;
pub mod atdot;
pub mod attributes;
pub mod cli;
pub mod codec;
pub mod error;
pub mod grid;
pub mod io;
pub mod latent;
pub mod mine;
pub mod toy;

pub use codec::{Codec, FeatureSet, Image, ImageShape};
pub use error::{Error, Result};
pub use grid::{CellRole, GridCell, GridManifest};
pub use latent::{Label, LatentDataset, LatentVector, Prior};
