//! File formats, rendering and the external codec protocol.

pub mod csv;
pub mod feature_file;
pub mod latent_file;
pub mod protocol;
pub mod render;

pub use feature_file::{decode_features, encode_features, read_features, write_features};
pub use latent_file::{decode_latents, encode_latents, read_latents, write_latents};
pub use protocol::{serve, ProcessCodec};
pub use render::{render_grid, RenderOptions};
