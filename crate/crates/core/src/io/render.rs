//! Grid montage rendering to grayscale PNG.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::codec::Codec;
use crate::error::{Error, Result};
use crate::grid::GridManifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenderOptions {
    /// Draw a 1-pixel line between tiles.
    pub separator: bool,
    pub separator_value: u8,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            separator: true,
            separator_value: 128,
        }
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Decodes every lattice cell and tiles the results row-major into an 8-bit
/// grayscale raster. Multi-channel images are averaged across channels.
/// Returns `(width, height, pixels)`.
pub fn render_pixels(
    manifest: &GridManifest,
    codec: &dyn Codec,
    options: RenderOptions,
) -> Result<(u32, u32, Vec<u8>)> {
    let dim = codec.latent_dim();
    if let Some(cell) = manifest.cells.iter().find(|c| c.latent.dim() != dim) {
        return Err(Error::CodecProtocol(format!(
            "cell ({}, {}) has dim {} but codec `{}` expects {dim}",
            cell.row,
            cell.col,
            cell.latent.dim(),
            codec.name()
        )));
    }
    if manifest.cells.len() != manifest.rows * manifest.cols {
        return Err(Error::HeaderMismatch(
            "manifest cell count does not match rows x cols".into(),
        ));
    }
    let latents: Vec<_> = manifest.cells.iter().map(|c| c.latent.clone()).collect();
    let images = codec.decode(&latents)?;
    if images.len() != latents.len() {
        return Err(Error::CodecProtocol(format!(
            "decode returned {} images for {} latents",
            images.len(),
            latents.len()
        )));
    }
    let shape = codec.image_shape();
    if images.iter().any(|im| im.shape() != shape) {
        return Err(Error::CodecProtocol(
            "decoded image shape differs from codec shape".into(),
        ));
    }
    let gap = usize::from(options.separator);
    let width = manifest.cols * shape.width + (manifest.cols - 1) * gap;
    let height = manifest.rows * shape.height + (manifest.rows - 1) * gap;
    let fill = if options.separator {
        options.separator_value
    } else {
        0
    };
    let mut pixels = vec![fill; width * height];
    for (cell, image) in manifest.cells.iter().zip(&images) {
        let (oy, ox) = (
            cell.row * (shape.height + gap),
            cell.col * (shape.width + gap),
        );
        for y in 0..shape.height {
            for x in 0..shape.width {
                let sum: f64 = (0..shape.channels).map(|c| image.get(y, x, c)).sum();
                pixels[(oy + y) * width + ox + x] = to_u8(sum / shape.channels as f64);
            }
        }
    }
    let w = u32::try_from(width).map_err(|_| Error::ParameterOutOfRange {
        name: "width",
        value: width as f64,
    })?;
    let h = u32::try_from(height).map_err(|_| Error::ParameterOutOfRange {
        name: "height",
        value: height as f64,
    })?;
    Ok((w, h, pixels))
}

/// Encodes an 8-bit grayscale raster as PNG bytes.
pub fn encode_png(width: u32, height: u32, pixels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(pixels)?;
        writer.finish()?;
    }
    Ok(out)
}

/// Renders `manifest` through `codec` into a PNG at `path`. Nothing is
/// written if any cell fails validation or decoding.
pub fn render_grid(
    manifest: &GridManifest,
    codec: &dyn Codec,
    path: impl AsRef<Path>,
    options: RenderOptions,
) -> Result<()> {
    let (w, h, pixels) = render_pixels(manifest, codec, options)?;
    let bytes = encode_png(w, h, &pixels)?;
    let file = fs::File::create(path)?;
    let mut file = BufWriter::new(file);
    std::io::Write::write_all(&mut file, &bytes)?;
    std::io::Write::flush(&mut file)?;
    Ok(())
}
