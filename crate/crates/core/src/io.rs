//! Image decoding and atomic file output.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{Error, Result};
use crate::grid::{Grid, MultiChannelImage, ScalarField};

fn image_error(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Decodes PNG/PGM/PPM into `[0, 1]` intensities. Alpha is dropped; gray
/// images give one channel, color images three.
pub fn read_image(path: &Path) -> Result<MultiChannelImage> {
    let img = image::open(path).map_err(|e| image_error(path, e))?;
    from_dynamic(&img)
}

pub fn from_dynamic(img: &DynamicImage) -> Result<MultiChannelImage> {
    let grid = Grid::new(img.height() as usize, img.width() as usize)?;
    let color = img.color();
    let gray = color.channel_count() <= 2;
    let sixteen = color.bytes_per_pixel() / color.channel_count() >= 2;
    let planes: Vec<Vec<f64>> = match (gray, sixteen) {
        (true, false) => vec![img.to_luma8().pixels().map(|p| p.0[0] as f64 / 255.0).collect()],
        (true, true) => vec![img.to_luma16().pixels().map(|p| p.0[0] as f64 / 65535.0).collect()],
        (false, false) => split(img.to_rgb8().pixels().map(|p| p.0.map(|v| v as f64 / 255.0))),
        (false, true) => split(img.to_rgb16().pixels().map(|p| p.0.map(|v| v as f64 / 65535.0))),
    };
    let channels = planes
        .into_iter()
        .map(|v| ScalarField::from_vec(grid, v))
        .collect::<Result<Vec<_>>>()?;
    MultiChannelImage::new(channels)
}

fn split(pixels: impl Iterator<Item = [f64; 3]>) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(), Vec::new(), Vec::new()];
    for px in pixels {
        for (plane, v) in out.iter_mut().zip(px) {
            plane.push(v);
        }
    }
    out
}

fn quantize(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// 16-bit PNG bytes of a one- or three-channel image, clamped to `[0, 1]`.
pub fn encode_png16(img: &MultiChannelImage) -> Result<Vec<u8>> {
    let grid = img.grid();
    let (w, h) = (grid.width() as u32, grid.height() as u32);
    let dynamic = match img.num_channels() {
        1 => {
            let data = img.channel(0).values().iter().map(|&v| quantize(v)).collect();
            DynamicImage::ImageLuma16(
                ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w, h, data).expect("buffer size"),
            )
        }
        3 => {
            let mut data = Vec::with_capacity(grid.len() * 3);
            for idx in 0..grid.len() {
                for c in img.channels() {
                    data.push(quantize(c.values()[idx]));
                }
            }
            DynamicImage::ImageRgb16(
                ImageBuffer::<Rgb<u16>, Vec<u16>>::from_raw(w, h, data).expect("buffer size"),
            )
        }
        m => {
            return Err(Error::InvalidParameter(format!(
                "PNG output needs 1 or 3 channels, got {m}"
            )))
        }
    };
    let mut bytes = Vec::new();
    dynamic
        .write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(|e| image_error(Path::new("<png>"), e))?;
    Ok(bytes)
}

pub fn write_png16(path: &Path, img: &MultiChannelImage) -> Result<()> {
    atomic_write(path, &encode_png16(img)?)
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map_or_else(|| "out".into(), |n| n.to_string_lossy().into_owned());
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

/// Writes `bytes` next to `path` and renames into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
