//! PNG reading and writing for slices and masks, plus atomic file output
//! and content hashing.
//!
//! Images are 16-bit grayscale PNGs. On the way in they are either kept raw
//! (`0..=65535`, for preprocessing) or scaled to `[0, 1]` (for augmentation
//! of already-preprocessed slices); on the way out unit-range values are
//! scaled back to the full 16-bit range. Masks are 8-bit grayscale PNGs
//! whose pixel values are the literal label ids `{0, 1, 2, 3}`.
//!
//! All writes go through a temp-file-then-rename step so a crash never
//! leaves a half-written artifact, and rewriting identical content yields
//! byte-identical files (no timestamps or metadata are embedded).

use std::io::Cursor;
use std::io::Write as _;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use sha2::{Digest, Sha256};

use cardioaug::grid::{Image2D, LabelMask2D};

use crate::error::{CliError, Result};

const U16_MAX: f64 = 65535.0;

/// Read a 16-bit grayscale PNG as raw intensities `0..=65535`.
pub fn read_raw_image(path: &Path, spacing: (f64, f64)) -> Result<Image2D<f64>> {
    let (values, w, h) = read_luma16(path)?;
    let values = values.into_iter().map(f64::from).collect();
    Image2D::new(w, h, spacing, values).map_err(CliError::Core)
}

/// Read a 16-bit grayscale PNG scaled to `[0, 1]`.
pub fn read_unit_image(path: &Path, spacing: (f64, f64)) -> Result<Image2D<f64>> {
    let (values, w, h) = read_luma16(path)?;
    let values = values.into_iter().map(|v| f64::from(v) / U16_MAX).collect();
    Image2D::new(w, h, spacing, values).map_err(CliError::Core)
}

/// Write a unit-range image as a 16-bit grayscale PNG
/// (`round(v * 65535)`). Values outside `[0, 1]` are rejected.
pub fn write_unit_image(path: &Path, image: &Image2D<f64>) -> Result<()> {
    let mut raw = Vec::with_capacity(image.values().len());
    for &v in image.values() {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Validation(format!(
                "cannot encode value {v} outside [0, 1] into {}",
                path.display()
            )));
        }
        raw.push((v * U16_MAX).round() as u16);
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(image.width() as u32, image.height() as u32, raw)
            .expect("buffer length matches dimensions");
    let mut bytes = Vec::new();
    DynamicImage::ImageLuma16(buf)
        .write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(|e| CliError::decode(path, e.to_string()))?;
    write_bytes_atomic(path, &bytes)
}

/// Read an 8-bit grayscale PNG of literal label values.
pub fn read_mask(path: &Path) -> Result<LabelMask2D> {
    let img = image::open(path).map_err(|e| CliError::decode(path, e.to_string()))?;
    let buf = match img {
        DynamicImage::ImageLuma8(buf) => buf,
        other => {
            return Err(CliError::decode(
                path,
                format!(
                    "expected an 8-bit grayscale mask PNG, found {:?}",
                    other.color()
                ),
            ))
        }
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    LabelMask2D::new(w, h, buf.into_raw())
        .map_err(|e| CliError::decode(path, e.to_string()))
}

/// Write a label mask as an 8-bit grayscale PNG of literal label values.
pub fn write_mask(path: &Path, mask: &LabelMask2D) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        mask.width() as u32,
        mask.height() as u32,
        mask.labels().to_vec(),
    )
    .expect("buffer length matches dimensions");
    let mut bytes = Vec::new();
    DynamicImage::ImageLuma8(buf)
        .write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(|e| CliError::decode(path, e.to_string()))?;
    write_bytes_atomic(path, &bytes)
}

fn read_luma16(path: &Path) -> Result<(Vec<u16>, usize, usize)> {
    let img = image::open(path).map_err(|e| CliError::decode(path, e.to_string()))?;
    match img {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            Ok((buf.into_raw(), w, h))
        }
        other => Err(CliError::decode(
            path,
            format!(
                "expected a 16-bit grayscale slice PNG, found {:?}",
                other.color()
            ),
        )),
    }
}

/// Write `bytes` to `path` atomically: temp file in the same directory,
/// flushed, then renamed over the destination.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let dir = dir.unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(bytes).map_err(CliError::io(path))?;
    tmp.flush().map_err(CliError::io(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Lowercase hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(out, "{b:02x}").expect("writing to a String cannot fail");
    }
    out
}

/// SHA-256 of a file's contents.
pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(sha256_hex(&bytes))
}
