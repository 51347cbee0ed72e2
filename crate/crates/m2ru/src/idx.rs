//! IDX image and label files (the MNIST distribution format): a big-endian
//! u32 magic, u32 dimension sizes, then raw unsigned bytes.

use std::fs;
use std::path::Path;

use m2ru_core::harness::ImageSet;

use crate::error::{io_err, Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> ParseResult<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => Err((
            offset as u64,
            format!("file ends before the {what} field ({} bytes present)", bytes.len()),
        )),
    }
}

fn payload<'a>(bytes: &'a [u8], start: usize, expected: usize, what: &str) -> ParseResult<&'a [u8]> {
    let actual = bytes.len() - start;
    if actual != expected {
        let kind = if actual < expected { "truncated" } else { "oversized" };
        return Err((
            start as u64,
            format!("{kind} {what}: expected {expected} bytes, found {actual}"),
        ));
    }
    Ok(&bytes[start..])
}

/// Parse failure: byte offset and description.
pub type ParseResult<T> = std::result::Result<T, (u64, String)>;

/// Image count, rows, cols and `[0, 1]`-scaled pixels.
pub fn parse_images(bytes: &[u8]) -> ParseResult<(usize, usize, usize, Vec<f64>)> {
    let magic = read_u32(bytes, 0, "magic number")?;
    if magic != IMAGES_MAGIC {
        return Err((0, format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let n = read_u32(bytes, 4, "image count")? as usize;
    let rows = read_u32(bytes, 8, "row count")? as usize;
    let cols = read_u32(bytes, 12, "column count")? as usize;
    let expected = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or((4, "dimension product overflows".to_string()))?;
    let data = payload(bytes, 16, expected, "pixel data")?;
    Ok((n, rows, cols, data.iter().map(|&b| f64::from(b) / 255.0).collect()))
}

pub fn parse_labels(bytes: &[u8]) -> ParseResult<Vec<usize>> {
    let magic = read_u32(bytes, 0, "magic number")?;
    if magic != LABELS_MAGIC {
        return Err((0, format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let n = read_u32(bytes, 4, "label count")? as usize;
    let data = payload(bytes, 8, n, "label data")?;
    Ok(data.iter().map(|&b| usize::from(b)).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

fn located<T>(path: &Path, r: std::result::Result<T, (u64, String)>) -> Result<T> {
    r.map_err(|(offset, detail)| Error::Idx {
        path: path.to_path_buf(),
        offset,
        detail,
    })
}

/// Loads an image file and its label file into one set.
pub fn load_idx(images: &Path, labels: &Path) -> Result<ImageSet> {
    let (n, rows, cols, pixels) = located(images, parse_images(&read(images)?))?;
    let labels_v = located(labels, parse_labels(&read(labels)?))?;
    if labels_v.len() != n {
        return Err(Error::Idx {
            path: labels.to_path_buf(),
            offset: 4,
            detail: format!("{} labels for {n} images", labels_v.len()),
        });
    }
    Ok(ImageSet::new(rows, cols, pixels, labels_v)?)
}

pub fn encode_images(set: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.pixels.len());
    for v in [IMAGES_MAGIC, set.len() as u32, set.rows as u32, set.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(set.pixels.iter().map(|p| (p * 255.0).round() as u8));
    out
}

pub fn encode_labels(labels: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend(labels.iter().map(|&l| l as u8));
    out
}

pub fn save_idx(set: &ImageSet, images: &Path, labels: &Path) -> Result<()> {
    fs::write(images, encode_images(set)).map_err(io_err(images))?;
    fs::write(labels, encode_labels(&set.labels)).map_err(io_err(labels))
}
