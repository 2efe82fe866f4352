//! IDX reader for unsigned-byte image and label files, optionally gzipped.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count · rows · cols` pixels, image-major then row-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let sz = self.rows * self.cols;
        &self.pixels[i * sz..(i + 1) * sz]
    }
}

fn err(path: &str, offset: usize, reason: impl Into<String>) -> Error {
    Error::Idx {
        path: path.to_string(),
        offset,
        reason: reason.into(),
    }
}

/// Reads a whole file, inflating it when it starts with the gzip magic.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| err(&path.display().to_string(), 0, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn header(bytes: &[u8], path: &str, magic: u32, ndims: usize) -> Result<Vec<usize>> {
    let need = 4 + 4 * ndims;
    if bytes.len() < need {
        return Err(err(path, bytes.len(), format!("truncated header, need {need} bytes")));
    }
    let word = |i: usize| u32::from_be_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let got = word(0);
    if got != magic {
        return Err(err(path, 0, format!("bad magic {got:#010x}, expected {magic:#010x}")));
    }
    Ok((0..ndims).map(|d| word(4 + 4 * d) as usize).collect())
}

pub fn parse_images(bytes: &[u8], path: &str) -> Result<IdxImages> {
    let dims = header(bytes, path, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let body = 16;
    let want = count * rows * cols;
    if bytes.len() - body < want {
        return Err(err(
            path,
            bytes.len(),
            format!("truncated pixel data: {count}x{rows}x{cols} needs {want} bytes after offset {body}"),
        ));
    }
    if bytes.len() - body > want {
        return Err(err(path, body + want, "trailing bytes after pixel data"));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[body..].to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8], path: &str) -> Result<Vec<u8>> {
    let count = header(bytes, path, LABELS_MAGIC, 1)?[0];
    let body = 8;
    if bytes.len() - body != count {
        return Err(err(
            path,
            bytes.len().min(body + count),
            format!("label count {count} disagrees with {} data bytes", bytes.len() - body),
        ));
    }
    Ok(bytes[body..].to_vec())
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    parse_images(&read_bytes(path)?, &path.display().to_string())
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    parse_labels(&read_bytes(path)?, &path.display().to_string())
}

/// Serialises images back to IDX bytes.
pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for w in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
