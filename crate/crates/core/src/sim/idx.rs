//! IDX binary format reader (the MNIST container format).
//!
//! Header: two zero bytes, a type byte (0x08 = unsigned byte), the number of
//! dimensions, then one big-endian `u32` per dimension. Images use magic
//! `0x00000803` (count, rows, cols) and labels `0x00000801` (count).

use std::path::Path;

use thiserror::Error;

use super::data::Dataset;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdxError {
    #[error("bad magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("bad dimensions: {0}")]
    BadDims(String),

    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("image/label pairing: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("io: {0}")]
    Io(String),
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            expected: at + 4,
            found: bytes.len(),
        })
}

/// Parses the header, returning the dimension sizes and the payload offset.
fn header(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, usize), IdxError> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(IdxError::BadMagic {
            expected: magic,
            found,
        });
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|k| be_u32(bytes, 4 + 4 * k).map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((dims, 4 + 4 * ndims))
}

fn payload(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8], IdxError> {
    bytes.get(offset..offset + len).ok_or(IdxError::Truncated {
        expected: offset + len,
        found: bytes.len(),
    })
}

/// Images as rows of pixel values scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8]) -> Result<(Vec<f64>, usize, usize), IdxError> {
    let (dims, off) = header(bytes, IMAGES_MAGIC)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows == 0 || cols == 0 {
        return Err(IdxError::BadDims(format!("image size {rows}x{cols}")));
    }
    let px = payload(bytes, off, count * rows * cols)?;
    Ok((
        px.iter().map(|&b| b as f64 / 255.0).collect(),
        count,
        rows * cols,
    ))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<usize>, IdxError> {
    let (dims, off) = header(bytes, LABELS_MAGIC)?;
    Ok(payload(bytes, off, dims[0])?
        .iter()
        .map(|&b| b as usize)
        .collect())
}

/// Pairs an image file with a label file.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset, IdxError> {
    let (x, count, dim) = parse_images(images)?;
    let y = parse_labels(labels)?;
    if y.len() != count {
        return Err(IdxError::CountMismatch {
            images: count,
            labels: y.len(),
        });
    }
    Dataset::new(x, Some(y), dim).map_err(|e| IdxError::BadDims(e.to_string()))
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset, IdxError> {
    let read =
        |p: &Path| std::fs::read(p).map_err(|e| IdxError::Io(format!("{}: {e}", p.display())));
    parse_idx(&read(images)?, &read(labels)?)
}

/// Serializes a dataset of `[0, 1]` features as an IDX image/label pair.
pub fn encode_idx(data: &Dataset, rows: usize, cols: usize) -> (Vec<u8>, Vec<u8>) {
    assert_eq!(rows * cols, data.dim());
    let mut img = IMAGES_MAGIC.to_be_bytes().to_vec();
    for v in [data.len(), rows, cols] {
        img.extend_from_slice(&(v as u32).to_be_bytes());
    }
    img.extend(
        data.features()
            .iter()
            .map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    let mut lab = LABELS_MAGIC.to_be_bytes().to_vec();
    lab.extend_from_slice(&(data.len() as u32).to_be_bytes());
    lab.extend(data.labels().unwrap_or(&[]).iter().map(|&y| y as u8));
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Vec<u8>, Vec<u8>) {
        let mut img = vec![0, 0, 8, 3, 0, 0, 0, 4, 0, 0, 0, 28, 0, 0, 0, 28];
        img.extend((0..4 * 784).map(|k| (k % 256) as u8));
        let lab = vec![0, 0, 8, 1, 0, 0, 0, 4, 7, 2, 1, 0];
        (img, lab)
    }

    #[test]
    fn four_images() {
        let (img, lab) = fixture();
        let d = parse_idx(&img, &lab).unwrap();
        assert_eq!((d.len(), d.dim()), (4, 784));
        assert_eq!(d.labels(), Some(&[7, 2, 1, 0][..]));
        assert_eq!(d.x(0)[255], 1.0);
        assert_eq!(d.x(0)[0], 0.0);
    }

    #[test]
    fn diagnostics_are_distinct() {
        let (mut img, lab) = fixture();
        img[3] = 1;
        assert!(matches!(
            parse_idx(&img, &lab),
            Err(IdxError::BadMagic { .. })
        ));
        let (img, lab) = fixture();
        assert!(matches!(
            parse_idx(&img[..100], &lab),
            Err(IdxError::Truncated { .. })
        ));
        let short = vec![0, 0, 8, 1, 0, 0, 0, 3, 7, 2, 1];
        assert_eq!(
            parse_idx(&img, &short),
            Err(IdxError::CountMismatch {
                images: 4,
                labels: 3
            })
        );
        let mut flat = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 28];
        flat.extend([0u8; 28]);
        assert!(matches!(parse_images(&flat), Err(IdxError::BadDims(_))));
    }

    #[test]
    fn encode_round_trip() {
        let (img, lab) = fixture();
        let d = parse_idx(&img, &lab).unwrap();
        let (i2, l2) = encode_idx(&d, 28, 28);
        assert_eq!((i2, l2), (img, lab));
    }
}
