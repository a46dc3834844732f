//! IDX container (MNIST layout): big-endian magic, big-endian u32 dims,
//! raw payload.
//!
//! Images are read from `0x00000803` (u8, scaled to `[0, 1]`) or
//! `0x00000E03` (f64, taken as-is); labels from `0x00000801`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const IMAGES_MAGIC_U8: u32 = 0x0000_0803;
pub const IMAGES_MAGIC_F64: u32 = 0x0000_0E03;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxDtype {
    U8,
    F64,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn check_len(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(())
}

/// Returns the image matrix (one flattened image per row), the per-image
/// dims and the payload type.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(DenseMatrix, Vec<usize>, IdxDtype)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    check_len(path, &bytes, 16)?;
    let magic = be_u32(&bytes, 0);
    let dtype = match magic {
        IMAGES_MAGIC_U8 => IdxDtype::U8,
        IMAGES_MAGIC_F64 => IdxDtype::F64,
        found => {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found,
                expected: IMAGES_MAGIC_U8,
            })
        }
    };
    let count = be_u32(&bytes, 4) as usize;
    let dims = vec![be_u32(&bytes, 8) as usize, be_u32(&bytes, 12) as usize];
    let per_image = dims[0] * dims[1];
    let width = if dtype == IdxDtype::U8 { 1 } else { 8 };
    let payload = &bytes[16..];
    check_len(path, payload, count * per_image * width).map_err(|_| Error::Truncated {
        path: path.to_path_buf(),
        expected: 16 + count * per_image * width,
        found: bytes.len(),
    })?;
    let data: Vec<f64> = match dtype {
        IdxDtype::U8 => payload[..count * per_image].iter().map(|&b| b as f64 / 255.0).collect(),
        IdxDtype::F64 => payload[..count * per_image * 8]
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    Ok((DenseMatrix::new(count, per_image, data)?, dims, dtype))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    check_len(path, &bytes, 8)?;
    let magic = be_u32(&bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
            expected: LABELS_MAGIC,
        });
    }
    let count = be_u32(&bytes, 4) as usize;
    check_len(path, &bytes, 8 + count)?;
    Ok(bytes[8..8 + count].iter().map(|&b| b as usize).collect())
}

/// Loads an image/label file pair. The class count is `max label + 1`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (inputs, _, _) = read_idx_images(&images_path)?;
    let labels = read_idx_labels(&labels_path)?;
    if inputs.rows() != labels.len() {
        return Err(Error::CountMismatch {
            images: inputs.rows(),
            labels: labels.len(),
        });
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    Dataset::new(
        inputs,
        labels,
        classes,
        format!("idx {}", images_path.as_ref().display()),
    )
}

pub fn write_idx_images(data: &Dataset, dims: &[usize; 2], dtype: IdxDtype, path: impl AsRef<Path>) -> Result<()> {
    if dims[0] * dims[1] != data.input_dim() {
        return Err(crate::error::shape_err(
            "write_idx_images",
            format!("{} features", dims[0] * dims[1]),
            data.input_dim(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let magic = match dtype {
        IdxDtype::U8 => IMAGES_MAGIC_U8,
        IdxDtype::F64 => IMAGES_MAGIC_F64,
    };
    for v in [magic, data.len() as u32, dims[0] as u32, dims[1] as u32] {
        w.write_all(&v.to_be_bytes())?;
    }
    match dtype {
        IdxDtype::U8 => {
            let bytes: Vec<u8> = data
                .inputs
                .as_slice()
                .iter()
                .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
                .collect();
            w.write_all(&bytes)?;
        }
        IdxDtype::F64 => {
            for v in data.inputs.as_slice() {
                w.write_all(&v.to_be_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_idx_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    let bytes: Vec<u8> = labels
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| Error::InvalidArgument(format!("label {l} does not fit in a byte"))))
        .collect::<Result<_>>()?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let mut img = Vec::new();
        img.extend_from_slice(&IMAGES_MAGIC_U8.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&3u32.to_be_bytes());
        img.extend_from_slice(&[0, 255, 51, 102, 0, 0, 1, 2, 3, 4, 5, 255]);
        let mut lab = Vec::new();
        lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        lab.extend_from_slice(&2u32.to_be_bytes());
        lab.extend_from_slice(&[7, 2]);
        let (ip, lp) = (dir.join("img"), dir.join("lab"));
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lab).unwrap();
        (ip, lp)
    }

    #[test]
    fn hand_built_fixture_parses_pixel_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d.inputs.shape(), (2, 6));
        assert_eq!(d.inputs.row(0), &[0.0, 1.0, 0.2, 0.4, 0.0, 0.0]);
        assert_eq!(d.inputs.get(1, 5), 1.0);
        assert_eq!(d.inputs.get(1, 0), 1.0 / 255.0);
        assert_eq!(d.labels, vec![7, 2]);
        assert_eq!(d.num_classes, 8);
    }

    #[test]
    fn reserialization_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let d = load_idx(&ip, &lp).unwrap();
        let (op, ol) = (dir.path().join("img2"), dir.path().join("lab2"));
        write_idx_images(&d, &[2, 3], IdxDtype::U8, &op).unwrap();
        write_idx_labels(&d.labels, &ol).unwrap();
        assert_eq!(std::fs::read(&ip).unwrap(), std::fs::read(&op).unwrap());
        assert_eq!(std::fs::read(&lp).unwrap(), std::fs::read(&ol).unwrap());
    }

    #[test]
    fn each_failure_has_its_own_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());

        let bad = dir.path().join("bad");
        let mut bytes = std::fs::read(&lp).unwrap();
        bytes[3] = 0x03;
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_idx(&ip, &bad), Err(Error::BadMagic { found: 0x803, .. })));

        let short = dir.path().join("short");
        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&short, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(load_idx(&short, &lp), Err(Error::Truncated { .. })));

        let one = dir.path().join("one");
        write_idx_labels(&[1], &one).unwrap();
        assert!(matches!(
            load_idx(&ip, &one),
            Err(Error::CountMismatch { images: 2, labels: 1 })
        ));
    }
}
