//! Reader and writer for the big-endian IDX containers used by the EMNIST
//! distribution (uncompressed).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::dataset::{Dataset, FeatureScale};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Pixel layout of the images inside the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Keep the stored row-major order.
    AsStored,
    /// Stored column-major, as EMNIST ships its images; transposed on load so
    /// flattened rows read upright.
    Transposed,
}

/// Raw images (row-major bytes) plus their dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

pub fn read_images(r: &mut impl Read) -> Result<IdxImages> {
    let magic = read_u32(r)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "expected IDX image magic {IMAGES_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let count = read_u32(r)? as usize;
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    r.read_exact(&mut pixels)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn read_labels(r: &mut impl Read) -> Result<Vec<u8>> {
    let magic = read_u32(r)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "expected IDX label magic {LABELS_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let count = read_u32(r)? as usize;
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels)?;
    Ok(labels)
}

pub fn write_images(w: &mut impl Write, images: &IdxImages) -> io::Result<()> {
    w.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    for v in [images.count, images.rows, images.cols] {
        w.write_all(&(v as u32).to_be_bytes())?;
    }
    w.write_all(&images.pixels)
}

pub fn write_labels(w: &mut impl Write, labels: &[u8]) -> io::Result<()> {
    w.write_all(&LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)
}

/// Loads an image/label file pair into an un-normalised dataset, applying the
/// EMNIST transpose.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    load_idx_with(images_path, labels_path, Orientation::Transposed)
}

/// File names of the uncompressed Balanced EMNIST distribution.
pub const EMNIST_TRAIN_IMAGES: &str = "emnist-balanced-train-images-idx3-ubyte";
pub const EMNIST_TRAIN_LABELS: &str = "emnist-balanced-train-labels-idx1-ubyte";
pub const EMNIST_TEST_IMAGES: &str = "emnist-balanced-test-images-idx3-ubyte";
pub const EMNIST_TEST_LABELS: &str = "emnist-balanced-test-labels-idx1-ubyte";

/// Official train and test files of `dir` pooled into one raw dataset.
pub fn load_emnist_pooled(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let train = load_idx(dir.join(EMNIST_TRAIN_IMAGES), dir.join(EMNIST_TRAIN_LABELS))?;
    let test = load_idx(dir.join(EMNIST_TEST_IMAGES), dir.join(EMNIST_TEST_LABELS))?;
    Dataset::concat(&[&train, &test], "emnist-balanced")
}

pub fn load_idx_with(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    orientation: Orientation,
) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let images = read_images(&mut BufReader::new(File::open(images_path)?))?;
    let labels = read_labels(&mut BufReader::new(File::open(labels_path.as_ref())?))?;
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    to_dataset(&images, &labels, orientation, name)
}

pub fn to_dataset(images: &IdxImages, labels: &[u8], orientation: Orientation, name: String) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let (h, w) = (images.rows, images.cols);
    let d = h * w;
    let mut data = Vec::with_capacity(images.count * d);
    for img in images.pixels.chunks_exact(d.max(1)).take(images.count) {
        match orientation {
            Orientation::AsStored => data.extend(img.iter().map(|&p| p as f64)),
            Orientation::Transposed => {
                // stored (c, r) becomes output (r, c); output is w x h
                for c in 0..w {
                    for r in 0..h {
                        data.push(img[r * w + c] as f64);
                    }
                }
            }
        }
    }
    let features = DenseMatrix::from_vec(images.count, d, data)?;
    Dataset::new(
        features,
        labels.iter().map(|&l| l as usize).collect(),
        name,
        FeatureScale::RawBytes,
    )
}

pub fn save_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    images: &IdxImages,
    labels: &[u8],
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(images_path)?);
    write_images(&mut w, images)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(labels_path)?);
    write_labels(&mut w, labels)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes_images(images: &IdxImages) -> Vec<u8> {
        let mut v = Vec::new();
        write_images(&mut v, images).unwrap();
        v
    }

    #[test]
    fn single_blank_image() {
        let images = IdxImages {
            count: 1,
            rows: 28,
            cols: 28,
            pixels: vec![0; 784],
        };
        let parsed = read_images(&mut bytes_images(&images).as_slice()).unwrap();
        let ds = to_dataset(&parsed, &[3], Orientation::Transposed, "blank".into()).unwrap();
        assert_eq!(ds.features.shape(), (1, 784));
        assert!(ds.features.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(ds.labels, vec![3]);
    }

    #[test]
    fn handcrafted_bytes_round_trip() {
        // two 2x3 images with distinct bytes
        let pixels: Vec<u8> = (1..=12).collect();
        let images = IdxImages {
            count: 2,
            rows: 2,
            cols: 3,
            pixels,
        };
        let bytes = bytes_images(&images);
        assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
        assert_eq!(&bytes[4..16], &[0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3]);
        let parsed = read_images(&mut bytes.as_slice()).unwrap();
        assert_eq!(parsed, images);

        let stored = to_dataset(&parsed, &[0, 1], Orientation::AsStored, "x".into()).unwrap();
        assert_eq!(stored.features.row(1), &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let upright = to_dataset(&parsed, &[0, 1], Orientation::Transposed, "x".into()).unwrap();
        assert_eq!(upright.features.row(0), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn wrong_magic() {
        let mut labels = Vec::new();
        write_labels(&mut labels, &[1, 2]).unwrap();
        assert!(matches!(read_images(&mut labels.as_slice()), Err(Error::Format(_))));
        let images = bytes_images(&IdxImages {
            count: 1,
            rows: 1,
            cols: 1,
            pixels: vec![9],
        });
        assert!(matches!(read_labels(&mut images.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn flipped_endianness_rejected() {
        let mut bytes = bytes_images(&IdxImages {
            count: 1,
            rows: 1,
            cols: 1,
            pixels: vec![9],
        });
        bytes[..4].reverse();
        assert!(matches!(read_images(&mut bytes.as_slice()), Err(Error::Format(_))));
        let mut labels = Vec::new();
        write_labels(&mut labels, &[1]).unwrap();
        labels[..4].reverse();
        assert!(matches!(read_labels(&mut labels.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_is_io_error() {
        let bytes = bytes_images(&IdxImages {
            count: 2,
            rows: 2,
            cols: 2,
            pixels: vec![1; 8],
        });
        let cut = &bytes[..bytes.len() - 1];
        assert!(matches!(read_images(&mut &cut[..]), Err(Error::Io(_))));
    }

    #[test]
    fn count_mismatch() {
        let images = IdxImages {
            count: 2,
            rows: 1,
            cols: 1,
            pixels: vec![1, 2],
        };
        assert!(matches!(
            to_dataset(&images, &[0], Orientation::AsStored, "x".into()),
            Err(Error::Consistency(_))
        ));
    }
}
