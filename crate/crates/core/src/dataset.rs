//! IDX ingestion and binary class-pair extraction.
//!
//! Images are kept as raw 8-bit intensities. Conversion to real-valued
//! vectors happens in [`crate::embedding`].

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file} file: magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        file: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("{file} file truncated in {field}: need {needed} bytes, found {available}")]
    Truncated {
        file: &'static str,
        field: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("count mismatch: images file holds {images} items, labels file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("pixel buffer of {len} bytes is not a whole number of {dim}-pixel samples")]
    Shape { len: usize, dim: usize },
    #[error("invalid class pair ({0}, {0}): classes must differ")]
    InvalidPair(u8),
    #[error("class {0} has no samples")]
    EmptyClass(u8),
    #[error("bits per feature must be at least 1")]
    ZeroBits,
}

/// Labeled 8-bit image samples, flattened row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(
        rows: usize,
        cols: usize,
        pixels: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<Self, DatasetError> {
        let dim = rows * cols;
        if dim == 0 || pixels.len() % dim != 0 {
            return Err(DatasetError::Shape {
                len: pixels.len(),
                dim,
            });
        }
        let images = pixels.len() / dim;
        if images != labels.len() {
            return Err(DatasetError::CountMismatch {
                images,
                labels: labels.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    /// Number of samples `M`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sample dimension `D = rows × cols`.
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn sample(&self, i: usize) -> &[u8] {
        let d = self.dim();
        &self.pixels[i * d..(i + 1) * d]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[u8]> {
        self.pixels.chunks_exact(self.dim())
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn count_of(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }

    fn select(&self, keep: impl Iterator<Item = (usize, u8)>) -> Self {
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for (i, new_label) in keep {
            pixels.extend_from_slice(self.sample(i));
            labels.push(new_label);
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels,
            labels,
        }
    }

    /// Keeps only samples of `class_a` and `class_b`, relabeled to 0 and 1
    /// respectively, in their original order.
    pub fn extract_pair(&self, class_a: u8, class_b: u8) -> Result<Self, DatasetError> {
        if class_a == class_b {
            return Err(DatasetError::InvalidPair(class_a));
        }
        for class in [class_a, class_b] {
            if self.count_of(class) == 0 {
                return Err(DatasetError::EmptyClass(class));
            }
        }
        Ok(self.select(self.labels.iter().enumerate().filter_map(|(i, &c)| {
            if c == class_a {
                Some((i, 0))
            } else if c == class_b {
                Some((i, 1))
            } else {
                None
            }
        })))
    }

    /// First `per_class` samples of every class, original order preserved.
    pub fn take_per_class(&self, per_class: usize) -> Self {
        let mut seen = [0usize; 256];
        self.select(self.labels.iter().enumerate().filter_map(|(i, &c)| {
            let n = &mut seen[c as usize];
            *n += 1;
            (*n <= per_class).then_some((i, c))
        }))
    }

    /// Serializes the images as an IDX3 file.
    pub fn to_idx_images(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for word in [
            IMAGES_MAGIC,
            self.len() as u32,
            self.rows as u32,
            self.cols as u32,
        ] {
            out.extend_from_slice(&word.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Serializes the labels as an IDX1 file.
    pub fn to_idx_labels(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

struct Reader<'a> {
    file: &'static str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, field: &'static str, n: usize) -> Result<&'a [u8], DatasetError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(DatasetError::Truncated {
                file: self.file,
                field,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, DatasetError> {
        let b = self.take(field, 4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<(), DatasetError> {
        let found = self.u32("magic")?;
        if found != expected {
            return Err(DatasetError::BadMagic {
                file: self.file,
                found,
                expected,
            });
        }
        Ok(())
    }
}

/// Parses an IDX3 image file. Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>), DatasetError> {
    let mut r = Reader {
        file: "images",
        bytes,
        pos: 0,
    };
    r.magic(IMAGES_MAGIC)?;
    let count = r.u32("item count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let pixels = r.take("pixel payload", count * rows * cols)?.to_vec();
    Ok((count, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DatasetError> {
    let mut r = Reader {
        file: "labels",
        bytes,
        pos: 0,
    };
    r.magic(LABELS_MAGIC)?;
    let count = r.u32("item count")? as usize;
    Ok(r.take("label payload", count)?.to_vec())
}

/// Parses an IDX image file and its companion label file.
pub fn parse_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset, DatasetError> {
    let read = |p: &Path| {
        fs::read(p).map_err(|source| DatasetError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let image_bytes = read(images_path.as_ref())?;
    let label_bytes = read(labels_path.as_ref())?;
    parse_idx_bytes(&image_bytes, &label_bytes)
}

pub fn parse_idx_bytes(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledDataset, DatasetError> {
    let (count, rows, cols, pixels) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if labels.len() != count {
        return Err(DatasetError::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    LabeledDataset::new(rows, cols, pixels, labels)
}

/// Bits used to quantize one transmitted feature (`α`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizationSpec {
    bits_per_feature: u32,
}

impl QuantizationSpec {
    pub fn new(bits_per_feature: u32) -> Result<Self, DatasetError> {
        if bits_per_feature == 0 {
            return Err(DatasetError::ZeroBits);
        }
        Ok(Self { bits_per_feature })
    }

    pub fn bits_per_feature(&self) -> u32 {
        self.bits_per_feature
    }

    /// Payload size of `features` quantized features.
    pub fn bits_for(&self, features: usize) -> f64 {
        self.bits_per_feature as f64 * features as f64
    }
}
