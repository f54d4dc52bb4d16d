//! Datasets: IDX (MNIST) parsing, binarization and the built-in 2x2
//! corpora.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::crossbar::InputVector;
use crate::error::{Error, ParseErrorKind, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

pub const DEFAULT_BINARIZE_THRESHOLD: u8 = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major gray levels.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::argument(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDataset {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub images: Vec<GrayImage>,
    pub labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// The first `n` examples (all of them if `n` exceeds the length).
    pub fn truncated(mut self, n: usize) -> Self {
        self.images.truncate(n);
        self.labels.truncate(n);
        self
    }

    pub fn binarized(&self, threshold: u8) -> Vec<InputVector> {
        self.images.iter().map(|im| binarize(im, threshold)).collect()
    }

    /// Serialize back to `(images, labels)` IDX byte streams.
    pub fn to_idx_bytes(&self) -> (Vec<u8>, Vec<u8>) {
        let mut images = Vec::with_capacity(16 + self.len() * self.width * self.height);
        images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        for d in [self.len(), self.height, self.width] {
            images.extend_from_slice(&(d as u32).to_be_bytes());
        }
        for im in &self.images {
            images.extend_from_slice(&im.pixels);
        }
        let mut labels = Vec::with_capacity(8 + self.len());
        labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        labels.extend_from_slice(&(self.len() as u32).to_be_bytes());
        labels.extend_from_slice(&self.labels);
        (images, labels)
    }
}

/// Big-endian cursor that reports the offset of any failure.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8], context: &'a str) -> Self {
        Cursor { bytes, pos: 0, context }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::parse(
                self.context,
                self.pos as u64,
                ParseErrorKind::Truncated {
                    needed: n as u64,
                    available: available as u64,
                },
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32()?;
        if found != expected {
            return Err(Error::parse(self.context, 0, ParseErrorKind::BadMagic { expected, found }));
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let rest = self.bytes.len() - self.pos;
        if rest != 0 {
            return Err(Error::parse(self.context, self.pos as u64, ParseErrorKind::TrailingBytes(rest as u64)));
        }
        Ok(())
    }
}

/// Parse an IDX image file: `count x rows x cols` unsigned bytes.
pub fn parse_idx_images(bytes: &[u8], context: &str) -> Result<(usize, usize, Vec<GrayImage>)> {
    let mut cur = Cursor::new(bytes, context);
    cur.magic(IDX_IMAGES_MAGIC)?;
    let count = cur.u32()? as usize;
    let height = cur.u32()? as usize;
    let width = cur.u32()? as usize;
    let size = width * height;
    let mut images = Vec::with_capacity(count.min(bytes.len() / size.max(1)));
    for _ in 0..count {
        images.push(GrayImage {
            width,
            height,
            pixels: cur.take(size)?.to_vec(),
        });
    }
    cur.finish()?;
    Ok((width, height, images))
}

pub fn parse_idx_labels(bytes: &[u8], context: &str) -> Result<Vec<u8>> {
    let mut cur = Cursor::new(bytes, context);
    cur.magic(IDX_LABELS_MAGIC)?;
    let count = cur.u32()? as usize;
    let labels = cur.take(count)?.to_vec();
    cur.finish()?;
    Ok(labels)
}

/// Read a file, transparently inflating it if it is gzip-compressed.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Load an image/label IDX pair.
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<LabeledDataset> {
    let image_ctx = image_path.display().to_string();
    let label_ctx = label_path.display().to_string();
    let (width, height, images) = parse_idx_images(&read_maybe_gzip(image_path)?, &image_ctx)?;
    let labels = parse_idx_labels(&read_maybe_gzip(label_path)?, &label_ctx)?;
    if images.len() != labels.len() {
        return Err(Error::parse(
            label_ctx,
            4,
            ParseErrorKind::CountMismatch {
                images: images.len() as u64,
                labels: labels.len() as u64,
            },
        ));
    }
    let name = image_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(LabeledDataset {
        name,
        width,
        height,
        images,
        labels,
    })
}

/// Bit `i` is 1 iff pixel `i` is at least `threshold`.
pub fn binarize(image: &GrayImage, threshold: u8) -> InputVector {
    InputVector::new(image.pixels.iter().map(|&p| p >= threshold).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corpus {
    /// The two programmed targets of the 4x2 inference demo.
    Fig1Targets,
    /// All sixteen 2x2 images.
    Fig1Inputs,
    /// The two images of the clustering experiment.
    Fig3Inputs,
}

pub fn builtin_corpus(corpus: Corpus) -> Vec<InputVector> {
    let parse = |s: &str| InputVector::parse(s).expect("valid literal");
    match corpus {
        Corpus::Fig1Targets => vec![parse("1100"), parse("1001")],
        Corpus::Fig1Inputs => (0..16u32).map(|x| parse(&format!("{x:04b}"))).collect(),
        Corpus::Fig3Inputs => vec![parse("1001"), parse("0110")],
    }
}
