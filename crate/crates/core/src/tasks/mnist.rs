//! Sequential MNIST: one image row per step, the class at the last step.

use std::path::{Path, PathBuf};

use super::idx::{read_images, read_labels, IdxImages};
use super::{Episode, TaskStep};
use crate::cells::Target;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Vector;

pub const MNIST_ROWS: usize = 28;
pub const MNIST_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistImage {
    pub pixels: Vec<u8>,
    pub label: u8,
}

impl MnistImage {
    /// 28 steps of 28 pixels scaled to `[0, 1]`.
    pub fn episode<S: Scalar>(&self) -> Episode<S> {
        let steps = self
            .pixels
            .chunks(MNIST_ROWS)
            .enumerate()
            .map(|(i, row)| TaskStep {
                input: Vector::from_vec(row.iter().map(|&p| S::lit(p as f64 / 255.0)).collect()),
                target: (i + 1 == MNIST_ROWS).then_some(Target::Class(self.label as usize)),
            })
            .collect();
        Episode::new(steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Validation,
    Test,
}

/// Train, validation and test images. Validation is the last sixth of the
/// training file.
#[derive(Debug, Clone, PartialEq)]
pub struct Mnist {
    pub train: Vec<MnistImage>,
    pub validation: Vec<MnistImage>,
    pub test: Vec<MnistImage>,
}

fn find(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Io {
        path: dir.join(stem).display().to_string(),
        reason: "file not found (also tried .gz)".into(),
    })
}

fn zip_images(images: IdxImages, labels: Vec<u8>, path: &Path) -> Result<Vec<MnistImage>> {
    if images.rows != MNIST_ROWS || images.cols != MNIST_ROWS {
        return Err(Error::Idx {
            path: path.display().to_string(),
            offset: 8,
            reason: format!("expected 28x28 images, got {}x{}", images.rows, images.cols),
        });
    }
    if images.count != labels.len() {
        return Err(Error::Idx {
            path: path.display().to_string(),
            offset: 4,
            reason: format!("{} images but {} labels", images.count, labels.len()),
        });
    }
    if let Some(pos) = labels.iter().position(|&l| l as usize >= MNIST_CLASSES) {
        return Err(Error::Idx {
            path: path.display().to_string(),
            offset: 8 + pos,
            reason: format!("label {} out of range", labels[pos]),
        });
    }
    Ok((0..images.count)
        .map(|i| MnistImage {
            pixels: images.image(i).to_vec(),
            label: labels[i],
        })
        .collect())
}

impl Mnist {
    /// Loads the four standard IDX files from `dir`. `limit` caps the number
    /// of training images read (before the validation split).
    pub fn load(dir: &Path, limit: Option<usize>) -> Result<Self> {
        let load = |img: &str, lbl: &str| -> Result<Vec<MnistImage>> {
            let ip = find(dir, img)?;
            let lp = find(dir, lbl)?;
            zip_images(read_images(&ip)?, read_labels(&lp)?, &ip)
        };
        let mut train = load("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?;
        let test = load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?;
        if let Some(n) = limit {
            train.truncate(n);
        }
        let n_val = train.len() / 6;
        if n_val == 0 {
            return Err(Error::Invalid("too few training images for a validation split".into()));
        }
        let validation = train.split_off(train.len() - n_val);
        Ok(Self {
            train,
            validation,
            test,
        })
    }

    pub fn split(&self, which: MnistSplit) -> &[MnistImage] {
        match which {
            MnistSplit::Train => &self.train,
            MnistSplit::Validation => &self.validation,
            MnistSplit::Test => &self.test,
        }
    }
}
