//! k-nearest-neighbour icon classifier over normalized grayscale pixels.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage};
use log::warn;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("side must be at least 1")]
    ZeroSide,
    #[error("cannot read training directory {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("class folder {0} contains no usable images")]
    EmptyClass(PathBuf),
    #[error("training directory {path} has {found} class folder(s); at least 2 are required")]
    TooFewClasses { path: PathBuf, found: usize },
    #[error("feature vector has length {found}, expected {expected}")]
    FeatureLength { expected: usize, found: usize },
    #[error("model has no training examples")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub side: u32,
    examples: Vec<(Vec<f32>, String)>,
}

/// Outcome of one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: String,
    /// Votes for the winner divided by the number of neighbours consulted.
    pub score: f64,
    pub nearest_distance: f64,
}

/// Grayscale, area-averaged to `side x side`, scaled to `[0, 1]`.
pub fn features(img: &DynamicImage, side: u32) -> Vec<f32> {
    features_gray(&img.to_luma8(), side)
}

pub fn features_gray(g: &GrayImage, side: u32) -> Vec<f32> {
    let (w, h) = (g.width() as f64, g.height() as f64);
    let n = side as usize;
    let mut out = Vec::with_capacity(n * n);
    let (sx, sy) = (w / side as f64, h / side as f64);
    for oy in 0..n {
        let (y0, y1) = (oy as f64 * sy, (oy + 1) as f64 * sy);
        for ox in 0..n {
            let (x0, x1) = (ox as f64 * sx, (ox + 1) as f64 * sx);
            let mut acc = 0.0;
            let mut weight = 0.0;
            for py in y0.floor() as u32..(y1.ceil() as u32).min(g.height()) {
                let wy = (y1.min(py as f64 + 1.0) - y0.max(py as f64)).max(0.0);
                if wy == 0.0 {
                    continue;
                }
                for px in x0.floor() as u32..(x1.ceil() as u32).min(g.width()) {
                    let wx = (x1.min(px as f64 + 1.0) - x0.max(px as f64)).max(0.0);
                    acc += wx * wy * g.get_pixel(px, py)[0] as f64;
                    weight += wx * wy;
                }
            }
            out.push((acc / weight / 255.0) as f32);
        }
    }
    out
}

impl KnnModel {
    pub fn new(k: usize, side: u32) -> Result<Self, KnnError> {
        if k == 0 {
            return Err(KnnError::ZeroK);
        }
        if side == 0 {
            return Err(KnnError::ZeroSide);
        }
        Ok(KnnModel {
            k,
            side,
            examples: Vec::new(),
        })
    }

    pub fn add(&mut self, feature: Vec<f32>, class: impl Into<String>) -> Result<(), KnnError> {
        let expected = (self.side * self.side) as usize;
        if feature.len() != expected {
            return Err(KnnError::FeatureLength {
                expected,
                found: feature.len(),
            });
        }
        self.examples.push((feature, class.into()));
        Ok(())
    }

    pub fn add_image(&mut self, img: &DynamicImage, class: impl Into<String>) -> Result<(), KnnError> {
        self.add(features(img, self.side), class)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn classes(&self) -> Vec<&str> {
        let mut c: Vec<&str> = self.examples.iter().map(|(_, c)| c.as_str()).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn predict_features(&self, f: &[f32]) -> Result<Prediction, KnnError> {
        if self.examples.is_empty() {
            return Err(KnnError::Empty);
        }
        let expected = (self.side * self.side) as usize;
        if f.len() != expected {
            return Err(KnnError::FeatureLength {
                expected,
                found: f.len(),
            });
        }
        let mut dist: Vec<(f64, usize)> = self
            .examples
            .iter()
            .enumerate()
            .map(|(i, (e, _))| {
                let d2: f64 = e
                    .iter()
                    .zip(f)
                    .map(|(a, b)| {
                        let d = (*a - *b) as f64;
                        d * d
                    })
                    .sum();
                (d2, i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = self.k.min(dist.len());
        // class -> (votes, rank of its nearest member)
        let mut votes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (rank, &(_, i)) in dist[..k].iter().enumerate() {
            let e = votes.entry(self.examples[i].1.as_str()).or_insert((0, rank));
            e.0 += 1;
        }
        let (class, (v, _)) = votes
            .into_iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .expect("k >= 1");
        Ok(Prediction {
            class: class.to_string(),
            score: v as f64 / k as f64,
            nearest_distance: dist[0].0.sqrt(),
        })
    }

    pub fn predict(&self, img: &DynamicImage) -> Result<Prediction, KnnError> {
        self.predict_features(&features(img, self.side))
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, KnnError> {
    let io = |source| KnnError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut v = std::fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?;
    v.sort();
    Ok(v)
}

/// Train from `<root>/<ClassName>/*` images. Undecodable files are skipped
/// with a warning.
pub fn train_knn(root: &Path, k: usize, side: u32) -> Result<KnnModel, KnnError> {
    let mut model = KnnModel::new(k, side)?;
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.len() < 2 {
        return Err(KnnError::TooFewClasses {
            path: root.to_path_buf(),
            found: class_dirs.len(),
        });
    }
    for dir in class_dirs {
        let class = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut count = 0;
        for file in sorted_entries(&dir)?.into_iter().filter(|p| p.is_file()) {
            match image::open(&file) {
                Ok(img) => {
                    model.add_image(&img, class.clone())?;
                    count += 1;
                }
                Err(e) => warn!("skipping {}: {e}", file.display()),
            }
        }
        if count == 0 {
            return Err(KnnError::EmptyClass(dir));
        }
    }
    Ok(model)
}
