//! Yin-Yang dataset generation and MNIST ingestion.

use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::DataError;
use crate::linalg::Mat;

/// A labelled point set. Features are `n x d`, one sample per row, stored in
/// `f32` (training precision); analysis paths widen to `f64` on demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Mat<f32>,
    pub labels: Vec<usize>,
    pub name: String,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    /// Row indices carrying each of the given labels.
    pub fn indices_of_classes(&self, classes: &[usize]) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| classes.contains(l))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Geometry and size of a generated Yin-Yang sample.
#[derive(Debug, Clone)]
pub struct YinYangSpec {
    pub n: usize,
    pub seed: u64,
    pub big_radius: f64,
    pub dot_radius: f64,
    pub center: (f64, f64),
}

impl YinYangSpec {
    /// Standard geometry: unit-square embedding with a radius-0.5 disk
    /// centered at (0.5, 0.5) and dots of radius 0.1.
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            big_radius: 0.5,
            dot_radius: 0.1,
            center: (0.5, 0.5),
        }
    }
}

/// Class of a point inside the big circle: 0 = yin, 1 = yang, 2 = dot.
///
/// The yin/yang boundary is the S-curve formed by the two half-circles of
/// radius `big_radius / 2` centered at the dot positions
/// `(cx, cy +/- big_radius / 2)`; the dots override with class 2.
pub fn yinyang_class(spec: &YinYangSpec, x: f64, y: f64) -> usize {
    let (cx, cy) = spec.center;
    let half = spec.big_radius / 2.0;
    let d_up2 = (x - cx).powi(2) + (y - (cy + half)).powi(2);
    let d_down2 = (x - cx).powi(2) + (y - (cy - half)).powi(2);
    let dot2 = spec.dot_radius * spec.dot_radius;
    if d_up2 <= dot2 || d_down2 <= dot2 {
        return 2;
    }
    let in_upper_lobe = d_up2 <= half * half;
    let in_lower_lobe = d_down2 <= half * half;
    // Yin is the left half of the disk, minus the lower lobe, plus the upper
    // lobe (areas of yin and yang are exactly equal by this construction).
    let yin = in_upper_lobe || (x <= cx && !in_lower_lobe);
    usize::from(!yin)
}

/// Rejection-samples a class-balanced Yin-Yang dataset: target classes cycle
/// 0,1,2,... and each draw is repeated until a uniform point of the big disk
/// lands in the target class, so counts differ by at most one.
pub fn gen_yinyang(spec: &YinYangSpec) -> Dataset {
    assert!(spec.n > 0, "cannot generate an empty dataset");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (cx, cy) = spec.center;
    let r = spec.big_radius;
    let mut features = Mat::zeros(spec.n, 2);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let target = i % 3;
        loop {
            let x = rng.gen_range((cx - r)..(cx + r));
            let y = rng.gen_range((cy - r)..(cy + r));
            if (x - cx).powi(2) + (y - cy).powi(2) >= r * r {
                continue; // outside the big circle: rejected
            }
            if yinyang_class(spec, x, y) == target {
                features[(i, 0)] = x as f32;
                features[(i, 1)] = y as f32;
                labels.push(target);
                break;
            }
        }
    }
    Dataset {
        features,
        labels,
        name: "yinyang".into(),
        seed: spec.seed,
    }
}

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads the four standard MNIST IDX files (plain or gzipped) from `dir`,
/// scaling pixels to `[0, 1]`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset), DataError> {
    let train = load_split(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte", 1)?;
    let test = load_split(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", 2)?;
    Ok((train, test))
}

fn load_split(
    dir: &Path,
    images_name: &str,
    labels_name: &str,
    seed: u64,
) -> Result<Dataset, DataError> {
    let (images_path, images_raw) = read_maybe_gz(dir, images_name)?;
    let (labels_path, labels_raw) = read_maybe_gz(dir, labels_name)?;
    let (features, n_images) = parse_images(&images_path, &images_raw)?;
    let labels = parse_labels(&labels_path, &labels_raw)?;
    if n_images != labels.len() {
        return Err(DataError::CountMismatch {
            images: n_images,
            labels: labels.len(),
        });
    }
    Ok(Dataset {
        features,
        labels,
        name: "mnist".into(),
        seed,
    })
}

/// Reads `name` or `name.gz` from `dir`, transparently inflating gzip
/// content (detected by its 0x1f 0x8b magic, not just the extension).
fn read_maybe_gz(dir: &Path, name: &str) -> Result<(PathBuf, Vec<u8>), DataError> {
    let plain = dir.join(name);
    let gz = dir.join(format!("{name}.gz"));
    let path = if plain.exists() { plain } else { gz };
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let raw = std::fs::read(&path).map_err(io_err)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut inflated = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut inflated)
            .map_err(io_err)?;
        return Ok((path, inflated));
    }
    Ok((path, raw))
}

fn be_u32(buf: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(buf[offset..offset + 4].try_into().unwrap())
}

fn check_len(path: &Path, buf: &[u8], needed: usize) -> Result<(), DataError> {
    if buf.len() < needed {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
            needed,
            found: buf.len(),
        });
    }
    Ok(())
}

fn parse_images(path: &Path, buf: &[u8]) -> Result<(Mat<f32>, usize), DataError> {
    check_len(path, buf, 16)?;
    let magic = be_u32(buf, 0);
    if magic != IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            path: path.display().to_string(),
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(buf, 4) as usize;
    let rows = be_u32(buf, 8) as usize;
    let cols = be_u32(buf, 12) as usize;
    let pixels = n * rows * cols;
    check_len(path, buf, 16 + pixels)?;
    let data = buf[16..16 + pixels]
        .iter()
        .map(|&b| f32::from(b) / 255.0)
        .collect();
    Ok((Mat::from_vec(n, rows * cols, data), n))
}

fn parse_labels(path: &Path, buf: &[u8]) -> Result<Vec<usize>, DataError> {
    check_len(path, buf, 8)?;
    let magic = be_u32(buf, 0);
    if magic != LABELS_MAGIC {
        return Err(DataError::BadMagic {
            path: path.display().to_string(),
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(buf, 4) as usize;
    check_len(path, buf, 8 + n)?;
    Ok(buf[8..8 + n].iter().map(|&b| b as usize).collect())
}
