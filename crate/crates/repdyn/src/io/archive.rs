//! The `KTA1` tensor archive: a little-endian fixed-layout container for
//! named n-dimensional arrays of f32, f64, or i64.
//!
//! Layout: magic `KTA1` (4 bytes) · entry count (u32 LE) · entries, each
//! `[name-length u16 LE, name UTF-8, dtype u8 (0 = f32, 1 = f64,
//! 2 = i64), rank u8, dims (u64 LE each), payload LE]`. Payload length is
//! `product(dims) * dtype-size`; names are unique within an archive.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::IoError;
use crate::linalg::Mat;

pub const ARCHIVE_MAGIC: [u8; 4] = *b"KTA1";

/// One named array: element type, dims, and a flat row-major payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    F32 { dims: Vec<u64>, data: Vec<f32> },
    F64 { dims: Vec<u64>, data: Vec<f64> },
    I64 { dims: Vec<u64>, data: Vec<i64> },
}

impl Tensor {
    pub fn dims(&self) -> &[u64] {
        match self {
            Tensor::F32 { dims, .. } | Tensor::F64 { dims, .. } | Tensor::I64 { dims, .. } => dims,
        }
    }

    pub fn element_count(&self) -> usize {
        self.dims().iter().product::<u64>() as usize
    }

    fn dtype_code(&self) -> u8 {
        match self {
            Tensor::F32 { .. } => 0,
            Tensor::F64 { .. } => 1,
            Tensor::I64 { .. } => 2,
        }
    }

    pub fn from_mat_f32(m: &Mat<f32>) -> Self {
        Tensor::F32 {
            dims: vec![m.rows() as u64, m.cols() as u64],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn from_mat_f64(m: &Mat<f64>) -> Self {
        Tensor::F64 {
            dims: vec![m.rows() as u64, m.cols() as u64],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        Tensor::I64 {
            dims: vec![labels.len() as u64],
            data: labels.iter().map(|&l| l as i64).collect(),
        }
    }

    pub fn scalar_i64(v: i64) -> Self {
        Tensor::I64 {
            dims: vec![1],
            data: vec![v],
        }
    }

    pub fn scalar_f64(v: f64) -> Self {
        Tensor::F64 {
            dims: vec![1],
            data: vec![v],
        }
    }

    /// Strings ride as rank-1 i64 tensors of UTF-8 byte values.
    pub fn from_string(s: &str) -> Self {
        Tensor::I64 {
            dims: vec![s.len() as u64],
            data: s.bytes().map(i64::from).collect(),
        }
    }

    pub fn as_mat_f32(&self, what: &str) -> Result<Mat<f32>, IoError> {
        match self {
            Tensor::F32 { dims, data } if dims.len() == 2 => Ok(Mat::from_vec(
                dims[0] as usize,
                dims[1] as usize,
                data.clone(),
            )),
            other => Err(shape_error(what, "rank-2 f32", other)),
        }
    }

    pub fn as_mat_f64(&self, what: &str) -> Result<Mat<f64>, IoError> {
        match self {
            Tensor::F64 { dims, data } if dims.len() == 2 => Ok(Mat::from_vec(
                dims[0] as usize,
                dims[1] as usize,
                data.clone(),
            )),
            other => Err(shape_error(what, "rank-2 f64", other)),
        }
    }

    pub fn as_labels(&self, what: &str) -> Result<Vec<usize>, IoError> {
        match self {
            Tensor::I64 { dims, data } if dims.len() == 1 => data
                .iter()
                .map(|&v| {
                    usize::try_from(v).map_err(|_| {
                        IoError::CorruptArchive {
                            path: String::new(),
                            detail: format!("{what}: negative label {v}"),
                        }
                    })
                })
                .collect(),
            other => Err(shape_error(what, "rank-1 i64", other)),
        }
    }

    pub fn as_scalar_i64(&self, what: &str) -> Result<i64, IoError> {
        match self {
            Tensor::I64 { data, .. } if data.len() == 1 => Ok(data[0]),
            other => Err(shape_error(what, "scalar i64", other)),
        }
    }

    pub fn as_scalar_f64(&self, what: &str) -> Result<f64, IoError> {
        match self {
            Tensor::F64 { data, .. } if data.len() == 1 => Ok(data[0]),
            other => Err(shape_error(what, "scalar f64", other)),
        }
    }

    pub fn as_string(&self, what: &str) -> Result<String, IoError> {
        match self {
            Tensor::I64 { dims, data } if dims.len() == 1 => {
                let bytes: Option<Vec<u8>> =
                    data.iter().map(|&v| u8::try_from(v).ok()).collect();
                bytes
                    .and_then(|b| String::from_utf8(b).ok())
                    .ok_or_else(|| IoError::CorruptArchive {
                        path: String::new(),
                        detail: format!("{what}: not a string-encoded tensor"),
                    })
            }
            other => Err(shape_error(what, "string (rank-1 i64)", other)),
        }
    }
}

fn shape_error(what: &str, expected: &str, got: &Tensor) -> IoError {
    IoError::CorruptArchive {
        path: String::new(),
        detail: format!(
            "{what}: expected {expected}, found dtype {} with dims {:?}",
            got.dtype_code(),
            got.dims()
        ),
    }
}

/// An ordered set of uniquely named tensors, written and read as `KTA1`.
#[derive(Debug, Clone, Default)]
pub struct TensorArchive {
    entries: Vec<(String, Tensor)>,
    /// Origin path when read from disk; improves error messages.
    source: Option<PathBuf>,
}

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<(), IoError> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(IoError::DuplicateName { name: name.into() });
        }
        self.entries.push((name.to_string(), tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor, IoError> {
        self.get(name).ok_or_else(|| IoError::MissingTensor {
            name: name.into(),
            path: self
                .source
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let file = File::create(path).map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        let io_err = |source| IoError::Io {
            path: path.display().to_string(),
            source,
        };
        w.write_all(&ARCHIVE_MAGIC).map_err(io_err)?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        for (name, tensor) in &self.entries {
            w.write_all(&(name.len() as u16).to_le_bytes()).map_err(io_err)?;
            w.write_all(name.as_bytes()).map_err(io_err)?;
            w.write_all(&[tensor.dtype_code(), tensor.dims().len() as u8])
                .map_err(io_err)?;
            for &d in tensor.dims() {
                w.write_all(&d.to_le_bytes()).map_err(io_err)?;
            }
            match tensor {
                Tensor::F32 { data, .. } => {
                    for v in data {
                        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
                    }
                }
                Tensor::F64 { data, .. } => {
                    for v in data {
                        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
                    }
                }
                Tensor::I64 { data, .. } => {
                    for v in data {
                        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
                    }
                }
            }
        }
        w.flush().map_err(io_err)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let file = File::open(path).map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut r = BufReader::new(file);
        let corrupt = |detail: String| IoError::CorruptArchive {
            path: path.display().to_string(),
            detail,
        };

        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, path, "magic")?;
        if magic != ARCHIVE_MAGIC {
            return Err(IoError::BadArchiveMagic {
                path: path.display().to_string(),
                found: magic,
            });
        }
        let mut count_buf = [0u8; 4];
        read_exact(&mut r, &mut count_buf, path, "entry count")?;
        let count = u32::from_le_bytes(count_buf) as usize;

        let mut archive = TensorArchive {
            entries: Vec::with_capacity(count),
            source: Some(path.to_path_buf()),
        };
        for i in 0..count {
            let mut len_buf = [0u8; 2];
            read_exact(&mut r, &mut len_buf, path, "name length")?;
            let name_len = u16::from_le_bytes(len_buf) as usize;
            let mut name_buf = vec![0u8; name_len];
            read_exact(&mut r, &mut name_buf, path, "name")?;
            let name = String::from_utf8(name_buf)
                .map_err(|_| corrupt(format!("entry {i}: name is not UTF-8")))?;

            let mut head = [0u8; 2];
            read_exact(&mut r, &mut head, path, "dtype/rank")?;
            let (dtype, rank) = (head[0], head[1] as usize);
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                let mut dim_buf = [0u8; 8];
                read_exact(&mut r, &mut dim_buf, path, "dims")?;
                dims.push(u64::from_le_bytes(dim_buf));
            }
            let elements = dims.iter().try_fold(1u64, |acc, &d| {
                acc.checked_mul(d)
            });
            let elements = elements
                .ok_or_else(|| corrupt(format!("`{name}`: dims {dims:?} overflow")))?
                as usize;

            let tensor = match dtype {
                0 => {
                    let mut buf = vec![0u8; elements * 4];
                    read_exact(&mut r, &mut buf, path, "f32 payload")?;
                    Tensor::F32 {
                        dims,
                        data: buf
                            .chunks_exact(4)
                            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                            .collect(),
                    }
                }
                1 => {
                    let mut buf = vec![0u8; elements * 8];
                    read_exact(&mut r, &mut buf, path, "f64 payload")?;
                    Tensor::F64 {
                        dims,
                        data: buf
                            .chunks_exact(8)
                            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                            .collect(),
                    }
                }
                2 => {
                    let mut buf = vec![0u8; elements * 8];
                    read_exact(&mut r, &mut buf, path, "i64 payload")?;
                    Tensor::I64 {
                        dims,
                        data: buf
                            .chunks_exact(8)
                            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                            .collect(),
                    }
                }
                other => return Err(corrupt(format!("`{name}`: unknown dtype {other}"))),
            };
            archive.insert(&name, tensor)?;
        }

        // Trailing bytes mean the writer and reader disagree on layout.
        let mut probe = [0u8; 1];
        match r.read(&mut probe) {
            Ok(0) => Ok(archive),
            Ok(_) => Err(corrupt("trailing bytes after last entry".into())),
            Err(source) => Err(IoError::Io {
                path: path.display().to_string(),
                source,
            }),
        }
    }
}

fn read_exact(
    r: &mut impl Read,
    buf: &mut [u8],
    path: &Path,
    what: &str,
) -> Result<(), IoError> {
    r.read_exact(buf).map_err(|source| {
        if source.kind() == std::io::ErrorKind::UnexpectedEof {
            IoError::CorruptArchive {
                path: path.display().to_string(),
                detail: format!("truncated while reading {what}"),
            }
        } else {
            IoError::Io {
                path: path.display().to_string(),
                source,
            }
        }
    })
}
