//! FST v1: a minimal little-endian array container.
//!
//! ```text
//! 0..4    magic "FSEG"
//! 4..6    version u16 = 1
//! 6       dtype u8   (0 = f32, 1 = u32 labels)
//! 7       ndim u8    (1, 2 or 3)
//! 8..     ndim x u32 dimension sizes
//! ..      payload, row-major, 4 bytes per element
//! ..      dtype 1 only: trailing u32 n_labels
//! ```
//!
//! There is no padding and no compression, so identical objects always
//! serialize to identical bytes.

use std::fs;
use std::path::Path;

use super::{DenseMatrix, FeatureTensor, LabelMask};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FSEG";
pub const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;
const DTYPE_LABEL: u8 = 1;
const PREAMBLE: usize = 8;

/// A decoded FST object.
#[derive(Debug, Clone, PartialEq)]
pub enum Fst {
    /// ndim 3, f32.
    Tensor(FeatureTensor),
    /// ndim 2, f32.
    Matrix(DenseMatrix),
    /// ndim 1, f32 (e.g. a pooled feature vector).
    Vector(Vec<f32>),
    /// dtype 1, ndim 1 or 2. A 1D mask is read as a single row.
    Labels(LabelMask),
}

/// Borrowed form accepted by [`write_fst`].
#[derive(Debug, Clone, Copy)]
pub enum FstRef<'a> {
    Tensor(&'a FeatureTensor),
    Matrix(&'a DenseMatrix),
    Vector(&'a [f32]),
    Labels(&'a LabelMask),
}

impl<'a> From<&'a FeatureTensor> for FstRef<'a> {
    fn from(t: &'a FeatureTensor) -> Self {
        FstRef::Tensor(t)
    }
}

impl<'a> From<&'a DenseMatrix> for FstRef<'a> {
    fn from(m: &'a DenseMatrix) -> Self {
        FstRef::Matrix(m)
    }
}

impl<'a> From<&'a [f32]> for FstRef<'a> {
    fn from(v: &'a [f32]) -> Self {
        FstRef::Vector(v)
    }
}

impl<'a> From<&'a LabelMask> for FstRef<'a> {
    fn from(m: &'a LabelMask) -> Self {
        FstRef::Labels(m)
    }
}

impl<'a> From<&'a Fst> for FstRef<'a> {
    fn from(f: &'a Fst) -> Self {
        match f {
            Fst::Tensor(t) => FstRef::Tensor(t),
            Fst::Matrix(m) => FstRef::Matrix(m),
            Fst::Vector(v) => FstRef::Vector(v),
            Fst::Labels(l) => FstRef::Labels(l),
        }
    }
}

impl Fst {
    pub fn kind(&self) -> &'static str {
        match self {
            Fst::Tensor(_) => "tensor",
            Fst::Matrix(_) => "matrix",
            Fst::Vector(_) => "vector",
            Fst::Labels(_) => "labels",
        }
    }

    pub fn into_tensor(self) -> Result<FeatureTensor> {
        match self {
            Fst::Tensor(t) => Ok(t),
            other => Err(Error::Input(format!("expected a 3D feature tensor, found {}", other.kind()))),
        }
    }

    pub fn into_matrix(self) -> Result<DenseMatrix> {
        match self {
            Fst::Matrix(m) => Ok(m),
            other => Err(Error::Input(format!("expected a 2D matrix, found {}", other.kind()))),
        }
    }

    pub fn into_labels(self) -> Result<LabelMask> {
        match self {
            Fst::Labels(l) => Ok(l),
            other => Err(Error::Input(format!("expected a label mask, found {}", other.kind()))),
        }
    }
}

/// Header summary, as printed by `fseg info`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FstHeader {
    pub version: u16,
    pub dtype: u8,
    pub dims: Vec<u32>,
    pub n_labels: Option<u32>,
}

impl FstHeader {
    pub fn dtype_name(&self) -> &'static str {
        if self.dtype == DTYPE_LABEL {
            "u32-labels"
        } else {
            "f32"
        }
    }
}

fn dim_u32(field: &'static str, v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Unsupported(format!("{field} {v} does not fit in u32")))
}

pub fn encode_fst<'a>(obj: impl Into<FstRef<'a>>) -> Result<Vec<u8>> {
    let obj = obj.into();
    let (dtype, dims): (u8, Vec<u32>) = match obj {
        FstRef::Tensor(t) => (
            DTYPE_F32,
            vec![dim_u32("rows", t.rows())?, dim_u32("cols", t.cols())?, dim_u32("channels", t.channels())?],
        ),
        FstRef::Matrix(m) => (DTYPE_F32, vec![dim_u32("n_rows", m.n_rows())?, dim_u32("n_cols", m.n_cols())?]),
        FstRef::Vector(v) => {
            if v.is_empty() {
                return Err(Error::Dimension("cannot write an empty vector".into()));
            }
            (DTYPE_F32, vec![dim_u32("length", v.len())?])
        }
        FstRef::Labels(l) => (DTYPE_LABEL, vec![dim_u32("rows", l.rows())?, dim_u32("cols", l.cols())?]),
    };
    let payload_len: usize = dims.iter().map(|&d| d as usize).product();
    let mut out = Vec::with_capacity(PREAMBLE + 4 * dims.len() + 4 * payload_len + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype);
    out.push(dims.len() as u8);
    for d in &dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    match obj {
        FstRef::Tensor(t) => {
            if t.data().iter().any(|v| v.is_nan() || *v < 0.0) {
                return Err(Error::Input("feature tensor contains a negative value".into()));
            }
            t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        FstRef::Matrix(m) => m.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        FstRef::Vector(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        FstRef::Labels(l) => {
            l.labels().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            out.extend_from_slice(&l.n_labels().to_le_bytes());
        }
    }
    Ok(out)
}

fn parse_header(bytes: &[u8]) -> Result<(FstHeader, usize)> {
    if bytes.len() < 4 {
        return Err(Error::format("magic", "file shorter than the 4-byte magic"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format("magic", format!("bad magic {:?}", String::from_utf8_lossy(&bytes[0..4]))));
    }
    if bytes.len() < PREAMBLE {
        return Err(Error::format("version", "truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format("version", format!("unsupported version {version}")));
    }
    let dtype = bytes[6];
    if dtype != DTYPE_F32 && dtype != DTYPE_LABEL {
        return Err(Error::format("dtype", format!("unknown dtype {dtype}")));
    }
    let ndim = bytes[7] as usize;
    if !(1..=3).contains(&ndim) {
        return Err(Error::format("ndim", format!("ndim must be 1, 2 or 3, got {ndim}")));
    }
    if dtype == DTYPE_LABEL && ndim == 3 {
        return Err(Error::format("ndim", "label masks have at most 2 dimensions"));
    }
    let dims_end = PREAMBLE + 4 * ndim;
    if bytes.len() < dims_end {
        return Err(Error::format("dims", "truncated dimension list"));
    }
    let dims: Vec<u32> =
        bytes[PREAMBLE..dims_end].chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    if dims.contains(&0) {
        return Err(Error::format("dims", format!("zero-sized dimension in {dims:?}")));
    }
    let n_labels = if dtype == DTYPE_LABEL {
        let n = bytes.len();
        (n >= dims_end + 4).then(|| u32::from_le_bytes([bytes[n - 4], bytes[n - 3], bytes[n - 2], bytes[n - 1]]))
    } else {
        None
    };
    Ok((FstHeader { version, dtype, dims, n_labels }, dims_end))
}

pub fn decode_fst(bytes: &[u8]) -> Result<Fst> {
    let (header, payload_start) = parse_header(bytes)?;
    let count = header
        .dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| Error::format("dims", format!("dimension overflow for {:?}", header.dims)))?;
    let trailer = if header.dtype == DTYPE_LABEL { 4 } else { 0 };
    let expected = count
        .checked_mul(4)
        .and_then(|v| v.checked_add(payload_start + trailer))
        .ok_or_else(|| Error::format("dims", format!("dimension overflow for {:?}", header.dims)))?;
    if bytes.len() < expected {
        return Err(Error::format(
            "payload",
            format!("truncated payload: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format("payload", format!("{} trailing bytes after payload", bytes.len() - expected)));
    }
    let words = bytes[payload_start..payload_start + 4 * count].chunks_exact(4);
    let dims: Vec<usize> = header.dims.iter().map(|&d| d as usize).collect();
    if header.dtype == DTYPE_LABEL {
        let labels: Vec<u32> = words.map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let n_labels = header.n_labels.expect("length checked above");
        if n_labels == 0 {
            return Err(Error::format("n_labels", "n_labels must be positive"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > n_labels) {
            return Err(Error::format("labels", format!("label {bad} exceeds n_labels={n_labels}")));
        }
        let (rows, cols) = if dims.len() == 1 { (1, dims[0]) } else { (dims[0], dims[1]) };
        return LabelMask::new(rows, cols, n_labels, labels).map(Fst::Labels);
    }
    let data: Vec<f32> = words.map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    match dims.len() {
        1 => Ok(Fst::Vector(data)),
        2 => DenseMatrix::new(dims[0], dims[1], data).map(Fst::Matrix),
        _ => {
            if let Some(pos) = data.iter().position(|v| v.is_nan() || *v < 0.0) {
                return Err(Error::format(
                    "payload",
                    format!("negative or NaN value {} at element {pos} of a feature tensor", data[pos]),
                ));
            }
            FeatureTensor::new(dims[0], dims[1], dims[2], data).map(Fst::Tensor)
        }
    }
}

pub fn write_fst<'a>(path: impl AsRef<Path>, obj: impl Into<FstRef<'a>>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_fst(obj)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_fst(path: impl AsRef<Path>) -> Result<Fst> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fst(&bytes)
}

pub fn read_fst_header(path: impl AsRef<Path>) -> Result<FstHeader> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_header(&bytes).map(|(h, _)| h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_tensor_layout() {
        let t = FeatureTensor::new(1, 1, 1, vec![0.0]).unwrap();
        let bytes = encode_fst(&t).unwrap();
        // 4 magic + 2 version + 1 dtype + 1 ndim + 3 * 4 dims + 4 payload.
        assert_eq!(bytes.len(), 24);
        assert_eq!(&bytes[0..4], b"FSEG");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 3]);
    }

    #[test]
    fn bad_magic() {
        let t = FeatureTensor::new(1, 1, 1, vec![0.0]).unwrap();
        let mut bytes = encode_fst(&t).unwrap();
        bytes[0] = b'X';
        let err = decode_fst(&bytes).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FSEG");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&[0, 3]);
        for _ in 0..3 {
            bytes.extend_from_slice(&2u32.to_le_bytes());
        }
        for _ in 0..7 {
            bytes.extend_from_slice(&1.0f32.to_le_bytes());
        }
        let err = decode_fst(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { field: "payload", .. }));
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn dimension_overflow() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FSEG");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&[0, 3]);
        for _ in 0..3 {
            bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        let err = decode_fst(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { field: "dims" | "payload", .. }), "{err}");
    }

    #[test]
    fn negative_value_in_tensor_payload() {
        let m = DenseMatrix::new(1, 1, vec![-0.5]).unwrap();
        let mut bytes = encode_fst(&m).unwrap();
        // Rewrite the header as a 1x1x1 tensor.
        bytes.truncate(8);
        bytes[7] = 3;
        for _ in 0..3 {
            bytes.extend_from_slice(&1u32.to_le_bytes());
        }
        bytes.extend_from_slice(&(-0.5f32).to_le_bytes());
        let err = decode_fst(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { field: "payload", .. }));
    }

    #[test]
    fn labels_one_dimensional_and_trailer() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FSEG");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&[1, 1]);
        bytes.extend_from_slice(&3u32.to_le_bytes());
        for l in [0u32, 2, 1] {
            bytes.extend_from_slice(&l.to_le_bytes());
        }
        bytes.extend_from_slice(&3u32.to_le_bytes());
        let mask = decode_fst(&bytes).unwrap().into_labels().unwrap();
        assert_eq!(mask.dims(), (1, 3));
        assert_eq!(mask.labels(), &[0, 2, 1]);
        assert_eq!(mask.n_labels(), 3);

        // Label beyond the ignore value.
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&1u32.to_le_bytes());
        assert!(matches!(decode_fst(&bytes), Err(Error::Format { field: "labels", .. })));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_fst(&[1.0f32, 2.0][..]).unwrap();
        bytes.push(0);
        assert!(decode_fst(&bytes).unwrap_err().to_string().contains("trailing"));
    }

    #[test]
    fn wrong_version_and_ndim() {
        let mut bytes = encode_fst(&[1.0f32][..]).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode_fst(&bytes), Err(Error::Format { field: "version", .. })));
        let mut bytes = encode_fst(&[1.0f32][..]).unwrap();
        bytes[7] = 4;
        assert!(matches!(decode_fst(&bytes), Err(Error::Format { field: "ndim", .. })));
    }
}
