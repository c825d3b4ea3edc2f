//! On-disk formats: the RDT1 tensor container, PGM/PPM images, JSON
//! sidecars and CSV tables. Every write goes to a temp file in the target
//! directory and is renamed into place.
//!
//! RDT1 layout (all integers little-endian):
//!
//! ```text
//! offset  size        field
//! 0       4           magic "RDT1"
//! 4       2           version (u16) = 1
//! 6       1           dtype (u8): 0 = f32, 1 = c64 (re f32, im f32)
//! 7       1           ndim (u8), 1..=4
//! 8       4*ndim      dims (u32 each)
//! ...     n*size      payload, row-major, last axis fastest
//! ...     4           CRC32 (IEEE) of the payload bytes
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::RgbImage;
use crate::spectrogram::GrayImage;

pub const MAGIC: &[u8; 4] = b"RDT1";
pub const VERSION: u16 = 1;
pub const MAX_DIMS: usize = 4;
pub const SIDECAR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    F32,
    C64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::C64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::C64),
            _ => None,
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::C64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    C64(Vec<Complex32>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::C64(_) => DType::C64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::C64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("tensor needs at least one dimension"));
        }
        if dims.len() > MAX_DIMS {
            return Err(Error::invalid(format!(
                "tensor has {} dimensions, at most {MAX_DIMS} supported",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d > u32::MAX as usize) {
            return Err(Error::invalid(format!("dimension {d} does not fit in u32")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::invalid(format!(
                "dims {dims:?} describe {n} elements but {} were given",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Narrows to f32; values outside f32 range become ±inf.
    pub fn from_real(array: &ArrayD<f64>) -> Result<Self> {
        let data = array.iter().map(|&v| v as f32).collect();
        Self::new(array.shape().to_vec(), TensorData::F32(data))
    }

    /// Narrows each component to f32.
    pub fn from_complex(dims: Vec<usize>, values: impl IntoIterator<Item = num_complex::Complex64>) -> Result<Self> {
        let data = values
            .into_iter()
            .map(|z| Complex32::new(z.re as f32, z.im as f32))
            .collect();
        Self::new(dims, TensorData::C64(data))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn to_real(&self) -> Result<ArrayD<f64>> {
        match &self.data {
            TensorData::F32(v) => Ok(ArrayD::from_shape_vec(
                IxDyn(&self.dims),
                v.iter().map(|&x| x as f64).collect(),
            )
            .expect("dims checked at construction")),
            TensorData::C64(_) => Err(Error::invalid("tensor holds complex data")),
        }
    }

    fn payload(&self) -> Vec<u8> {
        match &self.data {
            TensorData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::C64(v) => v
                .iter()
                .flat_map(|z| z.re.to_le_bytes().into_iter().chain(z.im.to_le_bytes()))
                .collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.dtype().code());
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out
    }

    /// `path` only labels errors.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        let truncated = |expected: usize| Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        };
        if bytes.len() < 8 {
            return Err(truncated(8));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt(format!("bad magic {:?}", &bytes[..4])));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::UnsupportedVersion {
                path: path.to_path_buf(),
                found: version,
                supported: VERSION,
            });
        }
        let dtype = DType::from_code(bytes[6]).ok_or_else(|| corrupt(format!("unknown dtype code {}", bytes[6])))?;
        let ndim = bytes[7] as usize;
        if ndim == 0 || ndim > MAX_DIMS {
            return Err(corrupt(format!("ndim {ndim} outside 1..={MAX_DIMS}")));
        }
        let header = 8 + 4 * ndim;
        if bytes.len() < header {
            return Err(truncated(header));
        }
        let dims: Vec<usize> = bytes[8..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(dtype.size_bytes()))
            .ok_or_else(|| corrupt(format!("dims {dims:?} overflow")))?;
        let expected = header + n + 4;
        if bytes.len() < expected {
            return Err(truncated(expected));
        }
        if bytes.len() > expected {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() - expected)));
        }
        let payload = &bytes[header..header + n];
        let stored = u32::from_le_bytes(bytes[header + n..].try_into().unwrap());
        let actual = crc32fast::hash(payload);
        if stored != actual {
            return Err(corrupt(format!("CRC mismatch: stored {stored:08x}, computed {actual:08x}")));
        }
        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::C64 => TensorData::C64(
                payload
                    .chunks_exact(8)
                    .map(|c| {
                        Complex32::new(
                            f32::from_le_bytes(c[..4].try_into().unwrap()),
                            f32::from_le_bytes(c[4..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
        };
        Tensor::new(dims, data).map_err(|e| corrupt(e.to_string()))
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    atomic_write(path, &tensor.encode())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path)?;
    Tensor::decode(&bytes, path)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let (rows, cols) = img.dim();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(img.pixels.iter());
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    atomic_write(path, &encode_pgm(img))
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let (rows, cols, _) = img.pixels.dim();
    let mut out = format!("P6\n{cols} {rows}\n255\n").into_bytes();
    out.extend(img.pixels.iter());
    out
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    atomic_write(path, &encode_ppm(img))
}

/// Parses binary PGM with maxval 255. Comment lines in the header are
/// accepted.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let corrupt = |reason: &str| Error::Corrupt {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt("header ended early"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| corrupt("non-ASCII header"))?);
    }
    if fields[0] != "P5" {
        return Err(corrupt("not a binary PGM"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| corrupt("bad header number"));
    let (cols, rows, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(corrupt("only maxval 255 is supported"));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let n = rows * cols;
    if bytes.len() < pos + n {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: pos + n,
            found: bytes.len(),
        });
    }
    let pixels = Array2::from_shape_vec((rows, cols), bytes[pos..pos + n].to_vec()).map_err(|_| corrupt("bad shape"))?;
    Ok(GrayImage::from_pixels(pixels))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    decode_pgm(&bytes, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDescriptor {
    pub name: String,
    pub unit: String,
    /// Explicit coordinates; empty when the axis is a plain index.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

impl AxisDescriptor {
    pub fn index(name: &str) -> Self {
        Self {
            name: name.to_string(),
            unit: "index".to_string(),
            values: Vec::new(),
        }
    }

    pub fn with_values(name: &str, unit: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            unit: unit.to_string(),
            values,
        }
    }
}

/// JSON record written next to every artifact. Wall-clock timestamps are
/// left out unless asked for so that reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarMeta {
    pub schema_version: u32,
    pub producer: String,
    pub parameters: serde_json::Value,
    pub rng_seeds: Vec<u64>,
    pub axes: Vec<AxisDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix_s: Option<u64>,
}

impl SidecarMeta {
    pub fn new(producer: &str, parameters: serde_json::Value, rng_seeds: Vec<u64>, axes: Vec<AxisDescriptor>) -> Self {
        Self {
            schema_version: SIDECAR_SCHEMA_VERSION,
            producer: producer.to_string(),
            parameters,
            rng_seeds,
            axes,
            created_unix_s: None,
        }
    }
}

/// `foo.rdt` -> `foo.rdt.json`
pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn write_sidecar(artifact: &Path, meta: &SidecarMeta) -> Result<()> {
    write_json(&sidecar_path(artifact), meta)
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    atomic_write(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn pgm_golden_bytes() {
        let img = GrayImage::from_pixels(Array2::from_shape_vec((2, 2), vec![0, 85, 170, 255]).unwrap());
        let bytes = encode_pgm(&img);
        assert_eq!(&bytes[..], b"P5\n2 2\n255\n\x00\x55\xaa\xff");
        assert_eq!(bytes.len(), 15);
        let back = decode_pgm(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.pixels, img.pixels);
    }

    #[test]
    fn pgm_single_pixel_and_non_square() {
        let d = tmp();
        for shape in [(1, 1), (3, 5)] {
            let img = GrayImage::from_pixels(Array2::from_shape_fn(shape, |(r, c)| (r * 7 + c) as u8));
            let p = d.path().join("a.pgm");
            write_pgm(&p, &img).unwrap();
            assert_eq!(read_pgm(&p).unwrap().pixels, img.pixels);
        }
    }

    #[test]
    fn pgm_header_with_comment() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x01\x02";
        let img = decode_pgm(bytes, Path::new("x")).unwrap();
        assert_eq!(img.pixels.as_slice().unwrap(), &[1, 2]);
    }

    #[test]
    fn tensor_header_layout() {
        let t = Tensor::new(vec![2, 3], TensorData::F32(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        let b = t.encode();
        assert_eq!(&b[..4], b"RDT1");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(b[6], 0);
        assert_eq!(b[7], 2);
        assert_eq!(&b[8..16], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&b[20..24], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 16 + 24 + 4);
    }

    #[test]
    fn tensor_round_trip_complex() {
        let d = tmp();
        let p = d.path().join("c.rdt");
        let data: Vec<Complex32> = (0..24).map(|i| Complex32::new(i as f32, -(i as f32) * 0.5)).collect();
        let t = Tensor::new(vec![2, 3, 4], TensorData::C64(data)).unwrap();
        write_tensor(&p, &t).unwrap();
        assert_eq!(read_tensor(&p).unwrap(), t);
    }

    #[test]
    fn tensor_error_kinds() {
        let t = Tensor::new(vec![4], TensorData::F32(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let good = t.encode();
        let p = Path::new("t.rdt");

        let mut flipped = good.clone();
        flipped[14] ^= 0x40;
        assert!(matches!(Tensor::decode(&flipped, p), Err(Error::Corrupt { .. })));

        assert!(matches!(
            Tensor::decode(&good[..good.len() - 3], p),
            Err(Error::Truncated { .. })
        ));

        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(
            Tensor::decode(&v2, p),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));

        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(matches!(Tensor::decode(&magic, p), Err(Error::Corrupt { .. })));

        assert!(Tensor::new(vec![], TensorData::F32(vec![])).is_err());
        assert!(Tensor::new(vec![1, 1, 1, 1, 1], TensorData::F32(vec![0.0])).is_err());
        assert!(Tensor::new(vec![2, 2], TensorData::F32(vec![0.0])).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let d = tmp();
        let p = d.path().join("f.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 1);
    }

    #[test]
    fn sidecar_round_trip() {
        let d = tmp();
        let art = d.path().join("ra.rdt");
        let meta = SidecarMeta::new(
            "build_ra_frames",
            serde_json::json!({"loading_factor": 1e-3}),
            vec![7],
            vec![AxisDescriptor::index("frame"), AxisDescriptor::with_values("angle", "deg", vec![-1.0, 0.0, 1.0])],
        );
        write_sidecar(&art, &meta).unwrap();
        let back: SidecarMeta = read_json(&sidecar_path(&art)).unwrap();
        assert_eq!(back, meta);
        assert!(sidecar_path(&art).ends_with("ra.rdt.json"));
    }
}
