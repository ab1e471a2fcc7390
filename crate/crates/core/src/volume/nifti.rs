//! Strict NIfTI-1 single-file subset (`.nii`, `.nii.gz`).
//!
//! Supported: little-endian, `n+1` magic, 3D data (trailing dimensions of
//! size 1 are accepted), datatypes uint8, int16, float32 and float64, no
//! header extensions. Anything else is rejected with an explicit error.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::{BinaryMask, Geometry, Volume};
use crate::{Error, Result};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;

mod offsets {
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

/// On-disk voxel type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Uint8,
    Int16,
    Float32,
    Float64,
}

impl DataType {
    pub fn code(self) -> i16 {
        match self {
            Self::Uint8 => 2,
            Self::Int16 => 4,
            Self::Float32 => 16,
            Self::Float64 => 64,
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Self::Uint8 => 1,
            Self::Int16 => 2,
            Self::Float32 => 4,
            Self::Float64 => 8,
        }
    }

    fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Self::Uint8,
            4 => Self::Int16,
            16 => Self::Float32,
            64 => Self::Float64,
            other => {
                let name = match other {
                    1 => "binary",
                    8 => "int32",
                    32 => "complex64",
                    128 => "rgb24",
                    256 => "int8",
                    512 => "uint16",
                    768 => "uint32",
                    1024 => "int64",
                    1280 => "uint64",
                    1536 => "float128",
                    1792 => "complex128",
                    2304 => "rgba32",
                    _ => "unknown",
                };
                return Err(Error::UnsupportedFormat(format!(
                    "datatype {name} (code {other}) is not supported; expected uint8, int16, float32 or float64"
                )));
            }
        })
    }
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

fn wants_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn read_file_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if !is_gzip(&raw) {
        return Ok(raw);
    }
    let mut out = Vec::new();
    MultiGzDecoder::new(raw.as_slice())
        .read_to_end(&mut out)
        .map_err(|e| Error::CorruptFile(format!("{}: gzip stream: {e}", path.display())))?;
    Ok(out)
}

/// Reads a NIfTI-1 volume, applying `scl_slope` / `scl_inter`.
pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = read_file_bytes(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::CorruptFile(msg) => Error::CorruptFile(format!("{}: {msg}", path.display())),
        Error::UnsupportedFormat(msg) => {
            Error::UnsupportedFormat(format!("{}: {msg}", path.display()))
        }
        other => other,
    })
}

/// Reads a mask; any non-zero voxel is foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let v = load_volume(path)?;
    let data = v.data().iter().map(|&x| x != 0.0).collect();
    BinaryMask::new(v.geometry().clone(), data)
}

/// Writes a volume; the file is gzip-compressed when the path ends in `.gz`.
pub fn save_volume(volume: &Volume, path: impl AsRef<Path>, datatype: DataType) -> Result<()> {
    let bytes = encode(volume, datatype)?;
    write_bytes(path.as_ref(), &bytes)
}

/// Writes a mask as uint8 with voxels in {0, 1}.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save_volume(&mask.to_volume(), path, DataType::Uint8)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if wants_gzip(path) {
        // The default gzip header carries no timestamp, so output is reproducible.
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?.flush()?;
    } else {
        let mut file = file;
        file.write_all(bytes)?;
        file.flush()?;
    }
    Ok(())
}

/// Decodes an uncompressed NIfTI-1 byte stream.
pub fn decode(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::CorruptFile(format!(
            "{} bytes is shorter than the {HEADER_SIZE}-byte header",
            bytes.len()
        )));
    }
    let le = LittleEndian::read_i32(&bytes[0..4]);
    if le != HEADER_SIZE as i32 {
        if byteorder::BigEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
            return Err(Error::UnsupportedFormat(
                "big-endian NIfTI files are not supported".into(),
            ));
        }
        if le == 540 {
            return Err(Error::UnsupportedFormat("NIfTI-2 is not supported".into()));
        }
        return Err(Error::UnsupportedFormat(format!(
            "sizeof_hdr is {le}, not a NIfTI-1 header"
        )));
    }
    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    if magic == b"ni1\0" {
        return Err(Error::UnsupportedFormat(
            "two-file (.hdr/.img) NIfTI is not supported".into(),
        ));
    }
    if magic != b"n+1\0" {
        return Err(Error::UnsupportedFormat(format!("bad magic {magic:?}")));
    }

    let i16_at = |o: usize| LittleEndian::read_i16(&bytes[o..o + 2]);
    let f32_at = |o: usize| LittleEndian::read_f32(&bytes[o..o + 4]) as f64;

    let ndim = i16_at(offsets::DIM);
    if !(1..=7).contains(&ndim) {
        return Err(Error::CorruptFile(format!("dim[0] = {ndim} outside 1..=7")));
    }
    let mut dims = [1usize; 3];
    for d in 1..=ndim as usize {
        let n = i16_at(offsets::DIM + 2 * d);
        if n < 1 {
            return Err(Error::CorruptFile(format!("dim[{d}] = {n} is not positive")));
        }
        if d <= 3 {
            dims[d - 1] = n as usize;
        } else if n != 1 {
            return Err(Error::UnsupportedFormat(format!(
                "dim[{d}] = {n}: only 3D volumes are supported"
            )));
        }
    }

    let datatype = DataType::from_code(i16_at(offsets::DATATYPE))?;
    let bitpix = i16_at(offsets::BITPIX);
    if bitpix as usize != datatype.bytes() * 8 {
        return Err(Error::CorruptFile(format!(
            "bitpix {bitpix} inconsistent with datatype {datatype:?}"
        )));
    }

    let pixdim: Vec<f64> = (0..8).map(|i| f32_at(offsets::PIXDIM + 4 * i)).collect();
    let mut spacing = [1.0; 3];
    for a in 0..3 {
        if a < ndim as usize {
            spacing[a] = pixdim[a + 1].abs();
        }
        if !(spacing[a] > 0.0 && spacing[a].is_finite()) {
            return Err(Error::CorruptFile(format!(
                "pixdim[{}] = {} is not a positive spacing",
                a + 1,
                pixdim[a + 1]
            )));
        }
    }

    let vox_offset = f32_at(offsets::VOX_OFFSET);
    if vox_offset.is_nan() || vox_offset < DATA_OFFSET as f64 || vox_offset.fract() != 0.0 {
        return Err(Error::CorruptFile(format!("vox_offset {vox_offset} is invalid")));
    }
    let vox_offset = vox_offset as usize;
    if bytes.len() >= DATA_OFFSET && bytes[HEADER_SIZE] != 0 {
        return Err(Error::UnsupportedFormat("header extensions are not supported".into()));
    }

    let sform_code = i16_at(offsets::SFORM_CODE);
    let qform_code = i16_at(offsets::QFORM_CODE);
    let affine = if sform_code > 0 {
        let mut a = [[0.0; 4]; 4];
        for (r, row) in a.iter_mut().take(3).enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f32_at(offsets::SROW_X + 16 * r + 4 * c);
            }
        }
        a[3][3] = 1.0;
        a
    } else if qform_code > 0 {
        let quat = [
            f32_at(offsets::QUATERN_B),
            f32_at(offsets::QUATERN_B + 4),
            f32_at(offsets::QUATERN_B + 8),
        ];
        let offset = [
            f32_at(offsets::QOFFSET_X),
            f32_at(offsets::QOFFSET_X + 4),
            f32_at(offsets::QOFFSET_X + 8),
        ];
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        quaternion_affine(quat, offset, spacing, qfac)
    } else {
        let mut a = [[0.0; 4]; 4];
        for (i, s) in spacing.iter().enumerate() {
            a[i][i] = *s;
        }
        a[3][3] = 1.0;
        a
    };
    let geometry = Geometry::new(dims, spacing, affine)?;

    let n = geometry.len();
    let needed = vox_offset + n * datatype.bytes();
    if bytes.len() < needed {
        return Err(Error::CorruptFile(format!(
            "truncated data: need {needed} bytes, have {}",
            bytes.len()
        )));
    }
    let raw = &bytes[vox_offset..needed];
    let mut data: Vec<f64> = match datatype {
        DataType::Uint8 => raw.iter().map(|&b| b as f64).collect(),
        DataType::Int16 => raw.chunks_exact(2).map(|c| LittleEndian::read_i16(c) as f64).collect(),
        DataType::Float32 => raw.chunks_exact(4).map(|c| LittleEndian::read_f32(c) as f64).collect(),
        DataType::Float64 => raw.chunks_exact(8).map(LittleEndian::read_f64).collect(),
    };

    let slope = f32_at(offsets::SCL_SLOPE);
    let inter = f32_at(offsets::SCL_INTER);
    // slope 0 (or non-finite) means "no scaling".
    if slope != 0.0 && slope.is_finite() && inter.is_finite() && (slope != 1.0 || inter != 0.0) {
        for v in &mut data {
            *v = *v * slope + inter;
        }
    }
    Volume::new(geometry, data)
}

/// Voxel-to-world matrix from the quaternion representation.
fn quaternion_affine(q: [f64; 3], offset: [f64; 3], spacing: [f64; 3], qfac: f64) -> [[f64; 4]; 4] {
    let [b, c, d] = q;
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let r = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ];
    let scale = [spacing[0], spacing[1], spacing[2] * qfac];
    let mut out = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = r[i][j] * scale[j];
        }
        out[i][3] = offset[i];
    }
    out[3][3] = 1.0;
    out
}

/// Encodes a volume as an uncompressed NIfTI-1 byte stream.
pub fn encode(volume: &Volume, datatype: DataType) -> Result<Vec<u8>> {
    let geometry = volume.geometry();
    let dims = geometry.dims();
    if dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::UnsupportedFormat(format!(
            "dims {dims:?} exceed the NIfTI-1 limit of {}",
            i16::MAX
        )));
    }
    let n = geometry.len();
    let mut out = vec![0u8; DATA_OFFSET + n * datatype.bytes()];
    let h = &mut out[..DATA_OFFSET];
    LittleEndian::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    let mut dim = [1i16; 8];
    dim[0] = 3;
    for a in 0..3 {
        dim[a + 1] = dims[a] as i16;
    }
    for (i, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut h[offsets::DIM + 2 * i..], *d);
    }
    LittleEndian::write_i16(&mut h[offsets::DATATYPE..], datatype.code());
    LittleEndian::write_i16(&mut h[offsets::BITPIX..], (datatype.bytes() * 8) as i16);
    let spacing = geometry.spacing();
    let mut pixdim = [1.0f32; 8];
    for a in 0..3 {
        pixdim[a + 1] = spacing[a] as f32;
    }
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[offsets::PIXDIM + 4 * i..], *p);
    }
    LittleEndian::write_f32(&mut h[offsets::VOX_OFFSET..], DATA_OFFSET as f32);
    LittleEndian::write_f32(&mut h[offsets::SCL_SLOPE..], 1.0);
    LittleEndian::write_f32(&mut h[offsets::SCL_INTER..], 0.0);
    h[offsets::XYZT_UNITS] = 2; // mm
    let descrip = b"lesionforge";
    h[offsets::DESCRIP..offsets::DESCRIP + descrip.len()].copy_from_slice(descrip);
    LittleEndian::write_i16(&mut h[offsets::QFORM_CODE..], 0);
    LittleEndian::write_i16(&mut h[offsets::SFORM_CODE..], 2);
    let affine = geometry.affine();
    for r in 0..3 {
        for c in 0..4 {
            LittleEndian::write_f32(&mut h[offsets::SROW_X + 16 * r + 4 * c..], affine[r][c] as f32);
        }
    }
    h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");

    let body = &mut out[DATA_OFFSET..];
    let values = volume.data();
    match datatype {
        DataType::Float64 => {
            for (chunk, &v) in body.chunks_exact_mut(8).zip(values) {
                LittleEndian::write_f64(chunk, v);
            }
        }
        DataType::Float32 => {
            for (chunk, &v) in body.chunks_exact_mut(4).zip(values) {
                LittleEndian::write_f32(chunk, v as f32);
            }
        }
        DataType::Int16 => {
            for (chunk, &v) in body.chunks_exact_mut(2).zip(values) {
                LittleEndian::write_i16(chunk, narrow(v, i16::MIN as f64, i16::MAX as f64)? as i16);
            }
        }
        DataType::Uint8 => {
            for (byte, &v) in body.iter_mut().zip(values) {
                *byte = narrow(v, 0.0, u8::MAX as f64)? as u8;
            }
        }
    }
    Ok(out)
}

/// Rounds half away from zero and saturates to `[lo, hi]`.
fn narrow(v: f64, lo: f64, hi: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::Parameter(format!(
            "cannot store non-finite value {v} as an integer datatype"
        )));
    }
    Ok(v.round().clamp(lo, hi))
}
