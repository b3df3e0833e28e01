//! Single-file little-endian NIfTI-1 reader and writer.
//!
//! Axis mapping: NIfTI `i` (fastest) is our column axis, `j` the row axis and
//! `k` the slice axis, so a C-order `(s, r, c)` buffer is already in file
//! order. `pixdim[1..=3]` hold `(col, row, slice)` spacing.
//!
//! Orientation and modality are not representable in the NIfTI-1 fields we
//! support, so the writer stores them in `descrip` as
//! `volnorm orient=<Orientation> modality=<label>`. Files without that tag
//! read back as `Axial` / `"synthetic"`.

use super::{Mask3D, Orientation, Result, Volume3D, VolumeError};
use ndarray::Array3;
use std::path::Path;

pub const NIFTI_HEADER_SIZE: usize = 348;
pub const NIFTI_VOX_OFFSET: usize = 352;

const DIM: usize = 40;
const DATATYPE: usize = 70;
const BITPIX: usize = 72;
const PIXDIM: usize = 76;
const VOX_OFFSET: usize = 108;
const SCL_SLOPE: usize = 112;
const SCL_INTER: usize = 116;
const XYZT_UNITS: usize = 123;
const DESCRIP: usize = 148;
const MAGIC: usize = 344;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

const NIFTI_UNITS_MM: u8 = 2;

fn i16_at(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn i32_at(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn parse_descrip(b: &[u8]) -> (Orientation, String) {
    let raw = &b[DESCRIP..DESCRIP + 80];
    let end = raw.iter().position(|&c| c == 0).unwrap_or(raw.len());
    let text = String::from_utf8_lossy(&raw[..end]);
    let mut orientation = Orientation::Axial;
    let mut modality = "synthetic".to_string();
    if let Some(rest) = text.strip_prefix("volnorm ") {
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("orient", v)) => {
                    if let Ok(o) = v.parse() {
                        orientation = o;
                    }
                }
                Some(("modality", v)) => modality = v.to_string(),
                _ => {}
            }
        }
    }
    (orientation, modality)
}

/// Decode an in-memory NIfTI-1 file.
pub fn read_nifti_bytes(bytes: &[u8]) -> Result<Volume3D> {
    if bytes.len() < NIFTI_HEADER_SIZE {
        return Err(VolumeError::MalformedHeader(format!("file is {} bytes, shorter than a header", bytes.len())));
    }
    let sizeof_hdr = i32_at(bytes, 0);
    if sizeof_hdr != NIFTI_HEADER_SIZE as i32 {
        return Err(VolumeError::MalformedHeader(format!("sizeof_hdr is {sizeof_hdr}, expected 348 (little-endian)")));
    }
    let magic = &bytes[MAGIC..MAGIC + 4];
    if magic != b"n+1\0" {
        return Err(VolumeError::MalformedHeader(format!("magic {magic:?} is not single-file NIfTI-1")));
    }
    let ndim = i16_at(bytes, DIM);
    if !(3..=7).contains(&ndim) {
        return Err(VolumeError::MalformedHeader(format!("dim[0] = {ndim}, expected a 3D volume")));
    }
    let mut dims = [0usize; 7];
    for (i, d) in dims.iter_mut().enumerate() {
        let v = i16_at(bytes, DIM + 2 * (i + 1));
        *d = if (i as i16) < ndim { v.max(0) as usize } else { 1 };
    }
    if dims[3..].iter().any(|&d| d != 1) {
        return Err(VolumeError::MalformedHeader(format!("non-singleton dimensions beyond 3: {dims:?}")));
    }
    let (nc, nr, ns) = (dims[0], dims[1], dims[2]);
    if nc == 0 || nr == 0 || ns == 0 {
        return Err(VolumeError::MalformedHeader(format!("zero-sized dimension {dims:?}")));
    }
    let datatype = i16_at(bytes, DATATYPE);
    let width = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        other => return Err(VolumeError::UnsupportedDatatype(other)),
    };
    let spacing = [f32_at(bytes, PIXDIM + 12), f32_at(bytes, PIXDIM + 8), f32_at(bytes, PIXDIM + 4)];
    let vox_offset = f32_at(bytes, VOX_OFFSET);
    if !(vox_offset.is_finite() && vox_offset >= NIFTI_HEADER_SIZE as f32) {
        return Err(VolumeError::MalformedHeader(format!("vox_offset {vox_offset} precedes the header end")));
    }
    let start = vox_offset as usize;
    let n = nc * nr * ns;
    let expected = n * width;
    let available = bytes.len().saturating_sub(start);
    if available < expected {
        return Err(VolumeError::TruncatedData { expected, found: available });
    }
    let payload = &bytes[start..start + expected];
    let slope = f32_at(bytes, SCL_SLOPE);
    let inter = f32_at(bytes, SCL_INTER);
    // slope == 0 means "no scaling" in NIfTI-1
    let scaled = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);
    let apply = |raw: f32| if scaled { raw * slope + inter } else { raw };
    let values: Vec<f32> = match datatype {
        DT_UINT8 => payload.iter().map(|&b| apply(b as f32)).collect(),
        DT_INT16 => payload.chunks_exact(2).map(|c| apply(i16::from_le_bytes([c[0], c[1]]) as f32)).collect(),
        _ => payload.chunks_exact(4).map(|c| apply(f32::from_le_bytes(c.try_into().unwrap()))).collect(),
    };
    let data = Array3::from_shape_vec((ns, nr, nc), values).expect("length checked above");
    let (orientation, modality) = parse_descrip(bytes);
    Volume3D::new(data, spacing, orientation, modality)
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    let bytes = std::fs::read(path)?;
    read_nifti_bytes(&bytes)
}

fn header(shape: [usize; 3], spacing: [f32; 3], datatype: i16, bitpix: i16, descrip: &str) -> Result<Vec<u8>> {
    let mut h = vec![0u8; NIFTI_VOX_OFFSET];
    h[0..4].copy_from_slice(&(NIFTI_HEADER_SIZE as i32).to_le_bytes());
    let put_i16 = |h: &mut Vec<u8>, off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    let dims = [3, shape[2], shape[1], shape[0], 1, 1, 1, 1];
    for (i, &d) in dims.iter().enumerate() {
        let d = i16::try_from(d)
            .map_err(|_| VolumeError::InvalidVolume(format!("dimension {d} exceeds the NIfTI-1 limit")))?;
        put_i16(&mut h, DIM + 2 * i, d);
    }
    put_i16(&mut h, DATATYPE, datatype);
    put_i16(&mut h, BITPIX, bitpix);
    let pixdim = [1.0, spacing[2], spacing[1], spacing[0], 1.0, 1.0, 1.0, 1.0];
    for (i, &p) in pixdim.iter().enumerate() {
        put_f32(&mut h, PIXDIM + 4 * i, p);
    }
    put_f32(&mut h, VOX_OFFSET, NIFTI_VOX_OFFSET as f32);
    put_f32(&mut h, SCL_SLOPE, 1.0);
    put_f32(&mut h, SCL_INTER, 0.0);
    h[XYZT_UNITS] = NIFTI_UNITS_MM;
    let d = descrip.as_bytes();
    let n = d.len().min(79);
    h[DESCRIP..DESCRIP + n].copy_from_slice(&d[..n]);
    h[MAGIC..MAGIC + 4].copy_from_slice(b"n+1\0");
    Ok(h)
}

/// Encode a volume as a float32 NIfTI-1 file.
pub fn nifti_bytes(vol: &Volume3D) -> Result<Vec<u8>> {
    let descrip = format!("volnorm orient={} modality={}", vol.orientation(), vol.modality());
    let mut out = header(vol.shape(), vol.spacing(), DT_FLOAT32, 32, &descrip)?;
    out.reserve(vol.data().len() * 4);
    for v in vol.data().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn write_nifti(vol: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, nifti_bytes(vol)?)?;
    Ok(())
}

/// Encode a mask as a uint8 NIfTI-1 file.
pub fn nifti_mask_bytes(mask: &Mask3D, orientation: Orientation) -> Result<Vec<u8>> {
    let descrip = format!("volnorm orient={orientation} modality=mask");
    let mut out = header(mask.shape(), mask.spacing(), DT_UINT8, 8, &descrip)?;
    out.extend(mask.data().iter().copied());
    Ok(out)
}

pub fn write_nifti_mask(mask: &Mask3D, orientation: Orientation, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, nifti_mask_bytes(mask, orientation)?)?;
    Ok(())
}
