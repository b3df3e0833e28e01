//! 3D volumes, masks and the operations that only move voxels around.
//!
//! Volumes are indexed `(s, r, c)`: `s` is the slice axis in the volume's
//! current orientation, `r` and `c` are in-plane rows and columns.
//!
//! # Orientation permutation table
//!
//! Every orientation change is a pure axis permutation routed through
//! coronal:
//!
//! | from → to          | permutation                    |
//! |--------------------|--------------------------------|
//! | Axial ↔ Coronal    | swap slice and row axes        |
//! | Sagittal ↔ Coronal | swap slice and column axes     |
//! | Axial ↔ Sagittal   | through Coronal (both swaps)   |
//!
//! Spacing components permute together with their axes.

mod nifti;
mod phantom;

pub use nifti::{
    nifti_bytes, nifti_mask_bytes, read_nifti, read_nifti_bytes, write_nifti, write_nifti_mask, NIFTI_HEADER_SIZE, NIFTI_VOX_OFFSET,
};
pub use phantom::{
    make_phantom, phantom_subject, subject_seed, Blob, Phantom, PhantomConfig, PhantomField, PhantomSubject, SUBJECT_MODALITIES,
};

use ndarray::{Array2, Array3, ArrayView2, Axis};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("no voxel exceeds the threshold")]
    EmptyVolume,
    #[error("cannot select {target} slices from {n}")]
    InsufficientSlices { n: usize, target: usize },
    #[error("malformed NIfTI header: {0}")]
    MalformedHeader(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("truncated voxel data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("invalid phantom config: {0}")]
    InvalidConfig(String),
    #[error("volume is constant; cannot rescale")]
    ConstantVolume,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VolumeError>;

/// Anatomical plane indexed by a volume's slice axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Axial,
    Sagittal,
    Coronal,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::Axial, Orientation::Sagittal, Orientation::Coronal];

    /// Axis permutation taking this orientation to coronal. Each entry is an
    /// involution, so the same table takes coronal back to this orientation.
    fn coronal_swap(self) -> [usize; 3] {
        match self {
            Orientation::Axial => [1, 0, 2],
            Orientation::Sagittal => [2, 1, 0],
            Orientation::Coronal => [0, 1, 2],
        }
    }

    /// Permutation `p` such that new axis `i` is old axis `p[i]`.
    pub fn permutation_to(self, target: Orientation) -> [usize; 3] {
        let to_cor = self.coronal_swap();
        let from_cor = target.coronal_swap();
        [to_cor[from_cor[0]], to_cor[from_cor[1]], to_cor[from_cor[2]]]
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Orientation::Axial => "Axial",
            Orientation::Sagittal => "Sagittal",
            Orientation::Coronal => "Coronal",
        };
        f.write_str(s)
    }
}

impl FromStr for Orientation {
    type Err = VolumeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "axial" => Ok(Orientation::Axial),
            "sagittal" => Ok(Orientation::Sagittal),
            "coronal" => Ok(Orientation::Coronal),
            other => Err(VolumeError::InvalidVolume(format!("unknown orientation {other:?}"))),
        }
    }
}

/// A validated 3D scalar volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    data: Array3<f32>,
    spacing: [f32; 3],
    orientation: Orientation,
    modality: String,
}

impl Volume3D {
    pub fn new(
        data: Array3<f32>,
        spacing: [f32; 3],
        orientation: Orientation,
        modality: impl Into<String>,
    ) -> Result<Self> {
        if data.shape().iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidVolume(format!("zero-sized dimension in {:?}", data.shape())));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(VolumeError::InvalidVolume(format!("spacing must be positive, got {spacing:?}")));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(VolumeError::InvalidVolume(format!("voxel value {v} is not a finite non-negative number")));
        }
        let data = if data.is_standard_layout() { data } else { data.as_standard_layout().to_owned() };
        Ok(Volume3D { data, spacing, orientation, modality: modality.into() })
    }

    /// Volume with unit spacing, tagged synthetic.
    pub fn from_array(data: Array3<f32>, orientation: Orientation) -> Result<Self> {
        Self::new(data, [1.0; 3], orientation, "synthetic")
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f32> {
        self.data
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    pub fn n_slices(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn modality(&self) -> &str {
        &self.modality
    }

    pub fn slice(&self, s: usize) -> ArrayView2<'_, f32> {
        self.data.index_axis(Axis(0), s)
    }

    pub fn slices(&self) -> Vec<Array2<f32>> {
        self.data.outer_iter().map(|s| s.to_owned()).collect()
    }

    /// Stack 2D slices along a new slice axis, keeping this volume's metadata
    /// except for slice spacing.
    pub fn with_slices(&self, slices: &[Array2<f32>], slice_spacing: f32) -> Result<Self> {
        let stacked = stack_slices(slices)?;
        let mut spacing = self.spacing;
        spacing[0] = slice_spacing;
        Volume3D::new(stacked, spacing, self.orientation, self.modality.clone())
    }

    pub fn with_modality(mut self, modality: impl Into<String>) -> Self {
        self.modality = modality.into();
        self
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

pub(crate) fn stack_slices(slices: &[Array2<f32>]) -> Result<Array3<f32>> {
    let first = slices.first().ok_or_else(|| VolumeError::InvalidVolume("no slices".into()))?;
    let (rows, cols) = first.dim();
    let mut out = Array3::<f32>::zeros((slices.len(), rows, cols));
    for (i, s) in slices.iter().enumerate() {
        if s.dim() != (rows, cols) {
            return Err(VolumeError::ShapeMismatch([1, rows, cols], [1, s.dim().0, s.dim().1]));
        }
        out.index_axis_mut(Axis(0), i).assign(s);
    }
    Ok(out)
}

/// Binary mask paired with a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask3D {
    data: Array3<u8>,
    spacing: [f32; 3],
}

impl Mask3D {
    pub fn new(data: Array3<u8>, spacing: [f32; 3]) -> Result<Self> {
        if data.iter().any(|&v| v > 1) {
            return Err(VolumeError::InvalidVolume("mask values must be 0 or 1".into()));
        }
        if data.shape().iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidVolume(format!("zero-sized dimension in {:?}", data.shape())));
        }
        let data = if data.is_standard_layout() { data } else { data.as_standard_layout().to_owned() };
        Ok(Mask3D { data, spacing })
    }

    pub fn from_bools(data: &Array3<bool>, spacing: [f32; 3]) -> Self {
        Mask3D { data: data.mapv(u8::from), spacing }
    }

    pub fn zeros(shape: [usize; 3], spacing: [f32; 3]) -> Self {
        Mask3D { data: Array3::zeros(shape), spacing }
    }

    pub fn data(&self) -> &Array3<u8> {
        &self.data
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn get(&self, idx: [usize; 3]) -> bool {
        self.data[idx] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Tumor area per slice along the slice axis.
    pub fn slice_areas(&self) -> Vec<usize> {
        self.data.outer_iter().map(|s| s.iter().filter(|&&v| v != 0).count()).collect()
    }

    pub fn check_pair(&self, vol: &Volume3D) -> Result<()> {
        if self.shape() != vol.shape() {
            return Err(VolumeError::ShapeMismatch(self.shape(), vol.shape()));
        }
        Ok(())
    }

    /// Reorient as if the mask were in orientation `from`.
    pub fn reorient(&self, from: Orientation, target: Orientation) -> Mask3D {
        let p = from.permutation_to(target);
        Mask3D {
            data: self.data.clone().permuted_axes(p).as_standard_layout().to_owned(),
            spacing: [self.spacing[p[0]], self.spacing[p[1]], self.spacing[p[2]]],
        }
    }
}

/// Pure axis permutation to `target` (see the module-level table).
pub fn reorient(vol: &Volume3D, target: Orientation) -> Volume3D {
    let p = vol.orientation.permutation_to(target);
    let data = vol.data.clone().permuted_axes(p).as_standard_layout().to_owned();
    Volume3D {
        data,
        spacing: [vol.spacing[p[0]], vol.spacing[p[1]], vol.spacing[p[2]]],
        orientation: target,
        modality: vol.modality.clone(),
    }
}

/// Minimal axis-aligned box holding every voxel `> threshold`; returns the
/// cropped volume and the offset of its origin.
pub fn crop_to_bounding_box(vol: &Volume3D, threshold: f32) -> Result<(Volume3D, [usize; 3])> {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for ((s, r, c), &v) in vol.data.indexed_iter() {
        if v > threshold {
            any = true;
            for (axis, i) in [s, r, c].into_iter().enumerate() {
                lo[axis] = lo[axis].min(i);
                hi[axis] = hi[axis].max(i);
            }
        }
    }
    if !any {
        return Err(VolumeError::EmptyVolume);
    }
    let cropped = vol
        .data
        .slice(ndarray::s![lo[0]..=hi[0], lo[1]..=hi[1], lo[2]..=hi[2]])
        .to_owned();
    let out = Volume3D { data: cropped, spacing: vol.spacing, orientation: vol.orientation, modality: vol.modality.clone() };
    Ok((out, lo))
}

/// `target` evenly spread indices into `0..n`: `round(i·(n−1)/(target−1))`
/// with halves rounded up, so both endpoints are always included.
pub fn uniform_select(n: usize, target: usize) -> Result<Vec<usize>> {
    if target < 2 {
        return Err(VolumeError::InvalidConfig(format!("uniform_select needs target >= 2, got {target}")));
    }
    if n < target {
        return Err(VolumeError::InsufficientSlices { n, target });
    }
    let num = n - 1;
    let den = target - 1;
    // floor(i·num/den + 1/2) in exact integer arithmetic
    Ok((0..target).map(|i| (2 * i * num + den) / (2 * den)).collect())
}

/// Linear map of `[min, max]` onto `[0, 255]`.
pub fn scale_to_u8(vol: &Volume3D) -> Result<Volume3D> {
    let (lo, hi) = vol.min_max();
    if hi <= lo {
        return Err(VolumeError::ConstantVolume);
    }
    let (lo, range) = (lo as f64, (hi - lo) as f64);
    let data = vol.data.mapv(|v| ((v as f64 - lo) / range * 255.0) as f32);
    Ok(Volume3D { data, spacing: vol.spacing, orientation: vol.orientation, modality: vol.modality.clone() })
}

/// Nearest-neighbor resize of a 2D slice. Source index is
/// `floor((i + 0.5)·src/dst)`, which is the identity when sizes match.
pub fn resize_nearest_2d(img: &ArrayView2<'_, f32>, rows: usize, cols: usize) -> Array2<f32> {
    let (sr, sc) = img.dim();
    if (sr, sc) == (rows, cols) {
        return img.to_owned();
    }
    let ri: Vec<usize> = (0..rows).map(|i| nearest_index(i, sr, rows)).collect();
    let ci: Vec<usize> = (0..cols).map(|j| nearest_index(j, sc, cols)).collect();
    Array2::from_shape_fn((rows, cols), |(i, j)| img[[ri[i], ci[j]]])
}

pub(crate) fn nearest_index(i: usize, src: usize, dst: usize) -> usize {
    (((2 * i + 1) * src) / (2 * dst)).min(src - 1)
}

/// Nearest-neighbor resize of all three axes.
pub fn resize_nearest_3d<T: Copy>(data: &Array3<T>, shape: [usize; 3]) -> Array3<T> {
    let d = data.shape();
    if d == shape {
        return data.clone();
    }
    let idx: Vec<Vec<usize>> =
        (0..3).map(|a| (0..shape[a]).map(|i| nearest_index(i, d[a], shape[a])).collect()).collect();
    Array3::from_shape_fn(shape, |(s, r, c)| data[[idx[0][s], idx[1][r], idx[2][c]]])
}
