//! Slice windows for classifier input: the central-image baseline and the
//! tumor-centered selection.

use crate::volume::{Mask3D, Volume3D, VolumeError};
use std::ops::Range;
use thiserror::Error;

pub const DEFAULT_WINDOW: usize = 64;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("no voxel above threshold")]
    EmptyVolume,
    #[error("mask is empty")]
    EmptyMask,
    #[error("window of {n} slices does not fit in {total}")]
    WindowTooLarge { n: usize, total: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub type Result<T> = std::result::Result<T, SelectionError>;

/// First index of the maximum, or `None` when every entry is zero.
fn argmax_first(counts: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

/// Supra-threshold voxel count of every slice.
pub fn slice_foreground_counts(vol: &Volume3D, threshold: f32) -> Vec<usize> {
    vol.data().outer_iter().map(|s| s.iter().filter(|&&v| v > threshold).count()).collect()
}

/// Slice with the largest cross-section (most voxels above `threshold`);
/// ties go to the smallest index.
pub fn central_image_index(vol: &Volume3D, threshold: f32) -> Result<usize> {
    argmax_first(&slice_foreground_counts(vol, threshold)).ok_or(SelectionError::EmptyVolume)
}

/// Slice with the largest tumor area; ties go to the smallest index.
pub fn tumor_center_index(mask: &Mask3D) -> Result<usize> {
    argmax_first(&mask.slice_areas()).ok_or(SelectionError::EmptyMask)
}

/// `n` contiguous indices starting at `clamp(center − n/2, 0, total − n)`.
pub fn select_window(center: usize, n: usize, total: usize) -> Result<Range<usize>> {
    if n > total || n == 0 {
        return Err(SelectionError::WindowTooLarge { n, total });
    }
    let start = center.saturating_sub(n / 2).min(total - n);
    Ok(start..start + n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub volume: Volume3D,
    pub center: usize,
    pub range: Range<usize>,
}

fn take_slices(vol: &Volume3D, range: Range<usize>) -> Result<Volume3D> {
    let data = vol.data().slice(ndarray::s![range, .., ..]).to_owned();
    Ok(Volume3D::new(data, vol.spacing(), vol.orientation(), vol.modality())?)
}

/// Window of `n` slices centered on the largest tumor cross-section.
pub fn enhanced_selection(vol: &Volume3D, mask: &Mask3D, n: usize) -> Result<Selection> {
    if vol.shape() != mask.shape() {
        return Err(SelectionError::ShapeMismatch(vol.shape(), mask.shape()));
    }
    let center = tumor_center_index(mask)?;
    let range = select_window(center, n, vol.n_slices())?;
    Ok(Selection { volume: take_slices(vol, range.clone())?, center, range })
}

/// Baseline: window of `n` slices centered on the largest foreground slice.
pub fn central_selection(vol: &Volume3D, threshold: f32, n: usize) -> Result<Selection> {
    let center = central_image_index(vol, threshold)?;
    let range = select_window(center, n, vol.n_slices())?;
    Ok(Selection { volume: take_slices(vol, range.clone())?, center, range })
}
