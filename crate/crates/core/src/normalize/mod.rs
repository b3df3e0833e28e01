//! Slice-count normalization.
//!
//! A scan with `n` slices is densified by repeated interleaving rounds
//! (`n → 2n − 1`) in its native orientation until it has at least `target`
//! slices, thinned back to exactly `target` with [`uniform_select`],
//! reoriented to coronal and resized to `target³`.

mod cache;
mod compare;
mod impute;

pub use cache::{
    cached_array3, parse_volcache, read_volcache, read_volcache3, volcache_bytes, write_atomic, write_volcache, CacheStatus, VOLCACHE_MAGIC,
    VOLCACHE_VERSION,
};
pub use compare::{mae_0_255, paired_comparison, PairedComparison};
pub use impute::{
    copy_impute_round, impute_round, isgen_impute_round, rounds_needed, slice_count_after, CopyImputer, GeneratorBank,
    IsGenImputer, MeanImputer, SliceImputer,
};

use crate::isgen::IsGenError;
use crate::volume::{reorient, resize_nearest_3d, uniform_select, Mask3D, Orientation, Volume3D, VolumeError};
use thiserror::Error;

pub const DEFAULT_TARGET: usize = 128;

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("need at least 2 slices, got {0}")]
    TooFewSlices(usize),
    #[error("no generator loaded for modality {0:?}")]
    ModelMissing(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("malformed cache file: {0}")]
    MalformedCache(String),
    #[error(transparent)]
    Model(#[from] IsGenError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NormalizeError>;

fn check_inputs(vol: &Volume3D, target: usize) -> Result<()> {
    let n = vol.n_slices();
    if n < 2 {
        return Err(NormalizeError::TooFewSlices(n));
    }
    if target < 2 {
        return Err(VolumeError::InvalidConfig(format!("target must be >= 2, got {target}")).into());
    }
    Ok(())
}

/// Voxel spacing of `normalize_volume(vol, _, target)`, computed without
/// imputing. Each rounds halves the slice spacing, selection stretches it by
/// `(count − 1)/(target − 1)`, and the final resize preserves the physical
/// extent of every axis.
pub fn normalized_spacing(vol: &Volume3D, target: usize) -> Result<[f32; 3]> {
    check_inputs(vol, target)?;
    let n = vol.n_slices();
    let rounds = rounds_needed(n, target);
    let count = slice_count_after(n, rounds);
    let slice_spacing = vol.spacing()[0] as f64 / (1u64 << rounds) as f64 * ((count - 1) as f64 / (target - 1) as f64);
    let sp = vol.spacing();
    let stacked = [slice_spacing as f32, sp[1], sp[2]];
    let shape = [target, vol.shape()[1], vol.shape()[2]];
    let p = vol.orientation().permutation_to(Orientation::Coronal);
    let (sp, shape): ([f32; 3], [usize; 3]) = (std::array::from_fn(|a| stacked[p[a]]), std::array::from_fn(|a| shape[p[a]]));
    if shape == [target; 3] {
        return Ok(sp);
    }
    Ok(std::array::from_fn(|a| (sp[a] as f64 * shape[a] as f64 / target as f64) as f32))
}

/// Densify, select, reorient and resize `vol` to a `target³` coronal volume.
/// Spacing is rescaled so the physical extent of each axis is preserved.
pub fn normalize_volume(vol: &Volume3D, imputer: &impl SliceImputer, target: usize) -> Result<Volume3D> {
    let spacing = normalized_spacing(vol, target)?;
    let range = vol.min_max();
    let mut slices = vol.slices();
    while slices.len() < target {
        slices = impute_round(&slices, imputer, range)?;
    }
    let keep = uniform_select(slices.len(), target)?;
    let selected: Vec<_> = keep.into_iter().map(|i| std::mem::take(&mut slices[i])).collect();
    let stacked = vol.with_slices(&selected, vol.spacing()[0])?;
    let coronal = reorient(&stacked, Orientation::Coronal);
    let data = if coronal.shape() == [target; 3] { coronal.into_data() } else { resize_nearest_3d(coronal.data(), [target; 3]) };
    Ok(Volume3D::new(data, spacing, Orientation::Coronal, vol.modality())?)
}

/// [`normalize_volume`] with the generator registered for the volume's
/// modality.
pub fn normalize_with_bank(vol: &Volume3D, bank: &GeneratorBank, target: usize) -> Result<Volume3D> {
    let model = bank.get(vol.modality())?;
    normalize_volume(vol, &IsGenImputer::new(&model.generator), target)
}

/// Carry a mask through the same geometry using copy imputation, so it stays
/// binary.
pub fn normalize_mask(mask: &Mask3D, orientation: Orientation, target: usize) -> Result<Mask3D> {
    let as_vol = Volume3D::new(mask.data().mapv(f32::from), mask.spacing(), orientation, "mask")?;
    let out = normalize_volume(&as_vol, &CopyImputer, target)?;
    Ok(Mask3D::new(out.data().mapv(|v| u8::from(v > 0.5)), out.spacing())?)
}
