use super::{NormalizeError, Result};
use crate::isgen::{slice_to_tensor, tensor_to_slice, Generator, IsGenModel};
use ndarray::{Array2, ArrayView2};
use std::collections::BTreeMap;

/// Produces the slice halfway between two neighbours. `range` is the
/// intensity range of the whole volume, used by imputers that rescale.
pub trait SliceImputer {
    fn impute(&self, left: &ArrayView2<'_, f32>, right: &ArrayView2<'_, f32>, range: (f32, f32)) -> Result<Array2<f32>>;
}

/// Duplicates the left neighbour.
#[derive(Debug, Clone, Copy, Default)]
pub struct CopyImputer;

impl SliceImputer for CopyImputer {
    fn impute(&self, left: &ArrayView2<'_, f32>, _: &ArrayView2<'_, f32>, _: (f32, f32)) -> Result<Array2<f32>> {
        Ok(left.to_owned())
    }
}

/// Pixelwise average of the neighbours. Cheap stand-in for a trained model.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanImputer;

impl SliceImputer for MeanImputer {
    fn impute(&self, left: &ArrayView2<'_, f32>, right: &ArrayView2<'_, f32>, _: (f32, f32)) -> Result<Array2<f32>> {
        if left.dim() != right.dim() {
            return Err(NormalizeError::ShapeMismatch(format!("{:?} vs {:?}", left.dim(), right.dim())));
        }
        Ok((left + right) * 0.5)
    }
}

/// Runs a trained generator; slices are rescaled to `[0, 1]` with the volume
/// range and resized to the model's image size and back.
#[derive(Debug, Clone, Copy)]
pub struct IsGenImputer<'a> {
    pub generator: &'a Generator<f32>,
}

impl<'a> IsGenImputer<'a> {
    pub fn new(generator: &'a Generator<f32>) -> Self {
        IsGenImputer { generator }
    }
}

impl SliceImputer for IsGenImputer<'_> {
    fn impute(&self, left: &ArrayView2<'_, f32>, right: &ArrayView2<'_, f32>, range: (f32, f32)) -> Result<Array2<f32>> {
        if left.dim() != right.dim() {
            return Err(NormalizeError::ShapeMismatch(format!("{:?} vs {:?}", left.dim(), right.dim())));
        }
        let size = self.generator.config.image_size;
        let (lo, hi) = range;
        let a = slice_to_tensor(left, lo, hi, size);
        let b = slice_to_tensor(right, lo, hi, size);
        let y = self.generator.generate(&a, &b).map_err(crate::isgen::IsGenError::from)?;
        let (rows, cols) = left.dim();
        Ok(tensor_to_slice(&y, lo, hi, rows, cols))
    }
}

/// One trained model per modality label.
#[derive(Debug, Clone, Default)]
pub struct GeneratorBank {
    models: BTreeMap<String, IsGenModel>,
}

impl GeneratorBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, modality: impl Into<String>, model: IsGenModel) {
        self.models.insert(modality.into(), model);
    }

    pub fn get(&self, modality: &str) -> Result<&IsGenModel> {
        self.models.get(modality).ok_or_else(|| NormalizeError::ModelMissing(modality.to_string()))
    }

    pub fn modalities(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }
}

/// Insert one imputed slice between every adjacent pair: `n → 2n − 1`.
/// Originals sit bitwise unchanged at even positions.
pub fn impute_round(slices: &[Array2<f32>], imputer: &impl SliceImputer, range: (f32, f32)) -> Result<Vec<Array2<f32>>> {
    if slices.len() < 2 {
        return Err(NormalizeError::TooFewSlices(slices.len()));
    }
    let mut out = Vec::with_capacity(2 * slices.len() - 1);
    for pair in slices.windows(2) {
        out.push(pair[0].clone());
        out.push(imputer.impute(&pair[0].view(), &pair[1].view(), range)?);
    }
    out.push(slices[slices.len() - 1].clone());
    Ok(out)
}

pub fn copy_impute_round(slices: &[Array2<f32>]) -> Result<Vec<Array2<f32>>> {
    impute_round(slices, &CopyImputer, (0.0, 0.0))
}

pub fn isgen_impute_round(slices: &[Array2<f32>], generator: &Generator<f32>, range: (f32, f32)) -> Result<Vec<Array2<f32>>> {
    impute_round(slices, &IsGenImputer::new(generator), range)
}

/// Slice count after `k` rounds starting from `n`: `2ᵏ(n − 1) + 1`.
pub fn slice_count_after(n: usize, k: u32) -> usize {
    (n - 1) * (1usize << k) + 1
}

/// Smallest number of rounds taking `n ≥ 2` slices to at least `target`.
pub fn rounds_needed(n: usize, target: usize) -> u32 {
    let mut k = 0;
    while slice_count_after(n, k) < target {
        k += 1;
    }
    k
}
