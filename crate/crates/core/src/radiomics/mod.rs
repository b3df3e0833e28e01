//! Mask-based radiomic features and segmentation overlap.
//!
//! Coordinates are voxel indices `(X, Y, Z) = (s, r, c)`. Texture matrices
//! use quantized intensities; first-order statistics use raw intensities.

mod table;
mod texture;

pub use table::{parse_feature_table, write_feature_table, FeatureRow};
pub use texture::{
    glcm, glcm_features, glcm_with, glrlm, glrlm_features, glrlm_with, quantize, Glcm, GlcmFeatures, Glrlm,
    GlrlmFeatures, DEFAULT_LEVELS, DIRECTIONS_13,
};

use crate::volume::{Mask3D, Volume3D};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RadiomicsError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("missing modality {0:?}")]
    MissingModality(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed feature table: {0}")]
    MalformedTable(String),
}

pub type Result<T> = std::result::Result<T, RadiomicsError>;

pub const MODALITIES: [&str; 3] = ["FLAIR", "T1wCE", "T2w"];

const LOCATION_SHAPE: [&str; 6] = ["Xc", "Yc", "Zc", "Volume", "SurfaceArea", "Sphericity"];
const PER_MODALITY: [&str; 11] = [
    "Energy",
    "TotalEnergy",
    "Entropy",
    "Mean",
    "Variance",
    "GLCM-Contrast",
    "GLCM-Correlation",
    "GLCM-ASM",
    "GLCM-IDM",
    "GLRLM-SRE",
    "GLRLM-LRE",
];

pub const N_FEATURES: usize = 39;
pub const ENTROPY_BINS: usize = 64;

/// Registry order: six location/shape entries, then eleven per modality
/// named `<modality>_<feature>`.
pub fn feature_names() -> Vec<String> {
    let mut out: Vec<String> = LOCATION_SHAPE.iter().map(|s| s.to_string()).collect();
    for m in MODALITIES {
        out.extend(PER_MODALITY.iter().map(|f| format!("{m}_{f}")));
    }
    out
}

pub(crate) fn check_pair(vol: &Volume3D, mask: &Mask3D) -> Result<()> {
    if vol.shape() != mask.shape() {
        return Err(RadiomicsError::ShapeMismatch(vol.shape(), mask.shape()));
    }
    Ok(())
}

pub fn centroid(mask: &Mask3D) -> Result<[f64; 3]> {
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for ((s, r, c), &v) in mask.data().indexed_iter() {
        if v != 0 {
            sum[0] += s as f64;
            sum[1] += r as f64;
            sum[2] += c as f64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(RadiomicsError::EmptyMask);
    }
    Ok(sum.map(|x| x / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatures {
    /// mm³
    pub volume: f64,
    /// mm²
    pub surface_area: f64,
    pub sphericity: f64,
}

/// Voxel-count volume, exposed-face surface area and
/// `π^(1/3)·(6V)^(2/3) / A`, using the mask's spacing.
pub fn shape_features(mask: &Mask3D) -> Result<ShapeFeatures> {
    let sp = mask.spacing().map(|v| v as f64);
    let face_area = [sp[1] * sp[2], sp[0] * sp[2], sp[0] * sp[1]];
    let data = mask.data();
    let shape = mask.shape();
    let mut count = 0usize;
    let mut faces = [0usize; 3];
    for ((s, r, c), &v) in data.indexed_iter() {
        if v == 0 {
            continue;
        }
        count += 1;
        let p = [s, r, c];
        for a in 0..3 {
            for dir in [-1isize, 1] {
                let q = p[a] as isize + dir;
                let outside = q < 0 || q as usize >= shape[a] || {
                    let mut n = p;
                    n[a] = q as usize;
                    data[n] == 0
                };
                if outside {
                    faces[a] += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(RadiomicsError::EmptyMask);
    }
    let volume = count as f64 * sp[0] * sp[1] * sp[2];
    let surface_area: f64 = (0..3).map(|a| faces[a] as f64 * face_area[a]).sum();
    let sphericity = std::f64::consts::PI.cbrt() * (6.0 * volume).powf(2.0 / 3.0) / surface_area;
    Ok(ShapeFeatures { volume, surface_area, sphericity })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrder {
    pub energy: f64,
    pub total_energy: f64,
    /// Bits, over a 64-bin histogram of the masked range.
    pub entropy: f64,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
}

pub fn first_order(vol: &Volume3D, mask: &Mask3D) -> Result<FirstOrder> {
    check_pair(vol, mask)?;
    let values: Vec<f64> =
        vol.data().iter().zip(mask.data().iter()).filter(|(_, &m)| m != 0).map(|(&v, _)| v as f64).collect();
    if values.is_empty() {
        return Err(RadiomicsError::EmptyMask);
    }
    let n = values.len() as f64;
    let energy: f64 = values.iter().map(|x| x * x).sum();
    let voxel_volume: f64 = vol.spacing().iter().map(|&s| s as f64).product();
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;

    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut hist = [0usize; ENTROPY_BINS];
    for &x in &values {
        let b = if hi > lo { (((x - lo) / (hi - lo)) * ENTROPY_BINS as f64).floor() as usize } else { 0 };
        hist[b.min(ENTROPY_BINS - 1)] += 1;
    }
    let entropy = -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    Ok(FirstOrder { energy, total_energy: voxel_volume * energy, entropy, mean, variance })
}

fn overlap(a: &Mask3D, b: &Mask3D) -> Result<(usize, usize, usize)> {
    if a.shape() != b.shape() {
        return Err(RadiomicsError::ShapeMismatch(a.shape(), b.shape()));
    }
    let mut inter = 0;
    for (&x, &y) in a.data().iter().zip(b.data().iter()) {
        if x != 0 && y != 0 {
            inter += 1;
        }
    }
    Ok((inter, a.count(), b.count()))
}

/// `|A∩B| / |A∪B|`, 1 when both masks are empty.
pub fn iou(a: &Mask3D, b: &Mask3D) -> Result<f64> {
    let (i, na, nb) = overlap(a, b)?;
    let union = na + nb - i;
    Ok(if union == 0 { 1.0 } else { i as f64 / union as f64 })
}

/// `2|A∩B| / (|A| + |B|)`, 1 when both masks are empty.
pub fn dice(a: &Mask3D, b: &Mask3D) -> Result<f64> {
    let (i, na, nb) = overlap(a, b)?;
    Ok(if na + nb == 0 { 1.0 } else { 2.0 * i as f64 / (na + nb) as f64 })
}

/// Named feature values in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The eleven intensity and texture values for one modality.
pub fn modality_features(vol: &Volume3D, mask: &Mask3D) -> Result<[f64; 11]> {
    let fo = first_order(vol, mask)?;
    let gc = glcm_features(&glcm(vol, mask, DEFAULT_LEVELS)?);
    let rl = glrlm_features(&glrlm(vol, mask, DEFAULT_LEVELS)?);
    Ok([
        fo.energy,
        fo.total_energy,
        fo.entropy,
        fo.mean,
        fo.variance,
        gc.contrast,
        gc.correlation,
        gc.asm,
        gc.idm,
        rl.sre,
        rl.lre,
    ])
}

/// All 39 features for one subject; `volumes` is keyed by modality label.
pub fn extract_all(volumes: &BTreeMap<String, Volume3D>, mask: &Mask3D) -> Result<FeatureVector> {
    let c = centroid(mask)?;
    let sh = shape_features(mask)?;
    let mut values = vec![c[0], c[1], c[2], sh.volume, sh.surface_area, sh.sphericity];
    for m in MODALITIES {
        let vol = volumes.get(m).ok_or_else(|| RadiomicsError::MissingModality(m.to_string()))?;
        values.extend(modality_features(vol, mask)?);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(RadiomicsError::DegenerateRegion(format!("feature {} is not finite", feature_names()[i])));
    }
    Ok(FeatureVector { names: feature_names(), values })
}
