//! Analytic Gaussian-mixture phantoms.
//!
//! The field is defined at every real-valued position, so the true image at a
//! fractional slice index is available in closed form.

use super::{Mask3D, Orientation, Result, Volume3D, VolumeError};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Axis-aligned Gaussian blob in voxel coordinates `(s, r, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub center: [f64; 3],
    pub sigma: [f64; 3],
    pub amplitude: f64,
}

impl Blob {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let mut q = 0.0;
        for a in 0..3 {
            let d = (p[a] - self.center[a]) / self.sigma[a];
            q += d * d;
        }
        self.amplitude * (-0.5 * q).exp()
    }

    /// Points where the blob exceeds half its peak: `q < 2 ln 2`.
    pub fn above_half_peak(&self, p: [f64; 3]) -> bool {
        let mut q = 0.0;
        for a in 0..3 {
            let d = (p[a] - self.center[a]) / self.sigma[a];
            q += d * d;
        }
        q < 2.0 * std::f64::consts::LN_2
    }

    /// Half-peak radius along axis `a`.
    pub fn half_peak_radius(&self, a: usize) -> f64 {
        self.sigma[a] * (2.0 * std::f64::consts::LN_2).sqrt()
    }
}

/// Sum of blobs; `tumor` optionally designates the blob that defines the mask.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhantomField {
    pub blobs: Vec<Blob>,
    pub tumor: Option<usize>,
}

impl PhantomField {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        self.blobs.iter().map(|b| b.eval(p)).sum()
    }

    /// Closed-form cross-section at (possibly fractional) slice position `s`.
    pub fn cross_section(&self, s: f64, rows: usize, cols: usize) -> Array2<f32> {
        Array2::from_shape_fn((rows, cols), |(r, c)| self.eval([s, r as f64, c as f64]) as f32)
    }

    pub fn render(&self, shape: [usize; 3]) -> Array3<f32> {
        Array3::from_shape_fn(shape, |(s, r, c)| self.eval([s as f64, r as f64, c as f64]) as f32)
    }

    pub fn tumor_mask(&self, shape: [usize; 3]) -> Array3<u8> {
        match self.tumor.and_then(|i| self.blobs.get(i)) {
            Some(b) => {
                Array3::from_shape_fn(shape, |(s, r, c)| u8::from(b.above_half_peak([s as f64, r as f64, c as f64])))
            }
            None => Array3::zeros(shape),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomConfig {
    pub shape: [usize; 3],
    pub n_blobs: usize,
    pub tumor: bool,
    pub spacing: [f32; 3],
    pub orientation: Orientation,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig { shape: [32, 32, 32], n_blobs: 6, tumor: true, spacing: [1.0; 3], orientation: Orientation::Axial }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shape.iter().any(|&d| d < 8) {
            return Err(VolumeError::InvalidConfig(format!("every axis must be >= 8, got {:?}", self.shape)));
        }
        if self.spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(VolumeError::InvalidConfig(format!("spacing must be positive, got {:?}", self.spacing)));
        }
        Ok(())
    }
}

/// A rendered phantom together with its analytic field.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub field: PhantomField,
    pub volume: Volume3D,
    pub mask: Mask3D,
}

impl Phantom {
    /// Random mixture: blob amplitudes in `[0.3, 1]`, widths between 8% and
    /// 25% of each axis. The tumor blob, when requested, is the last one and
    /// is isotropic so that its mask is a digital ball.
    pub fn generate(seed: u64, config: &PhantomConfig) -> Result<Phantom> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = config.shape;
        let mut blobs = Vec::with_capacity(config.n_blobs);
        for _ in 0..config.n_blobs {
            let mut center = [0.0; 3];
            let mut sigma = [0.0; 3];
            for a in 0..3 {
                let n = shape[a] as f64;
                center[a] = rng.random_range(0.2 * n..0.8 * n);
                sigma[a] = rng.random_range(0.08 * n..0.25 * n);
            }
            blobs.push(Blob { center, sigma, amplitude: rng.random_range(0.3..1.0) });
        }
        let tumor = if config.tumor && config.n_blobs > 0 {
            let last = blobs.last_mut().unwrap();
            let min_axis = shape.iter().copied().min().unwrap() as f64;
            let s = rng.random_range(0.06 * min_axis..0.15 * min_axis);
            last.sigma = [s; 3];
            for a in 0..3 {
                let n = shape[a] as f64;
                last.center[a] = rng.random_range(0.3 * n..0.7 * n);
            }
            Some(config.n_blobs - 1)
        } else {
            None
        };
        let field = PhantomField { blobs, tumor };
        Self::from_field(field, config)
    }

    pub fn from_field(field: PhantomField, config: &PhantomConfig) -> Result<Phantom> {
        config.validate()?;
        let volume = Volume3D::new(field.render(config.shape), config.spacing, config.orientation, "synthetic")?;
        let mask = Mask3D::new(field.tumor_mask(config.shape), config.spacing)?;
        Ok(Phantom { field, volume, mask })
    }
}

/// Deterministic phantom volume and tumor mask for `seed`.
pub fn make_phantom(seed: u64, config: &PhantomConfig) -> Result<(Volume3D, Mask3D)> {
    let p = Phantom::generate(seed, config)?;
    Ok((p.volume, p.mask))
}

/// Modality labels of a synthetic subject.
pub const SUBJECT_MODALITIES: [&str; 3] = ["FLAIR", "T1wCE", "T2w"];

/// A labelled synthetic subject: three co-registered modalities of one field
/// and its tumor mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSubject {
    pub label: u8,
    pub volumes: BTreeMap<String, Volume3D>,
    pub mask: Mask3D,
}

/// Per-subject seed, so subject `i` does not depend on how many others are
/// generated.
pub fn subject_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Subject `index` of a corpus. The label is `index % 2`, so an even-sized
/// corpus is exactly balanced. Positive subjects have their tumor stretched
/// by 1.6 along the slice axis; tumor size varies independently, so shape
/// features are informative but not decisive.
///
/// Modalities weight the blobs differently: FLAIR is the field itself,
/// T1wCE brightens the tumor 1.5×, and T2w maps each amplitude `a` to
/// `1.3 − a`. The tumor center is snapped to a voxel so the mask is never
/// empty.
pub fn phantom_subject(seed: u64, index: usize, config: &PhantomConfig) -> Result<PhantomSubject> {
    if config.n_blobs == 0 {
        return Err(VolumeError::InvalidConfig("a subject needs at least one blob for the tumor".into()));
    }
    let label = (index % 2) as u8;
    let base = Phantom::generate(subject_seed(seed, index), &PhantomConfig { tumor: true, ..config.clone() })?;
    let mut field = base.field;
    let t = field.tumor.expect("tumor requested");
    let tumor = &mut field.blobs[t];
    for c in &mut tumor.center {
        *c = c.round();
    }
    if label == 1 {
        tumor.sigma[0] *= 1.6;
    }
    let mut volumes = BTreeMap::new();
    for (m, name) in SUBJECT_MODALITIES.iter().enumerate() {
        let mut f = field.clone();
        for (i, b) in f.blobs.iter_mut().enumerate() {
            b.amplitude = match (m, i == t) {
                (1, true) => 1.5 * b.amplitude,
                (2, _) => 1.3 - b.amplitude,
                _ => b.amplitude,
            };
        }
        let v = Volume3D::new(f.render(config.shape), config.spacing, config.orientation, *name)?;
        volumes.insert(name.to_string(), v);
    }
    let mask = Mask3D::new(field.tumor_mask(config.shape), config.spacing)?;
    Ok(PhantomSubject { label, volumes, mask })
}
