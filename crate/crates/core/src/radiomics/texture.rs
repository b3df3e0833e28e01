use super::{check_pair, RadiomicsError, Result};
use crate::volume::{Mask3D, Volume3D};
use ndarray::{Array2, Array3};

/// The 13 unique 3D neighbour directions (one of each ± pair).
pub const DIRECTIONS_13: [[isize; 3]; 13] = [
    [0, 0, 1],
    [0, 1, 0],
    [1, 0, 0],
    [0, 1, 1],
    [0, 1, -1],
    [1, 0, 1],
    [1, 0, -1],
    [1, 1, 0],
    [1, -1, 0],
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [1, -1, -1],
];

pub const DEFAULT_LEVELS: usize = 32;

/// Equal-width quantization of masked voxels into `levels` bins over the
/// masked intensity range; voxels outside the mask are `None`. A constant
/// region maps to level 0.
pub fn quantize(vol: &Volume3D, mask: &Mask3D, levels: usize) -> Result<Array3<Option<u16>>> {
    check_pair(vol, mask)?;
    if levels == 0 || levels > u16::MAX as usize {
        return Err(RadiomicsError::InvalidArgument(format!("levels must be in 1..=65535, got {levels}")));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&v, &m) in vol.data().iter().zip(mask.data().iter()) {
        if m != 0 {
            lo = lo.min(v as f64);
            hi = hi.max(v as f64);
        }
    }
    if lo > hi {
        return Err(RadiomicsError::EmptyMask);
    }
    let span = hi - lo;
    let mut out = Array3::from_elem(vol.data().raw_dim(), None);
    for ((o, &v), &m) in out.iter_mut().zip(vol.data().iter()).zip(mask.data().iter()) {
        if m != 0 {
            let q = if span > 0.0 { (((v as f64 - lo) / span) * levels as f64).floor() as usize } else { 0 };
            *o = Some(q.min(levels - 1) as u16);
        }
    }
    Ok(out)
}

fn step(p: [usize; 3], d: [isize; 3], shape: &[usize]) -> Option<[usize; 3]> {
    let mut q = [0; 3];
    for a in 0..3 {
        let v = p[a] as isize + d[a];
        if v < 0 || v as usize >= shape[a] {
            return None;
        }
        q[a] = v as usize;
    }
    Some(q)
}

/// Symmetric co-occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub counts: Array2<f64>,
    pub total: f64,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.counts.nrows()
    }

    pub fn normalized(&self) -> Array2<f64> {
        if self.total > 0.0 {
            &self.counts / self.total
        } else {
            self.counts.clone()
        }
    }
}

pub fn glcm(vol: &Volume3D, mask: &Mask3D, levels: usize) -> Result<Glcm> {
    glcm_with(vol, mask, levels, &DIRECTIONS_13)
}

/// Co-occurrences over `offsets`, counted in both orders, for pairs with both
/// voxels inside the mask.
pub fn glcm_with(vol: &Volume3D, mask: &Mask3D, levels: usize, offsets: &[[isize; 3]]) -> Result<Glcm> {
    let q = quantize(vol, mask, levels)?;
    let shape = q.shape().to_vec();
    let mut counts = Array2::zeros((levels, levels));
    for ((s, r, c), &a) in q.indexed_iter() {
        let Some(a) = a else { continue };
        for &d in offsets {
            if let Some(n) = step([s, r, c], d, &shape) {
                if let Some(b) = q[n] {
                    counts[[a as usize, b as usize]] += 1.0;
                    counts[[b as usize, a as usize]] += 1.0;
                }
            }
        }
    }
    let total = counts.sum();
    if total == 0.0 {
        return Err(RadiomicsError::DegenerateRegion("no in-mask neighbour pairs".into()));
    }
    Ok(Glcm { counts, total })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmFeatures {
    pub contrast: f64,
    pub correlation: f64,
    pub asm: f64,
    pub idm: f64,
}

/// Contrast, correlation (1 when the marginal variance vanishes), angular
/// second moment and inverse difference moment.
pub fn glcm_features(m: &Glcm) -> GlcmFeatures {
    let p = m.normalized();
    let n = m.levels();
    let (mut contrast, mut asm, mut idm, mut mu_i, mut mu_j) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let v = p[[i, j]];
            let d = i as f64 - j as f64;
            contrast += v * d * d;
            asm += v * v;
            idm += v / (1.0 + d * d);
            mu_i += v * i as f64;
            mu_j += v * j as f64;
        }
    }
    let (mut var_i, mut var_j, mut cov) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let v = p[[i, j]];
            let (di, dj) = (i as f64 - mu_i, j as f64 - mu_j);
            var_i += v * di * di;
            var_j += v * dj * dj;
            cov += v * di * dj;
        }
    }
    let correlation = if var_i <= 0.0 || var_j <= 0.0 { 1.0 } else { cov / (var_i * var_j).sqrt() };
    GlcmFeatures { contrast, correlation, asm, idm }
}

/// Run counts indexed by `(level, run_length − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Glrlm {
    pub counts: Array2<f64>,
    pub total: f64,
}

impl Glrlm {
    pub fn levels(&self) -> usize {
        self.counts.nrows()
    }

    pub fn max_run(&self) -> usize {
        self.counts.ncols()
    }
}

pub fn glrlm(vol: &Volume3D, mask: &Mask3D, levels: usize) -> Result<Glrlm> {
    glrlm_with(vol, mask, levels, &DIRECTIONS_13)
}

/// Maximal runs of one quantized level along each direction, broken by
/// level changes and by voxels outside the mask.
pub fn glrlm_with(vol: &Volume3D, mask: &Mask3D, levels: usize, directions: &[[isize; 3]]) -> Result<Glrlm> {
    let q = quantize(vol, mask, levels)?;
    let shape = q.shape().to_vec();
    let max_len = *shape.iter().max().unwrap();
    let mut counts = Array2::zeros((levels, max_len));
    for &d in directions {
        let back = [-d[0], -d[1], -d[2]];
        for ((s, r, c), &a) in q.indexed_iter() {
            let Some(a) = a else { continue };
            // only start at the first voxel of a run
            if step([s, r, c], back, &shape).is_some_and(|p| q[p] == Some(a)) {
                continue;
            }
            let mut len = 1;
            let mut cur = [s, r, c];
            while let Some(n) = step(cur, d, &shape) {
                if q[n] != Some(a) {
                    break;
                }
                len += 1;
                cur = n;
            }
            counts[[a as usize, len - 1]] += 1.0;
        }
    }
    let total = counts.sum();
    if total == 0.0 {
        return Err(RadiomicsError::DegenerateRegion("no runs".into()));
    }
    Ok(Glrlm { counts, total })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlrlmFeatures {
    pub sre: f64,
    pub lre: f64,
}

/// Short- and long-run emphasis.
pub fn glrlm_features(m: &Glrlm) -> GlrlmFeatures {
    let (mut sre, mut lre) = (0.0, 0.0);
    for ((_, j), &v) in m.counts.indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let len = (j + 1) as f64;
        sre += v / (len * len);
        lre += v * len * len;
    }
    GlrlmFeatures { sre: sre / m.total, lre: lre / m.total }
}
