//! Brute-force reference implementations, written independently of the
//! library code paths.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volnorm::volume::{Mask3D, Orientation, Volume3D};

/// Random volume of at most 6³ voxels with a non-empty random mask.
pub fn random_masked_volume(seed: u64) -> (Volume3D, Mask3D) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = [rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=6)];
    let spacing = [rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
    // a few repeated levels so runs and co-occurrences are not all trivial
    let levels = rng.random_range(2..6);
    let data = Array3::from_shape_fn(shape, |_| rng.random_range(0..levels) as f32 * 10.0 + rng.random_range(0.0..0.5) * f32::from(u8::from(rng.random::<bool>())));
    let fill = rng.random_range(0.3..1.0);
    let mut m = Array3::from_shape_fn(shape, |_| u8::from(rng.random::<f64>() < fill));
    if m.iter().all(|&v| v == 0) {
        m[[0, 0, 0]] = 1;
    }
    (Volume3D::new(data, spacing, Orientation::Axial, "synthetic").unwrap(), Mask3D::new(m, spacing).unwrap())
}

fn masked_coords(mask: &Mask3D) -> Vec<[usize; 3]> {
    let sh = mask.shape();
    let mut out = Vec::new();
    for s in 0..sh[0] {
        for r in 0..sh[1] {
            for c in 0..sh[2] {
                if mask.get([s, r, c]) {
                    out.push([s, r, c]);
                }
            }
        }
    }
    out
}

pub fn centroid(mask: &Mask3D) -> [f64; 3] {
    let pts = masked_coords(mask);
    let n = pts.len() as f64;
    [0, 1, 2].map(|a| pts.iter().map(|p| p[a] as f64).sum::<f64>() / n)
}

/// Volume, surface area and sphericity; faces are counted as in/out
/// transitions along each axis of a zero-padded copy.
pub fn shape(mask: &Mask3D) -> (f64, f64, f64) {
    let sh = mask.shape();
    let sp = mask.spacing().map(f64::from);
    let padded = Array3::from_shape_fn((sh[0] + 2, sh[1] + 2, sh[2] + 2), |(s, r, c)| {
        s >= 1 && r >= 1 && c >= 1 && s <= sh[0] && r <= sh[1] && c <= sh[2] && mask.get([s - 1, r - 1, c - 1])
    });
    let mut area = 0.0;
    for ((s, r, c), &v) in padded.indexed_iter() {
        let nexts = [(s + 1, r, c), (s, r + 1, c), (s, r, c + 1)];
        let face = [sp[1] * sp[2], sp[0] * sp[2], sp[0] * sp[1]];
        for (a, n) in nexts.iter().enumerate() {
            if let Some(&w) = padded.get(*n) {
                if v != w {
                    area += face[a];
                }
            }
        }
    }
    let volume = masked_coords(mask).len() as f64 * sp[0] * sp[1] * sp[2];
    let sphericity = (std::f64::consts::PI * 36.0 * volume * volume).cbrt() / area;
    (volume, area, sphericity)
}

/// Energy, total energy, entropy (64 bins, bits), mean, population variance.
pub fn first_order(vol: &Volume3D, mask: &Mask3D) -> [f64; 5] {
    let mut v: Vec<f64> = masked_coords(mask).iter().map(|p| f64::from(vol.data()[*p])).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let energy = v.iter().map(|x| x * x).sum::<f64>();
    let sp = vol.spacing();
    let total = energy * f64::from(sp[0]) * f64::from(sp[1]) * f64::from(sp[2]);
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| x * x).sum::<f64>() / n - mean * mean;
    let (lo, hi) = (v[0], v[v.len() - 1]);
    let mut counts = std::collections::BTreeMap::new();
    for &x in &v {
        let b = if hi > lo { ((((x - lo) / (hi - lo)) * 64.0).floor() as usize).min(63) } else { 0 };
        *counts.entry(b).or_insert(0usize) += 1;
    }
    let entropy = counts.values().map(|&c| c as f64 / n).map(|p| -p * p.log2()).sum::<f64>();
    [energy, total, entropy, mean, var]
}

fn levels_of(vol: &Volume3D, mask: &Mask3D, levels: usize) -> Vec<([usize; 3], usize)> {
    let pts = masked_coords(mask);
    let vals: Vec<f64> = pts.iter().map(|p| f64::from(vol.data()[*p])).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    pts.iter()
        .zip(&vals)
        .map(|(p, &x)| {
            let q = if hi > lo { (((x - lo) / (hi - lo)) * levels as f64).floor() as usize } else { 0 };
            (*p, q.min(levels - 1))
        })
        .collect()
}

fn is_unit_offset(p: [usize; 3], q: [usize; 3], dirs: &[[isize; 3]]) -> bool {
    let d = [0, 1, 2].map(|a| q[a] as isize - p[a] as isize);
    dirs.iter().any(|&u| u == d || u == [-d[0], -d[1], -d[2]])
}

/// Symmetric co-occurrence counts from an all-pairs scan.
pub fn glcm_counts(vol: &Volume3D, mask: &Mask3D, levels: usize, dirs: &[[isize; 3]]) -> Vec<Vec<f64>> {
    let q = levels_of(vol, mask, levels);
    let mut m = vec![vec![0.0; levels]; levels];
    for &(p, a) in &q {
        for &(r, b) in &q {
            if is_unit_offset(p, r, dirs) {
                m[a][b] += 1.0;
            }
        }
    }
    m
}

/// Contrast, correlation, ASM, IDM from marginal distributions.
pub fn glcm_features(m: &[Vec<f64>]) -> [f64; 4] {
    let n = m.len();
    let total: f64 = m.iter().flatten().sum();
    let p: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v / total).collect()).collect();
    let px: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| p.iter().map(|r| r[j]).sum()).collect();
    let mx: f64 = px.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
    let my: f64 = py.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
    let sx = px.iter().enumerate().map(|(i, v)| (i as f64 - mx).powi(2) * v).sum::<f64>().sqrt();
    let sy = py.iter().enumerate().map(|(i, v)| (i as f64 - my).powi(2) * v).sum::<f64>().sqrt();
    let (mut con, mut cor, mut asm, mut idm) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let d = i.abs_diff(j) as f64;
            con += d * d * p[i][j];
            cor += (i as f64) * (j as f64) * p[i][j];
            asm += p[i][j] * p[i][j];
            idm += p[i][j] / (1.0 + d * d);
        }
    }
    let cor = if sx == 0.0 || sy == 0.0 { 1.0 } else { (cor - mx * my) / (sx * sy) };
    [con, cor, asm, idm]
}

/// Run counts by (level, length − 1): every line through the grid along each
/// direction is read out as a sequence and run-length encoded.
pub fn glrlm_counts(vol: &Volume3D, mask: &Mask3D, levels: usize, dirs: &[[isize; 3]]) -> Vec<Vec<f64>> {
    let sh = mask.shape();
    let mut grid = Array3::from_elem(sh, None);
    for (p, l) in levels_of(vol, mask, levels) {
        grid[p] = Some(l);
    }
    let max_len = *sh.iter().max().unwrap();
    let mut out = vec![vec![0.0; max_len]; levels];
    let inside = |p: [isize; 3]| (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < sh[a]);
    for d in dirs {
        for ((s, r, c), _) in grid.indexed_iter() {
            let start = [s as isize, r as isize, c as isize];
            if inside([start[0] - d[0], start[1] - d[1], start[2] - d[2]]) {
                continue;
            }
            let mut seq = Vec::new();
            let mut p = start;
            while inside(p) {
                seq.push(grid[[p[0] as usize, p[1] as usize, p[2] as usize]]);
                p = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
            }
            let mut i = 0;
            while i < seq.len() {
                let mut j = i;
                while j + 1 < seq.len() && seq[j + 1] == seq[i] {
                    j += 1;
                }
                if let Some(l) = seq[i] {
                    out[l][j - i] += 1.0;
                }
                i = j + 1;
            }
        }
    }
    out
}

pub fn glrlm_features(m: &[Vec<f64>]) -> [f64; 2] {
    let total: f64 = m.iter().flatten().sum();
    let mut sre = 0.0;
    let mut lre = 0.0;
    for row in m {
        for (j, &v) in row.iter().enumerate() {
            let l = (j + 1) as f64;
            sre += v / (l * l);
            lre += v * l * l;
        }
    }
    [sre / total, lre / total]
}

/// Pairwise AUROC: P(score⁺ > score⁻) + ½ P(tie).
pub fn auroc_pairwise(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &a) in scores.iter().enumerate() {
        for (j, &b) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                num += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

/// Two-way ANOVA with replication via the textbook decomposition over
/// explicit residuals: returns (F_A, F_B, F_AB, df_within).
pub fn anova_f(values: &[Vec<Vec<f64>>]) -> ([f64; 3], usize) {
    let a = values.len();
    let b = values[0].len();
    let r = values[0][0].len();
    let all: Vec<f64> = values.iter().flatten().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let cell = |i: usize, j: usize| values[i][j].iter().sum::<f64>() / r as f64;
    let row = |i: usize| values[i].iter().flatten().sum::<f64>() / (b * r) as f64;
    let col = |j: usize| values.iter().map(|v| v[j].iter().sum::<f64>()).sum::<f64>() / (a * r) as f64;
    let sst: f64 = all.iter().map(|x| (x - grand).powi(2)).sum();
    let mut ssw = 0.0;
    let mut ss_cells = 0.0;
    for i in 0..a {
        for j in 0..b {
            for &x in &values[i][j] {
                ssw += (x - cell(i, j)).powi(2);
            }
            ss_cells += r as f64 * (cell(i, j) - grand).powi(2);
        }
    }
    let ssa: f64 = (0..a).map(|i| (b * r) as f64 * (row(i) - grand).powi(2)).sum();
    let ssb: f64 = (0..b).map(|j| (a * r) as f64 * (col(j) - grand).powi(2)).sum();
    let ssab = sst - ssw - ssa - ssb;
    assert!((ss_cells - ssa - ssb - ssab).abs() < 1e-9 * (1.0 + sst));
    let dfw = a * b * (r - 1);
    let msw = ssw / dfw as f64;
    ([ssa / (a - 1) as f64 / msw, ssb / (b - 1) as f64 / msw, ssab / ((a - 1) * (b - 1)) as f64 / msw], dfw)
}
