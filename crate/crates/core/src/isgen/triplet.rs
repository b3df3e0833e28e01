use super::{IsGenError, Result};
use crate::tensorkit::Tensor;
use crate::volume::{resize_nearest_2d, Volume3D};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three equally spaced slices: inputs `x1`, `x2` and the middle target `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub x1: Tensor<f32>,
    pub y: Tensor<f32>,
    pub x2: Tensor<f32>,
    /// Source slice indices `(i − d, i, i + d)`.
    pub indices: [usize; 3],
}

impl Triplet {
    pub fn spacing(&self) -> usize {
        self.indices[1] - self.indices[0]
    }
}

/// Map `img` linearly from `[lo, hi]` to `[0, 1]` and nearest-resize to
/// `size × size`, as a `[1, size, size]` tensor. A degenerate range maps to 0.
pub fn slice_to_tensor(img: &ArrayView2<'_, f32>, lo: f32, hi: f32, size: usize) -> Tensor<f32> {
    let resized = resize_nearest_2d(img, size, size);
    let span = (hi - lo) as f64;
    let data = resized
        .iter()
        .map(|&v| if span > 0.0 { (((v - lo) as f64) / span).clamp(0.0, 1.0) as f32 } else { 0.0 })
        .collect();
    Tensor::new(vec![1, size, size], data).expect("size matches")
}

/// Inverse of [`slice_to_tensor`]: back to `[lo, hi]` at `rows × cols`.
pub fn tensor_to_slice(t: &Tensor<f32>, lo: f32, hi: f32, rows: usize, cols: usize) -> Array2<f32> {
    let s = t.shape();
    let img = ArrayView2::from_shape((s[1], s[2]), t.data()).expect("[1, S, S] tensor");
    let span = (hi - lo) as f64;
    let back = img.mapv(|v| (lo as f64 + v as f64 * span).max(0.0) as f32);
    resize_nearest_2d(&back.view(), rows, cols)
}

/// Draw `d` uniformly from `1..=d_max` and the centre `i` uniformly from
/// `d..=n−1−d`. Slices are scaled with the volume's global range.
pub fn sample_triplet(vol: &Volume3D, d_max: usize, image_size: usize, rng: &mut impl Rng) -> Result<Triplet> {
    if d_max == 0 {
        return Err(IsGenError::InvalidConfig("d_max must be at least 1".into()));
    }
    let n = vol.n_slices();
    let needed = 2 * d_max + 1;
    if n < needed {
        return Err(IsGenError::VolumeTooThin { n, needed });
    }
    let d = rng.random_range(1..=d_max);
    let i = rng.random_range(d..=n - 1 - d);
    let (lo, hi) = vol.min_max();
    let get = |s: usize| slice_to_tensor(&vol.slice(s), lo, hi, image_size);
    Ok(Triplet { x1: get(i - d), y: get(i), x2: get(i + d), indices: [i - d, i, i + d] })
}

/// `count` triplets drawn round-robin over `volumes`.
pub fn sample_triplets(volumes: &[Volume3D], count: usize, d_max: usize, image_size: usize, seed: u64) -> Result<Vec<Triplet>> {
    if volumes.is_empty() {
        return Err(IsGenError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|k| sample_triplet(&volumes[k % volumes.len()], d_max, image_size, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Orientation;
    use ndarray::Array3;

    fn ramp(n: usize) -> Volume3D {
        let data = Array3::from_shape_fn((n, 4, 4), |(s, _, _)| s as f32);
        Volume3D::new(data, [1.0; 3], Orientation::Axial, "synthetic").unwrap()
    }

    #[test]
    fn forced_triplet() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = sample_triplet(&ramp(3), 1, 4, &mut rng).unwrap();
        assert_eq!(t.indices, [0, 1, 2]);
        assert_eq!(t.x1.data()[0], 0.0);
        assert_eq!(t.y.data()[0], 0.5);
        assert_eq!(t.x2.data()[0], 1.0);
    }

    #[test]
    fn equal_spacing_and_thin_volumes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = ramp(20);
        for _ in 0..200 {
            let t = sample_triplet(&v, 4, 8, &mut rng).unwrap();
            let [a, b, c] = t.indices;
            assert_eq!(b - a, c - b);
            assert!((1..=4).contains(&(b - a)));
            assert_eq!(t.y.shape(), &[1, 8, 8]);
        }
        assert!(matches!(sample_triplet(&ramp(8), 4, 8, &mut rng), Err(IsGenError::VolumeTooThin { n: 8, needed: 9 })));
    }

    #[test]
    fn scaling_round_trip() {
        let img = Array2::from_shape_fn((4, 4), |(r, c)| (r * 4 + c) as f32);
        let t = slice_to_tensor(&img.view(), 0.0, 15.0, 4);
        let back = tensor_to_slice(&t, 0.0, 15.0, 4, 4);
        for (a, b) in img.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
