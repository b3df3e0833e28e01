use super::{NormalizeError, Result};
use crate::stats::{mean, sample_variance, t_two_sided_p};
use ndarray::ArrayView2;

/// Mean absolute error after mapping both slices onto `[0, 255]` with the
/// truth volume's intensity range `truth_range`.
pub fn mae_0_255(pred: &ArrayView2<'_, f32>, truth: &ArrayView2<'_, f32>, truth_range: (f32, f32)) -> Result<f64> {
    if pred.dim() != truth.dim() {
        return Err(NormalizeError::ShapeMismatch(format!("{:?} vs {:?}", pred.dim(), truth.dim())));
    }
    let (lo, hi) = (truth_range.0 as f64, truth_range.1 as f64);
    if !(hi > lo) {
        return Err(NormalizeError::ShapeMismatch(format!("degenerate intensity range [{lo}, {hi}]")));
    }
    let scale = 255.0 / (hi - lo);
    let total: f64 = pred.iter().zip(truth.iter()).map(|(&p, &t)| ((p as f64 - t as f64) * scale).abs()).sum();
    Ok(total / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub mean_a: f64,
    pub mean_b: f64,
    /// Statistic for the differences `a − b`.
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
    /// All differences were identical, so the sample variance is zero; `t`
    /// is then `±inf` (p = 0) or 0 (p = 1).
    pub degenerate_variance: bool,
}

/// Two-sided paired t-test of `a` against `b`.
pub fn paired_comparison(a: &[f64], b: &[f64], alpha: f64) -> Result<PairedComparison> {
    if a.len() != b.len() {
        return Err(NormalizeError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(NormalizeError::LengthMismatch(a.len(), 2));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let (mean_a, mean_b, md) = (mean(a), mean(b), mean(&diffs));
    let degenerate = diffs.iter().all(|&d| d == diffs[0]);
    let (t, p) = if degenerate {
        if md != 0.0 {
            (md.signum() * f64::INFINITY, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let se = (sample_variance(&diffs) / n as f64).sqrt();
        let t = md / se;
        (t, t_two_sided_p(t, (n - 1) as f64))
    };
    Ok(PairedComparison { mean_a, mean_b, t, df: n - 1, p, significant: p < alpha, degenerate_variance: degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn mae_examples() {
        let z = Array2::<f32>::zeros((3, 3));
        let full = Array2::<f32>::from_elem((3, 3), 255.0);
        assert_eq!(mae_0_255(&z.view(), &z.view(), (0.0, 255.0)).unwrap(), 0.0);
        assert_eq!(mae_0_255(&z.view(), &full.view(), (0.0, 255.0)).unwrap(), 255.0);
        let t = Array2::from_shape_fn((3, 3), |(r, c)| (r * 3 + c) as f32 * 10.0);
        let p = &t + 1.0;
        assert!((mae_0_255(&p.view(), &t.view(), (0.0, 255.0)).unwrap() - 1.0).abs() < 1e-12);
        // unit-range volume: one unit is 255 levels
        assert!((mae_0_255(&z.view(), &Array2::from_elem((3, 3), 0.5).view(), (0.0, 1.0)).unwrap() - 127.5).abs() < 1e-9);
    }

    #[test]
    fn identical_inputs_take_degenerate_path() {
        let a = [1.0, 2.0, 3.0];
        let r = paired_comparison(&a, &a, 0.05).unwrap();
        assert!(r.degenerate_variance && !r.significant);
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let b = [0.0, 1.0, 2.0];
        let r = paired_comparison(&a, &b, 0.05).unwrap();
        assert!(r.degenerate_variance && r.significant && r.p == 0.0);
        assert!(paired_comparison(&a, &b[..2], 0.05).is_err());
    }

    #[test]
    fn hand_computed_t() {
        // differences 1, 2, 3: mean 2, sd 1, t = 2·sqrt(3)
        let r = paired_comparison(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0], 0.05).unwrap();
        assert!((r.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2);
        assert!(!r.significant);
    }
}
