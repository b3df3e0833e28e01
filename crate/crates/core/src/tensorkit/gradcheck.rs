//! Central finite-difference gradient checking.

use super::{Graph, Result, Tensor, TensorError, Var};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Central differences at ε = 1e-6 carry about 1e-10 of rounding noise for
/// O(1) losses. With a 1e-4 tolerance this floor keeps a 1e-9 absolute bound
/// on gradients too small for a relative comparison.
pub const REL_FLOOR: f64 = 1e-5;

/// Worst discrepancy found by a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub param: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
}

fn eval<F>(f: &F, params: &[Tensor<f64>], requires_grad: bool) -> Result<(Graph<f64>, Vec<Var>, Var)>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars = params.iter().map(|p| g.leaf(p.clone(), requires_grad)).collect::<Result<Vec<_>>>()?;
    let out = f(&mut g, &vars)?;
    if g.value(out).len() != 1 {
        return Err(TensorError::NonScalarLoss(g.value(out).shape().to_vec()));
    }
    Ok((g, vars, out))
}

/// Reverse-mode gradients of `f` with respect to each of `params`.
pub fn analytic_grads<F>(f: &F, params: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let (mut g, vars, out) = eval(f, params, true)?;
    g.backward(out)?;
    Ok(vars
        .iter()
        .zip(params)
        .map(|(v, p)| g.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect())
}

/// Compare `analytic` against `(f(p+ε) − f(p−ε)) / 2ε` coordinate by
/// coordinate. Relative error uses `max(|analytic|, |numeric|, REL_FLOOR)`
/// as the denominator, so gradients smaller than the floor are compared in
/// absolute terms. With `max_coords_per_param`, a seeded random subset of each
/// tensor's coordinates is checked.
pub fn finite_difference_check_with<F>(
    f: &F,
    params: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    eps: f64,
    max_coords_per_param: Option<usize>,
    seed: u64,
) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(TensorError::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = GradCheck { max_rel_error: 0.0, param: 0, index: 0, analytic: 0.0, numeric: 0.0, coords_checked: 0 };
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let loss_at = |work: &[Tensor<f64>]| -> Result<f64> {
        let (g, _, out) = eval(f, work, false)?;
        Ok(g.value(out).data()[0])
    };
    for (pi, p) in params.iter().enumerate() {
        let n = p.len();
        let coords: Vec<usize> = match max_coords_per_param {
            Some(k) if k < n => {
                let mut c = sample(&mut rng, n, k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        for j in coords {
            let orig = p.data()[j];
            work[pi].data_mut()[j] = orig + eps;
            let up = loss_at(&work)?;
            work[pi].data_mut()[j] = orig - eps;
            let down = loss_at(&work)?;
            work[pi].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[pi].data()[j];
            let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
            let rel = (a - numeric).abs() / denom;
            worst.coords_checked += 1;
            if rel > worst.max_rel_error || worst.coords_checked == 1 {
                worst = GradCheck { max_rel_error: rel, param: pi, index: j, analytic: a, numeric, coords_checked: worst.coords_checked };
            }
        }
    }
    Ok(worst)
}

/// Full check of `f`'s reverse-mode gradients at `params`.
pub fn finite_difference_check<F>(f: &F, params: &[Tensor<f64>], eps: f64) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let analytic = analytic_grads(f, params)?;
    finite_difference_check_with(f, params, &analytic, eps, None, 0)
}
