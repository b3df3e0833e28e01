//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volnorm::isgen::{bce_graph, reconstruction_loss_graph, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use volnorm::tensorkit::{finite_difference_check_with, analytic_grads, GradCheck, Graph, Result, Tensor, Var};

pub type LossFn = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var>>;

pub struct GradCase {
    pub name: &'static str,
    pub f: LossFn,
    pub params: Vec<Tensor<f64>>,
    /// Coordinates sampled per parameter tensor; `None` checks all.
    pub max_coords: Option<usize>,
}

/// Values in ±[0.1, 1], away from the kinks of relu-like ops.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.1..1.0);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// `Σ r ⊙ v` with fixed random `r`, so every output coordinate carries a
/// distinct upstream gradient.
fn weighted_sum(g: &mut Graph<f64>, v: Var, r: &Tensor<f64>) -> Result<Var> {
    let w = g.input(r.clone())?;
    let p = g.mul(v, w)?;
    g.sum(p)
}

fn case<F>(name: &'static str, params: Vec<Tensor<f64>>, f: F) -> GradCase
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var> + 'static,
{
    GradCase { name, f: Box::new(f), params, max_coords: None }
}

/// Every differentiable op, plus the composed adversarial losses on a small
/// generator/discriminator pair.
pub fn gradient_cases(seed: u64) -> Vec<GradCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();

    for (name, stride, pad) in [("conv2d s1 p0", 1, 0), ("conv2d s2 p1", 2, 1)] {
        let params = vec![away_from_zero(&mut rng, &[2, 6, 6]), away_from_zero(&mut rng, &[3, 2, 3, 3]), away_from_zero(&mut rng, &[3])];
        let out = if stride == 1 { 4 } else { 3 };
        let r = uniform(&mut rng, &[3, out, out], -1.0, 1.0);
        cases.push(case(name, params, move |g, v| {
            let y = g.conv2d(v[0], v[1], v[2], stride, pad)?;
            weighted_sum(g, y, &r)
        }));
    }
    for (name, stride, pad, k, out) in [("conv2d_transpose s2 p1", 2, 1, 4, 8), ("conv2d_transpose s1 p0", 1, 0, 3, 6)] {
        let params = vec![away_from_zero(&mut rng, &[3, 4, 4]), away_from_zero(&mut rng, &[3, 2, k, k]), away_from_zero(&mut rng, &[2])];
        let r = uniform(&mut rng, &[2, out, out], -1.0, 1.0);
        cases.push(case(name, params, move |g, v| {
            let y = g.conv2d_transpose(v[0], v[1], v[2], stride, pad)?;
            weighted_sum(g, y, &r)
        }));
    }
    {
        let params = vec![away_from_zero(&mut rng, &[2, 5]), away_from_zero(&mut rng, &[4, 10]), away_from_zero(&mut rng, &[4])];
        let r = uniform(&mut rng, &[4], -1.0, 1.0);
        cases.push(case("dense", params, move |g, v| {
            let y = g.dense(v[0], v[1], v[2])?;
            weighted_sum(g, y, &r)
        }));
    }

    let shape = [3, 4];
    type Unary = fn(&mut Graph<f64>, Var) -> Result<Var>;
    let unaries: [(&'static str, Unary); 6] = [
        ("relu", |g, x| g.relu(x)),
        ("leaky_relu", |g, x| g.leaky_relu(x, 0.2)),
        ("sigmoid", |g, x| g.sigmoid(x)),
        ("affine", |g, x| g.affine(x, 1.7, -0.3)),
        ("square", |g, x| g.square(x)),
        ("reshape", |g, x| g.reshape(x, &[12])),
    ];
    for (name, op) in unaries {
        let r = uniform(&mut rng, &[12], -1.0, 1.0);
        let params = vec![away_from_zero(&mut rng, &shape)];
        cases.push(case(name, params, move |g, v| {
            let y = op(g, v[0])?;
            let y = g.reshape(y, &[12])?;
            weighted_sum(g, y, &r)
        }));
    }
    {
        let r = uniform(&mut rng, &shape, -1.0, 1.0);
        cases.push(case("ln", vec![uniform(&mut rng, &shape, 0.2, 2.0)], move |g, v| {
            let y = g.ln(v[0])?;
            weighted_sum(g, y, &r)
        }));
    }
    {
        // entries stay clear of the bounds so no difference straddles them
        let x = Tensor::from_fn(&shape, |i| [-0.9, -0.3, 0.2, 0.35, 0.8, -0.1][i % 6] + 0.01 * (i / 6) as f64);
        let r = uniform(&mut rng, &shape, -1.0, 1.0);
        cases.push(case("clamp", vec![x], move |g, v| {
            let y = g.clamp(v[0], -0.5, 0.5)?;
            weighted_sum(g, y, &r)
        }));
    }
    type Binary = fn(&mut Graph<f64>, Var, Var) -> Result<Var>;
    let binaries: [(&'static str, Binary, [usize; 2]); 5] = [
        ("add", |g, a, b| g.add(a, b), [3, 4]),
        ("sub", |g, a, b| g.sub(a, b), [3, 4]),
        ("mul", |g, a, b| g.mul(a, b), [3, 4]),
        ("concat axis 0", |g, a, b| g.concat(a, b, 0), [6, 4]),
        ("concat axis 1", |g, a, b| g.concat(a, b, 1), [3, 8]),
    ];
    for (name, op, out) in binaries {
        let r = uniform(&mut rng, &out, -1.0, 1.0);
        let params = vec![away_from_zero(&mut rng, &shape), away_from_zero(&mut rng, &shape)];
        cases.push(case(name, params, move |g, v| {
            let y = op(g, v[0], v[1])?;
            weighted_sum(g, y, &r)
        }));
    }
    {
        cases.push(case("sum of square", vec![away_from_zero(&mut rng, &shape)], |g, v| {
            let s = g.square(v[0])?;
            g.sum(s)
        }));
        cases.push(case("mean of square", vec![away_from_zero(&mut rng, &shape)], |g, v| {
            let s = g.square(v[0])?;
            g.mean(s)
        }));
    }

    cases.extend(adversarial_cases(&mut rng, seed));
    cases
}

pub fn small_generator_config() -> GeneratorConfig {
    GeneratorConfig { image_size: 16, channels: [2, 3, 3, 4], alpha: 0.2 }
}

pub fn small_discriminator_config() -> DiscriminatorConfig {
    DiscriminatorConfig { image_size: 16, channels: [2, 3, 4], hidden: 5, alpha: 0.2 }
}

fn adversarial_cases(rng: &mut ChaCha8Rng, seed: u64) -> Vec<GradCase> {
    let gc = small_generator_config();
    let dc = small_discriminator_config();
    let gen: Generator<f64> = Generator::new(gc.clone(), seed).unwrap();
    let disc: Discriminator<f64> = Discriminator::new(dc.clone(), seed + 1).unwrap();
    let s = gc.image_size;
    let x1 = uniform(rng, &[1, s, s], 0.0, 1.0);
    let x2 = uniform(rng, &[1, s, s], 0.0, 1.0);
    // a target with background zeros exercises both branches of the loss
    let y = Tensor::from_fn(&[1, s, s], |i| if i % 3 == 0 { 0.0 } else { rng.random_range(0.05..1.0) });
    let ng = gen.params.len();
    let gen_params: Vec<Tensor<f64>> = gen.params.values().to_vec();
    let disc_params: Vec<Tensor<f64>> = disc.params.values().to_vec();
    let lambda = 0.03;

    let (gc1, x1a, x2a, ya) = (gc.clone(), x1.clone(), x2.clone(), y.clone());
    let rl = move |g: &mut Graph<f64>, w: &[Var]| {
        let (a, b, t) = (g.input(x1a.clone())?, g.input(x2a.clone())?, g.input(ya.clone())?);
        let yhat = Generator::forward_with(&gc1, g, w, a, b)?;
        reconstruction_loss_graph(g, t, yhat)
    };

    let (gc2, dc2, x1b, x2b, yb) = (gc.clone(), dc.clone(), x1.clone(), x2.clone(), y.clone());
    let gen_total = move |g: &mut Graph<f64>, w: &[Var]| {
        let (a, b, t) = (g.input(x1b.clone())?, g.input(x2b.clone())?, g.input(yb.clone())?);
        let yhat = Generator::forward_with(&gc2, g, &w[..ng], a, b)?;
        let rl = reconstruction_loss_graph(g, t, yhat)?;
        let d_fake = Discriminator::forward_with(&dc2, g, &w[ng..], yhat)?;
        let d_real = Discriminator::forward_with(&dc2, g, &w[ng..], a)?;
        let preds = g.concat(d_fake, d_real, 0)?;
        // inverted labels: the generator wants its output scored as real
        let adv = bce_graph(g, preds, &[1.0, 0.0])?;
        let adv = g.affine(adv, lambda, 0.0)?;
        g.add(rl, adv)
    };

    let (gc3, dc3, x1c, x2c) = (gc.clone(), dc.clone(), x1.clone(), x2.clone());
    let gen_frozen = gen_params.clone();
    let disc_loss = move |g: &mut Graph<f64>, w: &[Var]| {
        let (a, b) = (g.input(x1c.clone())?, g.input(x2c.clone())?);
        let gw = gen_frozen.iter().map(|p| g.input(p.clone())).collect::<Result<Vec<_>>>()?;
        let yhat = Generator::forward_with(&gc3, g, &gw, a, b)?;
        let yhat = g.detach(yhat)?;
        let d_fake = Discriminator::forward_with(&dc3, g, w, yhat)?;
        let d_real = Discriminator::forward_with(&dc3, g, w, a)?;
        let preds = g.concat(d_fake, d_real, 0)?;
        bce_graph(g, preds, &[0.0, 1.0])
    };

    let mut all = gen_params.clone();
    all.extend(disc_params.iter().cloned());
    vec![
        GradCase { name: "generator reconstruction loss", f: Box::new(rl), params: gen_params, max_coords: Some(6) },
        GradCase { name: "generator total loss", f: Box::new(gen_total), params: all, max_coords: Some(4) },
        GradCase { name: "discriminator loss", f: Box::new(disc_loss), params: disc_params, max_coords: Some(6) },
    ]
}

pub fn run_case(c: &GradCase, seed: u64) -> GradCheck {
    let analytic = analytic_grads(&c.f, &c.params).unwrap();
    finite_difference_check_with(&c.f, &c.params, &analytic, 1e-6, c.max_coords, seed).unwrap()
}

/// Two Gaussian blobs in 2D, centers (±2, ±2), unit variance; labels alternate.
pub fn separable_blobs(n: usize, seed: u64) -> volnorm::mlkit::Dataset {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = if i % 2 == 0 { -2.0 } else { 2.0 };
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        x.push(vec![c + 0.5 * a, c + 0.5 * b]);
        y.push((i % 2) as u8);
    }
    volnorm::mlkit::Dataset::new(x, y).unwrap()
}

/// Random balanced two-factor design: a × b cells with r replications.
pub fn random_design(seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, r) = (rng.random_range(2..5), rng.random_range(2..7), rng.random_range(2..6));
    (0..a)
        .map(|i| (0..b).map(|j| (0..r).map(|_| 0.1 * i as f64 + 0.05 * j as f64 + rng.random_range(0.0..1.0)).collect()).collect())
        .collect()
}
