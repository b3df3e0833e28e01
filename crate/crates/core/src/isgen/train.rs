use super::loss::{bce_graph, reconstruction_loss, reconstruction_loss_graph};
use super::model::{Discriminator, Generator, IsGenModel};
use super::triplet::Triplet;
use super::{IsGenError, Result};
use crate::tensorkit::{Adam, AdamConfig, Graph, Optimizer, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub off_epochs: usize,
    pub on_epochs: usize,
    pub cycles: usize,
    /// Largest slice spacing drawn when sampling triplets.
    pub d_max: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Reconstruction-only epochs run before the first cycle.
    pub warmup_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.03,
            off_epochs: 5,
            on_epochs: 5,
            cycles: 10,
            d_max: 4,
            seed: 0,
            // 1e-3 drives the sigmoid output into saturation within the first epoch
            adam: AdamConfig { lr: 2e-4, ..AdamConfig::default() },
            warmup_epochs: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(IsGenError::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.off_epochs == 0 || self.on_epochs == 0 || self.cycles == 0 {
            return Err(IsGenError::InvalidConfig(format!(
                "off_epochs, on_epochs and cycles must all be >= 1 (got {}, {}, {})",
                self.off_epochs, self.on_epochs, self.cycles
            )));
        }
        if self.d_max == 0 {
            return Err(IsGenError::InvalidConfig("d_max must be >= 1".into()));
        }
        Ok(())
    }

    /// Mode of every epoch in order.
    pub fn schedule(&self) -> Vec<Mode> {
        let mut out = vec![Mode::NonAdversarial; self.warmup_epochs];
        for _ in 0..self.cycles {
            out.extend(std::iter::repeat_n(Mode::NonAdversarial, self.off_epochs));
            out.extend(std::iter::repeat_n(Mode::Adversarial, self.on_epochs));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    NonAdversarial,
    Adversarial,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::NonAdversarial => "off",
            Mode::Adversarial => "on",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub l_g: f64,
    pub l_d: f64,
    pub l_rl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub mode: Mode,
    pub mean_rl: f64,
    pub mean_ld: Option<f64>,
    pub val_rl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub initial_val_rl: Option<f64>,
    /// Epoch whose weights were kept; `None` keeps the initial weights.
    pub best_epoch: Option<usize>,
}

impl TrainLog {
    pub fn adversarial_epochs(&self) -> usize {
        self.epochs.iter().filter(|e| e.mode == Mode::Adversarial).count()
    }

    /// Tab-separated `epoch mode l_rl l_d val_l_rl`, one line per epoch;
    /// missing values are written as `-`.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.8}"));
        self.epochs
            .iter()
            .map(|e| format!("{}\t{}\t{:.8}\t{}\t{}\n", e.epoch, e.mode, e.mean_rl, opt(e.mean_ld), opt(e.val_rl)))
            .collect()
    }
}

fn triplet_graph(g: &mut Graph<f32>, t: &Triplet) -> Result<(Var, Var, Var)> {
    Ok((g.input(t.x1.clone())?, g.input(t.x2.clone())?, g.input(t.y.clone())?))
}

/// Reconstruction-only update of the generator.
pub fn nonadversarial_step(gen: &mut Generator<f32>, opt: &mut impl Optimizer<f32>, t: &Triplet) -> Result<f64> {
    let mut g = Graph::new();
    let (x1, x2, y) = triplet_graph(&mut g, t)?;
    let yhat = gen.forward(&mut g, x1, x2)?;
    let loss = reconstruction_loss_graph(&mut g, y, yhat)?;
    let l_rl = g.value(loss).data()[0] as f64;
    g.backward(loss)?;
    g.accumulate_param_grads(&mut gen.params);
    opt.step(&mut gen.params)?;
    Ok(l_rl)
}

/// One adversarial update of both networks on a single triplet.
///
/// The discriminator scores `[G(x₁,x₂), x₁]`, synthetic first. The generator
/// minimises `L_RL + λ·BCE([1,0])` through the discriminator's forward pass
/// but only its own parameters move; the discriminator then minimises
/// `BCE([0,1])` on the detached synthetic image.
pub fn adversarial_step(
    gen: &mut Generator<f32>,
    disc: &mut Discriminator<f32>,
    gen_opt: &mut impl Optimizer<f32>,
    disc_opt: &mut impl Optimizer<f32>,
    t: &Triplet,
    lambda: f64,
) -> Result<StepLosses> {
    let mut g = Graph::new();
    let (x1, x2, y) = triplet_graph(&mut g, t)?;
    let yhat = gen.forward(&mut g, x1, x2)?;
    let l_rl = reconstruction_loss_graph(&mut g, y, yhat)?;
    let fake = disc.forward(&mut g, yhat)?;
    let real = disc.forward(&mut g, x1)?;
    let scores = g.concat(fake, real, 0)?;
    let adv = bce_graph(&mut g, scores, &[1.0, 0.0])?;
    let adv = g.affine(adv, lambda as f32, 0.0)?;
    let l_g = g.add(l_rl, adv)?;
    let (l_g_val, l_rl_val) = (g.value(l_g).data()[0] as f64, g.value(l_rl).data()[0] as f64);
    let synthetic = g.value(yhat).clone();
    g.backward(l_g)?;
    g.accumulate_param_grads(&mut gen.params);

    let mut h = Graph::new();
    let fake_in = h.input(synthetic)?;
    let real_in = h.input(t.x1.clone())?;
    let fake = disc.forward(&mut h, fake_in)?;
    let real = disc.forward(&mut h, real_in)?;
    let scores = h.concat(fake, real, 0)?;
    let l_d = bce_graph(&mut h, scores, &[0.0, 1.0])?;
    let l_d_val = h.value(l_d).data()[0] as f64;
    h.backward(l_d)?;
    h.accumulate_param_grads(&mut disc.params);

    gen_opt.step(&mut gen.params)?;
    disc_opt.step(&mut disc.params)?;
    Ok(StepLosses { l_g: l_g_val, l_d: l_d_val, l_rl: l_rl_val })
}

/// Mean reconstruction loss of `gen` over `triplets`.
pub fn validation_loss(gen: &Generator<f32>, triplets: &[Triplet]) -> Result<f64> {
    if triplets.is_empty() {
        return Err(IsGenError::EmptyDataset);
    }
    let mut total = 0.0;
    for t in triplets {
        let yhat = gen.generate(&t.x1, &t.x2)?;
        total += reconstruction_loss(t.y.data(), yhat.data())?;
    }
    Ok(total / triplets.len() as f64)
}

/// On-Off training. Each epoch visits every training triplet once in a
/// seeded shuffled order. The weights with the lowest validation loss (or
/// training loss when `val` is empty) are restored at the end.
pub fn on_off_train(model: &mut IsGenModel, train: &[Triplet], val: &[Triplet], cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(IsGenError::EmptyDataset);
    }
    let size = model.image_size();
    if let Some(t) = train.iter().chain(val).find(|t| t.y.shape() != [1, size, size]) {
        return Err(IsGenError::ShapeMismatch(format!("triplet slice {:?} for a {size}x{size} model", t.y.shape())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gen_opt: Adam<f32> = Adam::new(cfg.adam)?;
    let mut disc_opt: Adam<f32> = Adam::new(cfg.adam)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainLog::default();
    log.initial_val_rl = if val.is_empty() { None } else { Some(validation_loss(&model.generator, val)?) };
    let mut best = (log.initial_val_rl.unwrap_or(f64::INFINITY), model.named_values());

    for (e, mode) in cfg.schedule().into_iter().enumerate() {
        order.shuffle(&mut rng);
        let (mut rl_sum, mut ld_sum) = (0.0, 0.0);
        for &k in &order {
            let t = &train[k];
            match mode {
                Mode::NonAdversarial => rl_sum += nonadversarial_step(&mut model.generator, &mut gen_opt, t)?,
                Mode::Adversarial => {
                    let s = adversarial_step(
                        &mut model.generator,
                        &mut model.discriminator,
                        &mut gen_opt,
                        &mut disc_opt,
                        t,
                        cfg.lambda,
                    )?;
                    rl_sum += s.l_rl;
                    ld_sum += s.l_d;
                }
            }
        }
        let n = train.len() as f64;
        let mean_rl = rl_sum / n;
        let val_rl = if val.is_empty() { None } else { Some(validation_loss(&model.generator, val)?) };
        let score = val_rl.unwrap_or(mean_rl);
        if score < best.0 {
            best = (score, model.named_values());
            log.best_epoch = Some(e + 1);
        }
        log.epochs.push(EpochLog {
            epoch: e + 1,
            mode,
            mean_rl,
            mean_ld: (mode == Mode::Adversarial).then_some(ld_sum / n),
            val_rl,
        });
    }
    model.load_named(&best.1)?;
    Ok(log)
}
