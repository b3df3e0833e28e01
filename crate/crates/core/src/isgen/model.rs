use super::{IsGenError, Result};
use crate::tensorkit::{self, read_checkpoint, write_checkpoint, Graph, ParamSet, Real, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub image_size: usize,
    /// Output channels of the four encoder stages; the decoder mirrors them.
    pub channels: [usize; 4],
    pub alpha: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { image_size: 256, channels: [16, 32, 48, 64], alpha: 0.2 }
    }
}

impl GeneratorConfig {
    pub fn desk() -> Self {
        GeneratorConfig { image_size: 64, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.image_size % 16 != 0 {
            return Err(IsGenError::InvalidConfig(format!("image_size must be a positive multiple of 16, got {}", self.image_size)));
        }
        if self.channels.contains(&0) {
            return Err(IsGenError::InvalidConfig("channel widths must be positive".into()));
        }
        Ok(())
    }

    pub fn bottleneck(&self) -> [usize; 3] {
        [self.channels[3], self.image_size / 16, self.image_size / 16]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorConfig {
    pub image_size: usize,
    pub channels: [usize; 3],
    pub hidden: usize,
    pub alpha: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { image_size: 256, channels: [8, 16, 32], hidden: 32, alpha: 0.2 }
    }
}

impl DiscriminatorConfig {
    pub fn desk() -> Self {
        DiscriminatorConfig { image_size: 64, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.image_size % 8 != 0 {
            return Err(IsGenError::InvalidConfig(format!("image_size must be a positive multiple of 8, got {}", self.image_size)));
        }
        if self.channels.contains(&0) || self.hidden == 0 {
            return Err(IsGenError::InvalidConfig("layer widths must be positive".into()));
        }
        Ok(())
    }

    fn flat_features(&self) -> usize {
        let s = self.image_size / 8;
        self.channels[2] * s * s
    }
}

fn conv_fan_in(c_in: usize) -> usize {
    c_in * KERNEL * KERNEL
}

/// Each output pixel of a stride-2 transposed conv sees a quarter of the
/// kernel taps.
fn conv_t_fan_in(c_in: usize) -> usize {
    c_in * KERNEL * KERNEL / (STRIDE * STRIDE)
}

/// Two independent encoders, concatenated bottleneck, one decoder.
///
/// Parameter order: `enc_a` stages 0..4, `enc_b` stages 0..4, `dec` stages
/// 0..4, each as (weight, bias).
#[derive(Debug, Clone)]
pub struct Generator<T: Real = f32> {
    pub config: GeneratorConfig,
    pub params: ParamSet<T>,
}

impl<T: Real> Generator<T> {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for branch in ["enc_a", "enc_b"] {
            let mut c_in = 1;
            for (l, &c_out) in config.channels.iter().enumerate() {
                params.push_he(format!("gen.{branch}.{l}.weight"), &[c_out, c_in, KERNEL, KERNEL], conv_fan_in(c_in), &mut rng);
                params.push_zeros(format!("gen.{branch}.{l}.bias"), &[c_out]);
                c_in = c_out;
            }
        }
        let mut c_in = 2 * config.channels[3];
        for (l, c_out) in Self::decoder_widths(&config).into_iter().enumerate() {
            params.push_he(format!("gen.dec.{l}.weight"), &[c_in, c_out, KERNEL, KERNEL], conv_t_fan_in(c_in), &mut rng);
            params.push_zeros(format!("gen.dec.{l}.bias"), &[c_out]);
            c_in = c_out;
        }
        Ok(Generator { config, params })
    }

    fn decoder_widths(config: &GeneratorConfig) -> [usize; 4] {
        let c = config.channels;
        [c[2], c[1], c[0], 1]
    }

    pub fn param_vars(&self, g: &mut Graph<T>) -> Vec<Var> {
        (0..self.params.len()).map(|i| g.param(&self.params, i)).collect()
    }

    /// Record `G(x₁, x₂)` with this generator's parameters.
    pub fn forward(&self, g: &mut Graph<T>, x1: Var, x2: Var) -> tensorkit::Result<Var> {
        let w = self.param_vars(g);
        Self::forward_with(&self.config, g, &w, x1, x2)
    }

    /// Forward pass with explicit weight nodes, in parameter order.
    pub fn forward_with(config: &GeneratorConfig, g: &mut Graph<T>, w: &[Var], x1: Var, x2: Var) -> tensorkit::Result<Var> {
        let alpha = T::lit(config.alpha);
        let mut branches = [x1, x2];
        for (b, h) in branches.iter_mut().enumerate() {
            for l in 0..4 {
                let i = 8 * b + 2 * l;
                let z = g.conv2d(*h, w[i], w[i + 1], STRIDE, PAD)?;
                *h = g.leaky_relu(z, alpha)?;
            }
        }
        let mut h = g.concat(branches[0], branches[1], 0)?;
        for l in 0..4 {
            let i = 16 + 2 * l;
            let z = g.conv2d_transpose(h, w[i], w[i + 1], STRIDE, PAD)?;
            h = if l < 3 { g.leaky_relu(z, alpha)? } else { g.sigmoid(z)? };
        }
        Ok(h)
    }

    /// Inference on plain tensors shaped `[1, S, S]`.
    pub fn generate(&self, x1: &Tensor<T>, x2: &Tensor<T>) -> tensorkit::Result<Tensor<T>> {
        let mut g = Graph::new();
        let a = g.input(x1.clone())?;
        let b = g.input(x2.clone())?;
        let y = self.forward(&mut g, a, b)?;
        Ok(g.value(y).clone())
    }

    pub fn cast<U: Real>(&self) -> Generator<U> {
        Generator { config: self.config.clone(), params: self.params.cast() }
    }
}

/// Strided conv stack, one hidden dense layer, one sigmoid output neuron.
///
/// Parameter order: conv stages 0..3, `fc`, `out`, each as (weight, bias).
#[derive(Debug, Clone)]
pub struct Discriminator<T: Real = f32> {
    pub config: DiscriminatorConfig,
    pub params: ParamSet<T>,
}

impl<T: Real> Discriminator<T> {
    pub fn new(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut c_in = 1;
        for (l, &c_out) in config.channels.iter().enumerate() {
            params.push_he(format!("disc.conv.{l}.weight"), &[c_out, c_in, KERNEL, KERNEL], conv_fan_in(c_in), &mut rng);
            params.push_zeros(format!("disc.conv.{l}.bias"), &[c_out]);
            c_in = c_out;
        }
        let n = config.flat_features();
        params.push_he("disc.fc.weight", &[config.hidden, n], n, &mut rng);
        params.push_zeros("disc.fc.bias", &[config.hidden]);
        params.push_he("disc.out.weight", &[1, config.hidden], config.hidden, &mut rng);
        params.push_zeros("disc.out.bias", &[1]);
        Ok(Discriminator { config, params })
    }

    pub fn param_vars(&self, g: &mut Graph<T>) -> Vec<Var> {
        (0..self.params.len()).map(|i| g.param(&self.params, i)).collect()
    }

    /// Probability that `x` is real, shape `[1]`.
    pub fn forward(&self, g: &mut Graph<T>, x: Var) -> tensorkit::Result<Var> {
        let w = self.param_vars(g);
        Self::forward_with(&self.config, g, &w, x)
    }

    pub fn forward_with(config: &DiscriminatorConfig, g: &mut Graph<T>, w: &[Var], x: Var) -> tensorkit::Result<Var> {
        let alpha = T::lit(config.alpha);
        let mut h = x;
        for l in 0..3 {
            let z = g.conv2d(h, w[2 * l], w[2 * l + 1], STRIDE, PAD)?;
            h = g.leaky_relu(z, alpha)?;
        }
        let z = g.dense(h, w[6], w[7])?;
        let h = g.leaky_relu(z, alpha)?;
        let z = g.dense(h, w[8], w[9])?;
        g.sigmoid(z)
    }

    pub fn score(&self, x: &Tensor<T>) -> tensorkit::Result<T> {
        let mut g = Graph::new();
        let v = g.input(x.clone())?;
        let p = self.forward(&mut g, v)?;
        Ok(g.value(p).data()[0])
    }

    pub fn cast<U: Real>(&self) -> Discriminator<U> {
        Discriminator { config: self.config.clone(), params: self.params.cast() }
    }
}

/// Generator and discriminator trained together for one modality.
#[derive(Debug, Clone)]
pub struct IsGenModel {
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
}

impl IsGenModel {
    pub fn new(gen: GeneratorConfig, disc: DiscriminatorConfig, seed: u64) -> Result<Self> {
        if gen.image_size != disc.image_size {
            return Err(IsGenError::InvalidConfig(format!(
                "generator image size {} differs from discriminator {}",
                gen.image_size, disc.image_size
            )));
        }
        Ok(IsGenModel {
            generator: Generator::new(gen, seed)?,
            discriminator: Discriminator::new(disc, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?,
        })
    }

    pub fn desk(seed: u64) -> Result<Self> {
        Self::new(GeneratorConfig::desk(), DiscriminatorConfig::desk(), seed)
    }

    pub fn image_size(&self) -> usize {
        self.generator.config.image_size
    }

    pub fn named_values(&self) -> Vec<(String, Tensor<f32>)> {
        let mut out = self.generator.params.named_values();
        out.extend(self.discriminator.params.named_values());
        out
    }

    pub fn load_named(&mut self, named: &[(String, Tensor<f32>)]) -> Result<()> {
        let (gen, disc): (Vec<_>, Vec<_>) = named.iter().cloned().partition(|(n, _)| n.starts_with("gen."));
        self.generator.params.load(&gen)?;
        self.discriminator.params.load(&disc)?;
        Ok(())
    }

    /// Rebuild a model from checkpoint records, recovering the layer widths
    /// and image size from the stored shapes.
    pub fn from_named(named: &[(String, Tensor<f32>)]) -> Result<Self> {
        let shape = |name: &str| -> Result<Vec<usize>> {
            named
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.shape().to_vec())
                .ok_or_else(|| IsGenError::Checkpoint(format!("missing parameter {name:?}")))
        };
        let mut channels = [0; 4];
        for (l, c) in channels.iter_mut().enumerate() {
            *c = shape(&format!("gen.enc_a.{l}.weight"))?[0];
        }
        let disc_channels = [
            shape("disc.conv.0.weight")?[0],
            shape("disc.conv.1.weight")?[0],
            shape("disc.conv.2.weight")?[0],
        ];
        let fc = shape("disc.fc.weight")?;
        if fc.len() != 2 {
            return Err(IsGenError::Checkpoint(format!("disc.fc.weight has shape {fc:?}")));
        }
        let cells = fc[1] / disc_channels[2];
        let side = (cells as f64).sqrt().round() as usize;
        if side * side * disc_channels[2] != fc[1] {
            return Err(IsGenError::Checkpoint(format!("cannot infer image size from disc.fc.weight {fc:?}")));
        }
        let image_size = side * 8;
        let gen = GeneratorConfig { image_size, channels, ..Default::default() };
        let disc = DiscriminatorConfig { image_size, channels: disc_channels, hidden: fc[0], ..Default::default() };
        let mut model = IsGenModel::new(gen, disc, 0)?;
        model.load_named(named)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_checkpoint(path, &self.named_values())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let named = read_checkpoint(path).map_err(|e| IsGenError::Checkpoint(e.to_string()))?;
        Self::from_named(&named)
    }
}
