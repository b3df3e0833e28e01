use super::{ParamSet, Real, Result, Tensor, TensorError};

/// Gradient-descent update over the accumulated gradients of a [`ParamSet`].
pub trait Optimizer<T: Real> {
    /// Apply one update and clear the gradient accumulators.
    fn step(&mut self, params: &mut ParamSet<T>) -> Result<()>;
    fn steps(&self) -> u64;
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    steps: u64,
}

impl Sgd {
    pub fn new(lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(TensorError::InvalidArgument(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Sgd { lr, steps: 0 })
    }
}

impl<T: Real> Optimizer<T> for Sgd {
    fn step(&mut self, params: &mut ParamSet<T>) -> Result<()> {
        let lr = T::lit(self.lr);
        let (values, grads) = params.values_and_grads_mut();
        for (w, g) in values.iter_mut().zip(grads) {
            for (wi, gi) in w.data_mut().iter_mut().zip(g.data()) {
                *wi = *wi - lr * *gi;
            }
        }
        params.zero_grad();
        self.steps += 1;
        Ok(())
    }

    fn steps(&self) -> u64 {
        self.steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers are bound to the first
/// parameter set stepped and shape-checked on every step.
#[derive(Debug, Clone)]
pub struct Adam<T = f32> {
    pub config: AdamConfig,
    set_id: Option<u64>,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    steps: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0 && config.lr.is_finite()) {
            return Err(TensorError::InvalidArgument(format!("learning rate must be positive, got {}", config.lr)));
        }
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) || config.eps <= 0.0 {
            return Err(TensorError::InvalidArgument(format!("invalid Adam moments {config:?}")));
        }
        Ok(Adam { config, set_id: None, m: vec![], v: vec![], steps: 0 })
    }

    /// Forget the parameter-set binding, e.g. after reloading weights into a
    /// fresh set.
    pub fn rebind(&mut self, params: &ParamSet<T>) -> Result<()> {
        if self.m.len() != params.len() && !self.m.is_empty() {
            return Err(TensorError::InvalidArgument("parameter count changed".into()));
        }
        self.set_id = Some(params.id());
        Ok(())
    }
}

impl<T: Real> Optimizer<T> for Adam<T> {
    fn step(&mut self, params: &mut ParamSet<T>) -> Result<()> {
        match self.set_id {
            None => {
                self.set_id = Some(params.id());
                self.m = params.values().iter().map(|p| Tensor::zeros(p.shape())).collect();
                self.v = self.m.clone();
            }
            Some(id) if id != params.id() => {
                return Err(TensorError::InvalidArgument("Adam state belongs to a different parameter set".into()));
            }
            _ => {}
        }
        for (p, m) in params.values().iter().zip(&self.m) {
            if p.shape() != m.shape() {
                return Err(TensorError::ShapeMismatch(format!("moment {:?} vs parameter {:?}", m.shape(), p.shape())));
            }
        }
        self.steps += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let bc1 = 1.0 - c.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - c.beta2.powi(self.steps as i32);
        let step_size = T::lit(c.lr * bc2.sqrt() / bc1);
        let eps = T::lit(c.eps * bc2.sqrt());
        let (values, grads) = params.values_and_grads_mut();
        for (((w, g), m), v) in values.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let it = w.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((wi, &gi), (mi, vi)) in it {
                *mi = b1 * *mi + one_b1 * gi;
                *vi = b2 * *vi + one_b2 * gi * gi;
                *wi = *wi - step_size * *mi / (vi.sqrt() + eps);
            }
        }
        params.zero_grad();
        Ok(())
    }

    fn steps(&self) -> u64 {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f32, g: f32) -> ParamSet<f32> {
        let mut p = ParamSet::new();
        p.push("w", Tensor::scalar(v));
        p.grad_mut(0).data_mut()[0] = g;
        p
    }

    #[test]
    fn sgd_examples() {
        let mut p = one_param(1.0, 2.0);
        let mut opt = Sgd::new(0.1).unwrap();
        opt.step(&mut p).unwrap();
        assert!((p.value(0).data()[0] - 0.8).abs() < 1e-7);
        assert_eq!(Optimizer::<f32>::steps(&opt), 1);
        assert_eq!(p.grad(0).data()[0], 0.0);

        let mut p = one_param(1.5, 0.0);
        opt.step(&mut p).unwrap();
        assert_eq!(p.value(0).data()[0], 1.5);
    }

    #[test]
    fn adam_first_step_opposes_gradient() {
        for g in [3.0f32, -0.01] {
            let mut p = one_param(0.0, g);
            let mut opt = Adam::new(AdamConfig::default()).unwrap();
            opt.step(&mut p).unwrap();
            let w = p.value(0).data()[0];
            assert_eq!(w.signum(), -g.signum());
            // first bias-corrected step has magnitude ~lr
            assert!((w.abs() - 1e-3).abs() < 1e-5);
        }
    }

    #[test]
    fn adam_refuses_foreign_set() {
        let mut a = one_param(0.0, 1.0);
        let mut b = one_param(0.0, 1.0);
        let mut opt = Adam::new(AdamConfig::default()).unwrap();
        opt.step(&mut a).unwrap();
        assert!(opt.step(&mut b).is_err());
        assert!(Adam::<f32>::new(AdamConfig { lr: 0.0, ..Default::default() }).is_err());
    }
}
