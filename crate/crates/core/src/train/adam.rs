use super::config::TrainConfig;
use crate::tensor::Tensor;

/// Bias-corrected Adam. Weight decay is not applied here; the L2 term lives
/// in the loss.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, epsilon: f64, params: &[Tensor]) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    pub fn from_config(cfg: &TrainConfig, params: &[Tensor]) -> Self {
        Adam::new(cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon, params)
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Vec<f64>]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((x, &g), m), v) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Vec<Tensor> {
        vec![Tensor::scalar(x)]
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = vec![Tensor::from_fn(&[2, 2], |i| i as f64)];
        let before = p.clone();
        let mut opt = Adam::new(1e-3, 0.9, 0.999, 1e-8, &p);
        for _ in 0..3 {
            opt.step(&mut p, &[vec![0.0; 4]]);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        for g in [3.0, -0.02] {
            let mut p = scalar(1.0);
            let mut opt = Adam::new(0.01, 0.9, 0.999, 1e-8, &p);
            opt.step(&mut p, &[vec![g]]);
            let moved = p[0].item() - 1.0;
            // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε).
            assert!((moved + 0.01 * g.signum()).abs() < 1e-8, "{moved}");
        }
    }

    #[test]
    fn matches_scalar_reference_trace() {
        // Hand-rolled scalar Adam on f(x) = x², starting at x = 1.
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for t in 1..=5 {
            let g = 2.0 * x;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
            expected.push(x);
        }
        let mut p = scalar(1.0);
        let mut opt = Adam::new(lr, b1, b2, eps, &p);
        for want in expected {
            let g = 2.0 * p[0].item();
            opt.step(&mut p, &[vec![g]]);
            assert_eq!(p[0].item(), want);
        }
        assert_eq!(opt.steps(), 5);
    }
}
