use serde::{Deserialize, Serialize};

/// Adaptive first-order optimizers over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    /// Running average of squared gradients scales each step.
    RmsProp { lr: f64, alpha: f64, eps: f64, square_avg: Vec<f64> },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64, m: Vec<f64>, v: Vec<f64>, t: u64 },
}

impl Optimizer {
    pub fn rms_prop(n: usize, lr: f64, alpha: f64, eps: f64) -> Self {
        Optimizer::RmsProp { lr, alpha, eps, square_avg: vec![0.0; n] }
    }

    pub fn adam(n: usize, lr: f64) -> Self {
        Optimizer::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Descend along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        match self {
            Optimizer::RmsProp { lr, alpha, eps, square_avg } => {
                for ((p, g), s) in params.iter_mut().zip(grad).zip(square_avg.iter_mut()) {
                    *s = *alpha * *s + (1.0 - *alpha) * g * g;
                    *p -= *lr * g / (s.sqrt() + *eps);
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps, m, v, t } => {
                *t += 1;
                let bc1 = 1.0 - beta1.powi(*t as i32);
                let bc2 = 1.0 - beta2.powi(*t as i32);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = *beta1 * *m + (1.0 - *beta1) * g;
                    *v = *beta2 * *v + (1.0 - *beta2) * g * g;
                    let denom = (*v / bc2).sqrt() + *eps;
                    *p -= *lr * (*m / bc1) / denom;
                }
            }
        }
    }

    pub fn accumulators_non_negative(&self) -> bool {
        match self {
            Optimizer::RmsProp { square_avg, .. } => square_avg.iter().all(|s| *s >= 0.0),
            Optimizer::Adam { v, .. } => v.iter().all(|s| *s >= 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimize(mut opt: Optimizer) -> f64 {
        // f(x) = (x - 3)^2
        let mut x = [0.0];
        for _ in 0..5000 {
            let g = [2.0 * (x[0] - 3.0)];
            opt.step(&mut x, &g);
            assert!(opt.accumulators_non_negative());
        }
        x[0]
    }

    #[test]
    fn both_optimizers_descend() {
        assert!((minimize(Optimizer::rms_prop(1, 1e-2, 0.99, 1e-5)) - 3.0).abs() < 0.05);
        assert!((minimize(Optimizer::adam(1, 1e-2)) - 3.0).abs() < 0.05);
    }

    #[test]
    fn rmsprop_first_step() {
        let mut opt = Optimizer::rms_prop(1, 0.1, 0.99, 0.0);
        let mut x = [1.0];
        opt.step(&mut x, &[2.0]);
        // square_avg = 0.01 * 4 = 0.04, step = 0.1 * 2 / 0.2 = 1.
        assert!((x[0] - 0.0).abs() < 1e-12);
    }
}
