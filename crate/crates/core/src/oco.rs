//! Full-information online gradient descent with an adaptive step size.
//!
//! After receiving gradient `g_t` the step is
//! `eta_t = (eps + sum_{j <= t} |g_j|_F^2)^{-1/2}`, then `W <- W - eta_t g_t`.
//! In projected mode the iterate is rescaled back onto the Frobenius ball of
//! radius `B`.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OcoMode {
    Unprojected,
    Projected { radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcoState {
    weights: Array2<f64>,
    grad_sq_sum: f64,
    mode: OcoMode,
    epsilon: f64,
}

impl OcoState {
    pub fn new(k: usize, d: usize, mode: OcoMode) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::InvalidParameter(format!(
                "weight matrix must be non-empty, got {k}x{d}"
            )));
        }
        if let OcoMode::Projected { radius } = mode {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "projection radius must be positive, got {radius}"
                )));
            }
        }
        Ok(Self {
            weights: Array2::zeros((k, d)),
            grad_sq_sum: 0.0,
            mode,
            epsilon: DEFAULT_EPSILON,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn grad_sq_sum(&self) -> f64 {
        self.grad_sq_sum
    }

    pub fn mode(&self) -> OcoMode {
        self.mode
    }

    /// Takes one step along `-g`. Returns the step size used.
    pub fn update(&mut self, g: ArrayView2<f64>) -> Result<f64> {
        if g.dim() != self.weights.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: g.len(),
            });
        }
        let mut sq = 0.0;
        for &v in g.iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteGradient);
            }
            sq += v * v;
        }
        if sq == 0.0 {
            return Ok(0.0);
        }
        self.grad_sq_sum += sq;
        let eta = (self.epsilon + self.grad_sq_sum).powf(-0.5);
        self.weights.scaled_add(-eta, &g);
        if let OcoMode::Projected { radius } = self.mode {
            let norm = frobenius(self.weights.view());
            if norm > radius {
                self.weights *= radius / norm;
            }
        }
        Ok(eta)
    }
}

pub fn frobenius(m: ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn starts_at_zero() {
        let s = OcoState::new(2, 3, OcoMode::Unprojected).unwrap();
        assert_eq!(s.weights(), Array2::<f64>::zeros((2, 3)));
        assert_eq!(s.grad_sq_sum(), 0.0);
        let p = OcoState::new(6, 80, OcoMode::Projected { radius: 1.0 }).unwrap();
        assert_eq!(frobenius(p.weights()), 0.0);
        assert!(OcoState::new(0, 3, OcoMode::Unprojected).is_err());
        assert!(OcoState::new(2, 3, OcoMode::Projected { radius: 0.0 }).is_err());
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = OcoState::new(2, 2, OcoMode::Unprojected).unwrap();
        s.update(array![[1.0, 0.0], [0.0, 0.0]].view()).unwrap();
        let before = s.clone();
        s.update(Array2::zeros((2, 2)).view()).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn first_step_normalises_the_gradient() {
        let mut s = OcoState::new(2, 2, OcoMode::Unprojected).unwrap();
        let g = array![[3.0, 0.0], [0.0, -4.0]];
        s.update(g.view()).unwrap();
        let scale = (1e-8f64 + 25.0).sqrt();
        for (w, v) in s.weights().iter().zip(g.iter()) {
            assert!((w + v / scale).abs() < 1e-15);
        }
        assert_eq!(s.grad_sq_sum(), 25.0);
    }

    #[test]
    fn projection_lands_on_the_sphere() {
        let mut s = OcoState::new(2, 2, OcoMode::Projected { radius: 1.0 }).unwrap();
        s.update(array![[1e9, -1e9], [0.0, 3e9]].view()).unwrap();
        assert!((frobenius(s.weights()) - 1.0).abs() < 1e-12);

        let mut s = OcoState::new(1, 2, OcoMode::Projected { radius: 0.5 }).unwrap();
        s.update(array![[1e6, 0.0]].view()).unwrap();
        assert!((frobenius(s.weights()) - 0.5).abs() < 1e-15);
        for _ in 0..50 {
            s.update(array![[-3.0, 7.0]].view()).unwrap();
            assert!(frobenius(s.weights()) <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut s = OcoState::new(1, 2, OcoMode::Unprojected).unwrap();
        assert_eq!(
            s.update(array![[f64::NAN, 0.0]].view()),
            Err(Error::NonFiniteGradient)
        );
        assert!(s.update(array![[1.0]].view()).is_err());
    }
}
