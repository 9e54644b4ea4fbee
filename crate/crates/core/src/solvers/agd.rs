//! Accelerated gradient descent tolerant of inexact gradient evaluations.
//!
//! The three-sequence recursion contracts the objective gap by `(1 - tau)`
//! per step and degrades gracefully when each gradient carries a bounded
//! additive error: the suboptimality floor is proportional to the squared
//! error over the strong convexity.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A smooth, strongly convex quadratic objective exposed through its
/// (possibly inexact) gradient.
pub struct QuadraticOracle<F: FnMut(&DVector<f64>) -> DVector<f64>> {
    gradient: F,
    smoothness: f64,
    strong_convexity: f64,
}

impl<F: FnMut(&DVector<f64>) -> DVector<f64>> QuadraticOracle<F> {
    pub fn new(gradient: F, smoothness: f64, strong_convexity: f64) -> Result<Self> {
        if !(strong_convexity > 0.0 && strong_convexity <= smoothness) {
            return Err(Error::Precondition(format!(
                "oracle needs 0 < sigma <= L, got sigma = {strong_convexity}, L = {smoothness}"
            )));
        }
        Ok(Self {
            gradient,
            smoothness,
            strong_convexity,
        })
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }
}

/// Momentum coefficient `tau = 2 / (1 + sqrt(8 L / sigma + 1))`.
pub fn agd_tau(smoothness: f64, strong_convexity: f64) -> f64 {
    2.0 / (1.0 + (8.0 * smoothness / strong_convexity + 1.0).sqrt())
}

/// One solver state; `step` consumes the gradient evaluated at `x`.
pub(crate) struct AgdState {
    pub tau: f64,
    pub eta: f64,
    pub inv_l: f64,
    pub sigma: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

impl AgdState {
    pub fn new(smoothness: f64, strong_convexity: f64, x0: DVector<f64>) -> Self {
        let tau = agd_tau(smoothness, strong_convexity);
        Self {
            tau,
            eta: 1.0 / (tau * smoothness),
            inv_l: 1.0 / smoothness,
            sigma: strong_convexity,
            x: x0.clone(),
            y: x0.clone(),
            z: x0,
        }
    }

    /// Computes the next query point `x_{k+1}`.
    pub fn advance_x(&mut self) {
        // x <- tau z + (1 - tau) y
        self.x.copy_from(&self.z);
        self.x *= self.tau;
        self.x.axpy(1.0 - self.tau, &self.y, 1.0);
    }

    /// Applies the gradient step given `g ~ grad f(x_{k+1})`.
    pub fn apply_gradient(&mut self, g: &DVector<f64>) {
        // y <- x - g / L
        self.y.copy_from(&self.x);
        self.y.axpy(-self.inv_l, g, 1.0);
        // z <- (z + eta sigma x - eta g) / (1 + eta sigma)
        let es = self.eta * self.sigma;
        self.z.axpy(es, &self.x, 1.0);
        self.z.axpy(-self.eta, g, 1.0);
        self.z /= 1.0 + es;
    }

    pub fn is_finite(&self) -> bool {
        self.y.iter().all(|v| v.is_finite()) && self.z.iter().all(|v| v.is_finite())
    }
}

/// Runs `iterations` steps and returns the gradient-step iterate `y_T`.
pub fn agd_inexact<F: FnMut(&DVector<f64>) -> DVector<f64>>(
    oracle: &mut QuadraticOracle<F>,
    x0: &DVector<f64>,
    iterations: usize,
) -> Result<DVector<f64>> {
    let mut st = AgdState::new(oracle.smoothness, oracle.strong_convexity, x0.clone());
    for _ in 0..iterations {
        st.advance_x();
        let g = (oracle.gradient)(&st.x);
        st.apply_gradient(&g);
        if !st.is_finite() {
            return Err(Error::Overflow("agd_inexact"));
        }
    }
    Ok(st.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_quadratic_solves_in_one_step() {
        // f(x) = |x|^2 / 2, L = sigma = 1: y_1 = x_1 - grad(x_1) = 0 exactly.
        let mut oracle = QuadraticOracle::new(|x: &DVector<f64>| x.clone(), 1.0, 1.0).unwrap();
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let y = agd_inexact(&mut oracle, &x0, 1).unwrap();
        assert_eq!(y, DVector::zeros(2));
    }

    #[test]
    fn anisotropic_quadratic_converges() {
        // f(x) = x^T diag(1, 100) x / 2
        let diag = [1.0, 100.0];
        let mut oracle = QuadraticOracle::new(
            move |x: &DVector<f64>| DVector::from_fn(2, |i, _| diag[i] * x[i]),
            100.0,
            1.0,
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let y = agd_inexact(&mut oracle, &x0, 400).unwrap();
        assert!(y.norm_squared() <= 1e-10, "|y|^2 = {}", y.norm_squared());
    }

    #[test]
    fn noisy_gradients_hit_theoretical_floor() {
        use rand::{Rng, SeedableRng};
        let diag = [1.0, 100.0];
        let (l, sigma) = (100.0, 1.0);
        let eps = 1e-3;
        for seed in 0..20u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut oracle = QuadraticOracle::new(
                move |x: &DVector<f64>| {
                    let mut g = DVector::from_fn(2, |i, _| diag[i] * x[i]);
                    let mut noise = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0f64));
                    let n = noise.norm();
                    if n > 0.0 {
                        noise *= eps / n;
                    }
                    g += noise;
                    g
                },
                l,
                sigma,
            )
            .unwrap();
            let x0 = DVector::from_vec(vec![1.0, 1.0]);
            let y = agd_inexact(&mut oracle, &x0, 1500).unwrap();
            let f = 0.5 * (diag[0] * y[0] * y[0] + diag[1] * y[1] * y[1]);
            assert!(
                f <= 10.0 * eps * eps / sigma,
                "seed {seed}: suboptimality {f} above floor"
            );
        }
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(QuadraticOracle::new(|x: &DVector<f64>| x.clone(), 1.0, 2.0).is_err());
        assert!(QuadraticOracle::new(|x: &DVector<f64>| x.clone(), 1.0, 0.0).is_err());
    }
}
