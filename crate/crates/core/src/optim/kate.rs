use crate::error::{Error, Result};
use crate::vector::Vector;

use super::{apply_step, check_gradient, HyperParams, Optimizer, StepVector};

/// KATE: AdaGrad without the square root in the denominator, compensated by
/// a growing numerator.
///
/// State per coordinate:
/// * `s_sq = Σ_{τ≤t} g_τ²`, so `b_t² = Δ + s_sq`
/// * `q = Σ_{τ≤t} g_τ² / b_τ²`
/// * `m_t² = η b_t² + q`
///
/// and the step is `ν_t = β m_t / b_t²`. For `Δ = 0` this is exactly the
/// recursion `m_t² = m_{t-1}² + η g_t² + g_t²/b_t²`; for `Δ > 0` the closed
/// form carries an extra `η Δ` in `m_t²`.
///
/// Coordinates with `b_t² = 0` (only possible with `Δ = 0` before the first
/// nonzero gradient) take a zero step and accumulate nothing.
#[derive(Debug, Clone)]
pub struct Kate {
    beta: f64,
    delta: f64,
    eta: Vector,
    s_sq: Vector,
    q: Vector,
    t: u64,
}

impl Kate {
    pub const NAME: &'static str = "kate";

    pub fn new(hp: &HyperParams, dim: usize) -> Result<Self> {
        hp.validate()?;
        Ok(Kate {
            beta: hp.beta,
            delta: hp.delta,
            eta: hp.eta.resolve(dim)?,
            s_sq: Vector::zeros(dim),
            q: Vector::zeros(dim),
            t: 0,
        })
    }

    /// `b_t²`, the denominator accumulator after the last step.
    pub fn b_sq(&self) -> Vector {
        self.s_sq.iter().map(|s| self.delta + s).collect::<Vec<_>>().into()
    }

    /// `Σ_{τ≤t} g_τ² / b_τ²`.
    pub fn q(&self) -> &Vector {
        &self.q
    }

    /// `m_t² = η b_t² + q`.
    pub fn m_sq(&self) -> Vector {
        self.b_sq()
            .iter()
            .zip(self.eta.iter())
            .zip(self.q.iter())
            .map(|((b, e), q)| e * b + q)
            .collect::<Vec<_>>()
            .into()
    }

    pub fn eta(&self) -> &Vector {
        &self.eta
    }
}

impl Optimizer for Kate {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn iteration(&self) -> u64 {
        self.t
    }

    fn step(&mut self, w: &mut [f64], g: &[f64]) -> Result<StepVector> {
        let d = self.s_sq.dim();
        check_gradient(d, g)?;
        crate::vector::check_dims(d, w.len())?;

        let mut s_next = vec![0.0; d];
        let mut q_next = vec![0.0; d];
        let mut nu = vec![0.0; d];
        for k in 0..d {
            let g2 = g[k] * g[k];
            let s = self.s_sq[k] + g2;
            let b2 = self.delta + s;
            let mut q = self.q[k];
            if b2 > 0.0 {
                q += g2 / b2;
                let m2 = self.eta[k] * b2 + q;
                nu[k] = self.beta * m2.sqrt() / b2;
            }
            if !(s.is_finite() && q.is_finite() && nu[k].is_finite()) {
                return Err(Error::Step(format!("accumulator overflow in coordinate {k}")));
            }
            s_next[k] = s;
            q_next[k] = q;
        }

        self.s_sq = s_next.into();
        self.q = q_next.into();
        self.t += 1;
        apply_step(w, &nu, g);
        Ok(StepVector { nu: nu.into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Eta;
    use proptest::prelude::*;

    /// Scalar transcription of the published recursion (Δ = 0):
    /// b² += g², m² += η g² + g²/b², w −= β m / b² · g.
    fn reference(eta: f64, beta: f64, grads: &[f64]) -> Vec<(f64, f64, f64)> {
        let (mut b2, mut m2, mut w) = (0.0f64, 0.0f64, 0.0f64);
        grads
            .iter()
            .map(|&g| {
                b2 += g * g;
                m2 += eta * g * g + g * g / b2;
                let nu = beta * m2.sqrt() / b2;
                w -= nu * g;
                (b2, nu, w)
            })
            .collect()
    }

    fn kate(beta: f64, eta: f64, delta: f64, d: usize) -> Kate {
        Kate::new(&HyperParams::new(beta, Eta::Scalar(eta), delta).unwrap(), d).unwrap()
    }

    #[test]
    fn first_step_by_hand() {
        let mut opt = kate(1.0, 1.0, 0.0, 1);
        let mut w = [0.0];
        let step = opt.step(&mut w, &[1.0]).unwrap();
        assert_eq!(opt.b_sq().as_slice(), &[1.0]);
        assert_eq!(opt.m_sq().as_slice(), &[2.0]);
        assert_eq!(step.nu[0], 2f64.sqrt());
        assert_eq!(w[0], -(2f64.sqrt()));
        let r = reference(1.0, 1.0, &[1.0]);
        assert_eq!((r[0].1, r[0].2), (step.nu[0], w[0]));
    }

    #[test]
    fn second_step_by_hand() {
        let mut opt = kate(1.0, 0.0, 0.0, 1);
        let mut w = [0.0];
        opt.step(&mut w, &[1.0]).unwrap();
        let step = opt.step(&mut w, &[2.0]).unwrap();
        assert_eq!(opt.b_sq()[0], 5.0);
        assert!((opt.q()[0] - 1.8).abs() < 1e-15);
        assert!((step.nu[0] - 0.2683281573).abs() < 1e-10);
        let r = reference(0.0, 1.0, &[1.0, 2.0]);
        assert!((r[1].1 - step.nu[0]).abs() < 1e-16);
    }

    #[test]
    fn zero_gradient_with_delta_is_still() {
        let mut opt = kate(1.0, 1.0, 0.5, 3);
        let mut w = [1.0, 2.0, 3.0];
        opt.step(&mut w, &[0.0; 3]).unwrap();
        assert_eq!(w, [1.0, 2.0, 3.0]);
        assert_eq!(opt.q().as_slice(), &[0.0; 3]);
        assert_eq!(opt.b_sq().as_slice(), &[0.5; 3]);
        assert_eq!(opt.iteration(), 1);
    }

    #[test]
    fn zero_denominator_coordinate_takes_no_step() {
        let mut opt = kate(1.0, 1.0, 0.0, 2);
        let mut w = [0.0, 0.0];
        let step = opt.step(&mut w, &[1.0, 0.0]).unwrap();
        assert_eq!(step.nu[1], 0.0);
        assert_eq!(w[1], 0.0);
        assert_eq!(opt.q()[1], 0.0);
    }

    #[test]
    fn bad_gradient_leaves_state_untouched() {
        let mut opt = kate(1.0, 1.0, 0.0, 2);
        let mut w = [0.0, 0.0];
        opt.step(&mut w, &[1.0, 1.0]).unwrap();
        let before = (opt.s_sq.clone(), opt.q.clone(), w);
        assert!(matches!(opt.step(&mut w, &[f64::NAN, 1.0]), Err(Error::Step(_))));
        assert!(matches!(opt.step(&mut w, &[1e200, 1.0]), Err(Error::Step(_))));
        assert_eq!((opt.s_sq.clone(), opt.q.clone(), w), before);
        assert_eq!(opt.iteration(), 1);
    }

    proptest! {
        #[test]
        fn matches_reference_recursion(
            grads in prop::collection::vec(-10.0f64..10.0, 1..60),
            eta in 0.0f64..5.0,
            beta in 0.01f64..3.0,
        ) {
            prop_assume!(grads[0] != 0.0);
            let mut opt = kate(beta, eta, 0.0, 1);
            let mut w = [0.0];
            for (g, (b2, nu, wr)) in grads.iter().zip(reference(eta, beta, &grads)) {
                let step = opt.step(&mut w, &[*g]).unwrap();
                prop_assert!((opt.b_sq()[0] - b2).abs() <= 1e-12 * b2);
                prop_assert!((step.nu[0] - nu).abs() <= 1e-10 * nu);
                prop_assert!((w[0] - wr).abs() <= 1e-9 * (1.0 + wr.abs()));
            }
        }

        #[test]
        fn accumulators_match_history(
            grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..100),
            eta in 0.0f64..2.0,
            delta in prop_oneof![Just(0.0), 1e-8f64..10.0],
        ) {
            let mut opt = kate(0.1, eta, delta, 3);
            let mut w = [0.0; 3];
            let mut history: Vec<Vec<f64>> = Vec::new();
            for g in &grads {
                let step = opt.step(&mut w, g).unwrap();
                history.push(g.clone());
                for k in 0..3 {
                    // recompute b_τ² and Σ g_τ²/b_τ² from the stored history
                    let mut s = 0.0;
                    let mut q = 0.0;
                    for h in &history {
                        s += h[k] * h[k];
                        let b2 = delta + s;
                        if b2 > 0.0 {
                            q += h[k] * h[k] / b2;
                        }
                    }
                    let b2 = delta + s;
                    let m2 = eta * b2 + q;
                    let got = opt.m_sq()[k];
                    prop_assert!((got - m2).abs() <= 1e-12 * m2.max(f64::MIN_POSITIVE));
                    if b2 > 0.0 {
                        // step lower bound ν ≥ β √η / b
                        let lower = 0.1 * eta.sqrt() / b2.sqrt();
                        prop_assert!(step.nu[k] >= lower * (1.0 - 1e-15));
                    }
                }
            }
        }
    }
}
