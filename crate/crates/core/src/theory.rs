//! Convergence constants for error-feedback gradient coding.
//!
//! [`xi1`] and [`xi2`] bound the accumulated error energy
//! `Σ_t ‖Σᵢ eᵢ^{t+1}‖² ≤ (T+1)γ²ξ₁ + γ²ξ₂ Σ_t ‖∇F(θ^t)‖²`, valid for
//! `δ < 1/2` and `q_A < (2δ+1)/2`. [`epsilons`] turns them into the
//! constants `ε₀, ε₁` of the rate
//!
//! ```text
//! (1/(T+1)) Σ_t ‖∇F(θ^t)‖² ≤ ε₁φ / (√(T+1) − ε₀φ) + (F(θ⁰) − F*) / (φ√(T+1) − ε₀φ²)
//! ```
//!
//! for a constant step `γ = φ/√(T+1)`, see [`convergence_bound`].

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::rng::{domain, RandomStream};
use crate::task::LinearRegressionTask;

/// Power-iteration stopping rule for [`estimate_smoothness`].
pub const POWER_ITERATION_TOL: f64 = 1e-8;
pub const POWER_ITERATION_MAX: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    /// straggler probability `p`
    pub p: f64,
    /// contraction constant `δ`
    pub delta: f64,
    /// aggregate compression discrepancy `q_A`
    pub q_a: f64,
    pub devices: usize,
    pub subsets: usize,
    /// allocation deficit `ϑ`
    pub vartheta: f64,
    /// smoothness `L`
    pub smoothness: f64,
    /// heterogeneity bound `β`
    pub beta: f64,
    /// `F(θ⁰)`
    pub f0: f64,
    /// lower bound `F*`
    pub f_star: f64,
    /// step scale `φ`, with `γ = φ/√(T+1)`
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    pub xi1: f64,
    pub xi2: f64,
    pub eps0: f64,
    pub eps1: f64,
    /// `ρ₀` the constants were evaluated at
    pub rho0: f64,
}

impl TheoryInputs {
    /// `1 − [(1−p)(2δ+1)/2 + p]`
    fn one_minus_a(&self) -> f64 {
        1.0 - ((1.0 - self.p) * (2.0 * self.delta + 1.0) / 2.0 + self.p)
    }

    /// `2(1−p)δ + p`
    fn b(&self) -> f64 {
        2.0 * (1.0 - self.p) * self.delta + self.p
    }

    /// `1/N + 2ϑ/M²`
    fn spread(&self) -> f64 {
        1.0 / self.devices as f64 + 2.0 * self.vartheta / (self.subsets as f64).powi(2)
    }

    /// `p/((1−p)N) + 1 + 2pϑ/((1−p)M²)`, the gradient coefficient of the
    /// second-moment bound.
    pub fn moment_coefficient(&self) -> f64 {
        let p = self.p;
        p / ((1.0 - p) * self.devices as f64)
            + 1.0
            + 2.0 * p * self.vartheta / ((1.0 - p) * (self.subsets as f64).powi(2))
    }

    /// `pβ²ϑ/(1−p)`
    fn straggler_noise(&self) -> f64 {
        self.p * self.beta * self.beta * self.vartheta / (1.0 - self.p)
    }

    pub fn check_error_bound_conditions(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::config(format!("need 0 <= p < 1, got {}", self.p)));
        }
        if !(self.delta >= 0.0 && self.delta < 0.5 && self.q_a >= 0.0 && self.q_a < (2.0 * self.delta + 1.0) / 2.0) {
            return Err(Error::ConvergenceConditions {
                delta: self.delta,
                q_a: self.q_a,
            });
        }
        Ok(())
    }
}

/// `num / den`, taken as zero when the numerator vanishes (the `δp/(2(1−p)δ+p)`
/// factors at `δ = p = 0`).
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn xi1(inputs: &TheoryInputs) -> Result<f64> {
    inputs.check_error_bound_conditions()?;
    let TheoryInputs {
        p, delta, beta, vartheta, ..
    } = *inputs;
    let b = inputs.b();
    let first = 8.0 * beta * beta * p * delta * vartheta / (1.0 - p);
    let second = ratio((4.0 * delta + 2.0) * 4.0 * delta * p * beta * beta * vartheta, b) / (1.0 - b);
    Ok((first + second) / inputs.one_minus_a())
}

pub fn xi2(inputs: &TheoryInputs) -> Result<f64> {
    inputs.check_error_bound_conditions()?;
    let TheoryInputs { p, delta, q_a, .. } = *inputs;
    let a = 1.0 - inputs.one_minus_a();
    let b = inputs.b();
    let spread = inputs.spread();
    let first = 4.0 * p * delta / (1.0 - p) * spread;
    let second = q_a * (2.0 * delta + 1.0) / ((1.0 - p) * (2.0 * delta + 1.0 - 2.0 * q_a));
    let third = a * ratio((4.0 * delta + 2.0) * 2.0 * delta * p, b) * spread / (a - b);
    Ok((first + second + third) / inputs.one_minus_a())
}

/// `ε̃₀(ρ₀)`, the rate constant before optimising over `ρ₀ > 0`.
pub fn eps0_at(inputs: &TheoryInputs, xi2: f64, rho0: f64) -> f64 {
    let l = inputs.smoothness;
    (l + rho0) / 2.0 * inputs.moment_coefficient() + l * l * xi2 / (2.0 * rho0)
}

/// `ε̃₁(ρ₀)`
pub fn eps1_at(inputs: &TheoryInputs, xi1: f64, rho0: f64) -> f64 {
    let l = inputs.smoothness;
    l * l / (2.0 * rho0) * xi1 + (l / 2.0 + rho0 / 2.0) * 2.0 * inputs.straggler_noise()
}

/// `ε₀, ε₁` at the optimal `ρ₀ = √(L²ξ₁(1−p)/(2pβ²ϑ))`. When that value is
/// zero or undefined (`p`, `β`, `ϑ` or `ξ₁` vanish) the pair is evaluated at
/// `ρ₀ = L` instead, which is a valid though not optimal choice.
pub fn epsilons(inputs: &TheoryInputs, xi1: f64, xi2: f64) -> TheoryConstants {
    let TheoryInputs {
        p,
        beta,
        vartheta,
        smoothness: l,
        ..
    } = *inputs;
    let noise = p * beta * beta * vartheta;
    let rho_opt = (l * l * xi1 * (1.0 - p) / (2.0 * noise)).sqrt();
    if rho_opt.is_finite() && rho_opt > 0.0 {
        let coeff = inputs.moment_coefficient();
        let eps0 = l / 2.0 * coeff
            + l * xi2 * beta * (p * vartheta).sqrt() / (2.0 * xi1 * (1.0 - p)).sqrt()
            + l * (xi1 * (1.0 - p)).sqrt() / (2.0 * (2.0 * noise).sqrt()) * coeff;
        let eps1 = (2.0 * l * l * xi1 * noise / (1.0 - p)).sqrt() + l * noise / (1.0 - p);
        TheoryConstants {
            xi1,
            xi2,
            eps0,
            eps1,
            rho0: rho_opt,
        }
    } else {
        let rho0 = if l > 0.0 { l } else { 1.0 };
        TheoryConstants {
            xi1,
            xi2,
            eps0: eps0_at(inputs, xi2, rho0),
            eps1: eps1_at(inputs, xi1, rho0),
            rho0,
        }
    }
}

/// All four constants, refusing inputs outside `δ < 1/2, q_A < (2δ+1)/2`.
pub fn constants(inputs: &TheoryInputs) -> Result<TheoryConstants> {
    let x1 = xi1(inputs)?;
    let x2 = xi2(inputs)?;
    Ok(epsilons(inputs, x1, x2))
}

/// Smallest horizon `T` for which the rate holds: `T > (ε₀φ)² − 1`.
pub fn min_horizon(inputs: &TheoryInputs, c: &TheoryConstants) -> f64 {
    (c.eps0 * inputs.phi).powi(2) - 1.0
}

pub fn convergence_bound(horizon: u64, inputs: &TheoryInputs, c: &TheoryConstants) -> Result<f64> {
    let min = min_horizon(inputs, c);
    if horizon as f64 <= min {
        return Err(Error::HorizonTooShort { t: horizon, min });
    }
    let phi = inputs.phi;
    let root = ((horizon + 1) as f64).sqrt();
    Ok(c.eps1 * phi / (root - c.eps0 * phi) + (inputs.f0 - inputs.f_star) / (phi * root - c.eps0 * phi * phi))
}

/// Upper bound on `E[‖Σᵢ Iᵢ gᵢ‖² | θ]`.
pub fn second_moment_bound(inputs: &TheoryInputs, grad_norm_sq: f64) -> f64 {
    2.0 * inputs.straggler_noise() + inputs.moment_coefficient() * grad_norm_sq
}

/// `Σ_k z_k z_kᵀ v`
fn gram_apply(task: &LinearRegressionTask, v: &[f64]) -> Vector {
    let mut out = vec![0.0; task.dim()];
    for z in task.features() {
        linalg::axpy(linalg::dot(z, v), z, &mut out);
    }
    out
}

/// Largest eigenvalue of `Σ_k z_k z_kᵀ` (the smoothness constant of the
/// linear-regression loss) by power iteration from a fixed random start.
pub fn estimate_smoothness(task: &LinearRegressionTask) -> Result<f64> {
    let mut v = RandomStream::derive(0, &[domain::PROBE]).normal_vector(task.dim(), 0.0, 1.0);
    let n = linalg::norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATION_MAX {
        let w = gram_apply(task, &v);
        let rayleigh = linalg::dot(&v, &w);
        let wn = linalg::norm(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        if (rayleigh - estimate).abs() <= POWER_ITERATION_TOL * rayleigh.abs() {
            return Ok(rayleigh);
        }
        estimate = rayleigh;
        v = w.into_iter().map(|x| x / wn).collect();
    }
    Err(Error::NonConvergence {
        iterations: POWER_ITERATION_MAX,
        estimate,
    })
}

/// `max_{θ, k} ‖∇f_k(θ) − ∇F(θ)/M‖` over the probe points: an empirical
/// lower estimate of `β`.
pub fn estimate_beta(task: &LinearRegressionTask, thetas: &[Vector]) -> Result<f64> {
    if thetas.is_empty() {
        return Err(Error::config("estimate_beta needs at least one probe point"));
    }
    let m = task.samples() as f64;
    let mut best: f64 = 0.0;
    for theta in thetas {
        let mean = linalg::scale(1.0 / m, &task.full_gradient(theta));
        for k in 0..task.samples() {
            let gk = task.subset_gradient(k, theta)?;
            best = best.max(linalg::norm(&linalg::sub(&gk, &mean)));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> TheoryInputs {
        TheoryInputs {
            p: 0.2,
            delta: 0.4,
            q_a: 0.3,
            devices: 100,
            subsets: 100,
            vartheta: 19.0,
            smoothness: 2.0,
            beta: 1.5,
            f0: 10.0,
            f_star: 0.0,
            phi: 0.01,
        }
    }

    #[test]
    fn xi1_vanishes() {
        assert_eq!(xi1(&TheoryInputs { p: 0.0, ..base() }).unwrap(), 0.0);
        assert_eq!(xi1(&TheoryInputs { delta: 0.0, ..base() }).unwrap(), 0.0);
        assert_eq!(xi1(&TheoryInputs { vartheta: 0.0, ..base() }).unwrap(), 0.0);
    }

    #[test]
    fn xi2_vanishing_delta_and_p() {
        let v = xi2(&TheoryInputs {
            p: 0.0,
            delta: 0.0,
            q_a: 0.1,
            ..base()
        })
        .unwrap();
        assert!((v - 0.25).abs() < 1e-15, "{v}");
    }

    #[test]
    fn conditions_refused() {
        assert!(matches!(xi1(&TheoryInputs { delta: 0.5, ..base() }), Err(Error::ConvergenceConditions { .. })));
        assert!(matches!(xi2(&TheoryInputs { q_a: 0.9, ..base() }), Err(Error::ConvergenceConditions { .. })));
    }

    #[test]
    fn eps1_hand_value() {
        let inputs = TheoryInputs {
            smoothness: 1.0,
            p: 0.5,
            beta: 1.0,
            vartheta: 1.0,
            ..base()
        };
        let c = epsilons(&inputs, 2.0, 0.1);
        assert!((c.eps1 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn eps_degenerate_cases() {
        let c = constants(&TheoryInputs { vartheta: 0.0, ..base() }).unwrap();
        assert_eq!(c.eps1, 0.0);
        assert!(c.eps0.is_finite());
        let c = constants(&TheoryInputs { p: 0.0, ..base() }).unwrap();
        assert_eq!(c.eps1, 0.0);
        assert_eq!(c.rho0, base().smoothness);
    }

    #[test]
    fn optimal_rho_matches_closed_form() {
        let inputs = base();
        let c = constants(&inputs).unwrap();
        let e0 = eps0_at(&inputs, c.xi2, c.rho0);
        let e1 = eps1_at(&inputs, c.xi1, c.rho0);
        assert!((e0 - c.eps0).abs() <= 1e-12 * c.eps0);
        assert!((e1 - c.eps1).abs() <= 1e-12 * c.eps1);
        // any other ρ₀ gives a larger ε̃₁
        for r in [0.1, 0.5, 2.0, 10.0] {
            assert!(eps1_at(&inputs, c.xi1, c.rho0 * r) >= c.eps1 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn bound_examples() {
        let inputs = TheoryInputs {
            phi: 1.0,
            f0: 1.0,
            f_star: 0.0,
            ..base()
        };
        let c = TheoryConstants {
            xi1: 0.0,
            xi2: 0.0,
            eps0: 1.0,
            eps1: 1.0,
            rho0: 1.0,
        };
        let b = convergence_bound(99, &inputs, &c).unwrap();
        assert!((b - 2.0 / 9.0).abs() < 1e-15);
        assert!(convergence_bound(396, &inputs, &c).unwrap() < b);
        assert!(matches!(convergence_bound(0, &inputs, &c), Err(Error::HorizonTooShort { .. })));

        let zero = TheoryConstants { eps1: 0.0, ..c };
        let flat = TheoryInputs { f0: 0.0, ..inputs };
        assert_eq!(convergence_bound(99, &flat, &zero).unwrap(), 0.0);
    }

    #[test]
    fn second_moment_bound_examples() {
        assert_eq!(second_moment_bound(&TheoryInputs { p: 0.0, ..base() }, 3.5), 3.5);
        let v = second_moment_bound(
            &TheoryInputs {
                p: 0.5,
                beta: 1.0,
                vartheta: 19.0,
                ..base()
            },
            0.0,
        );
        assert!((v - 38.0).abs() < 1e-12);
        let big_n = TheoryInputs {
            vartheta: 0.0,
            devices: 1_000_000_000,
            ..base()
        };
        assert!((second_moment_bound(&big_n, 2.0) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn smoothness_examples() {
        let single = LinearRegressionTask::new(vec![vec![3.0, 4.0]], vec![0.0], vec![0.0, 0.0]).unwrap();
        assert!((estimate_smoothness(&single).unwrap() - 25.0).abs() < 1e-6);
        let rows = (0..4).map(|k| (0..4).map(|j| f64::from(u8::from(j == k))).collect()).collect();
        let id = LinearRegressionTask::new(rows, vec![0.0; 4], vec![0.0; 4]).unwrap();
        assert!((estimate_smoothness(&id).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn beta_examples() {
        let mut rng = RandomStream::new(1);
        let one = LinearRegressionTask::generate(1, 3, &mut rng).unwrap();
        assert_eq!(estimate_beta(&one, &[vec![0.3, -1.0, 2.0]]).unwrap(), 0.0);

        let same = LinearRegressionTask::new(vec![vec![1.0, 2.0]; 3], vec![0.5; 3], vec![0.0; 2]).unwrap();
        assert!(estimate_beta(&same, &[vec![1.0, -1.0]]).unwrap() < 1e-15);

        let two = LinearRegressionTask::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], vec![0.0; 2]).unwrap();
        let b = estimate_beta(&two, &[vec![1.0, 1.0]]).unwrap();
        assert!((b - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(estimate_beta(&two, &[]).is_err());
    }
}
