//! Compression functions and their contraction constants.
//!
//! Biased kinds ([`CompressorSpec::GroupedSignBit`], [`CompressorSpec::TopK`])
//! satisfy `‖C(x) − x‖² ≤ δ‖x‖²` deterministically. The unbiased kinds
//! ([`CompressorSpec::StochasticSignBit`], [`CompressorSpec::AmplifiedRandK`])
//! satisfy `E[C(x)] = x` over the supplied random stream.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{self, check_dim, Vector};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq)]
pub enum CompressorSpec {
    /// Per group `I_m`: `sign(x_j) · ‖x_m‖₁ / |I_m|`. Groups are 0-based index
    /// sets partitioning `0..D`.
    GroupedSignBit { groups: Vec<Vec<usize>> },
    /// Keep the `k` largest-magnitude entries, ties to the lowest index.
    TopK { k: usize, dim: usize },
    /// `‖x‖_∞ · ξ_j` with `P(ξ_j = +1) = (1 + x_j/‖x‖_∞)/2`.
    StochasticSignBit,
    /// `k` uniformly chosen coordinates scaled by `D/k`.
    AmplifiedRandK { k: usize, dim: usize },
    Identity,
}

impl CompressorSpec {
    /// Plain sign-bit quantization: a single group covering all `dim` entries.
    pub fn sign(dim: usize) -> Result<Self> {
        Self::grouped_sign(dim, dim)
    }

    /// Contiguous groups of `group_size`; the last group takes the remainder.
    pub fn grouped_sign(dim: usize, group_size: usize) -> Result<Self> {
        if dim == 0 || group_size == 0 {
            return Err(Error::config("grouped sign-bit needs dim >= 1 and group_size >= 1"));
        }
        let groups = (0..dim)
            .step_by(group_size)
            .map(|start| (start..(start + group_size).min(dim)).collect())
            .collect();
        Ok(CompressorSpec::GroupedSignBit { groups })
    }

    /// Explicit groups; must be non-empty, disjoint and cover `0..D` exactly.
    pub fn grouped_sign_from_groups(groups: Vec<Vec<usize>>) -> Result<Self> {
        let dim: usize = groups.iter().map(Vec::len).sum();
        if dim == 0 {
            return Err(Error::config("grouped sign-bit needs at least one index"));
        }
        let mut seen = vec![false; dim];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::config("grouped sign-bit group is empty"));
            }
            for &j in g {
                if j >= dim || seen[j] {
                    return Err(Error::config(format!(
                        "grouped sign-bit groups must partition 0..{dim}; bad index {j}"
                    )));
                }
                seen[j] = true;
            }
        }
        Ok(CompressorSpec::GroupedSignBit { groups })
    }

    pub fn top_k(k: usize, dim: usize) -> Result<Self> {
        check_k(k, dim)?;
        Ok(CompressorSpec::TopK { k, dim })
    }

    pub fn rand_k(k: usize, dim: usize) -> Result<Self> {
        check_k(k, dim)?;
        Ok(CompressorSpec::AmplifiedRandK { k, dim })
    }

    /// Input dimension the spec is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            CompressorSpec::GroupedSignBit { groups } => Some(groups.iter().map(Vec::len).sum()),
            CompressorSpec::TopK { dim, .. } | CompressorSpec::AmplifiedRandK { dim, .. } => {
                Some(*dim)
            }
            CompressorSpec::StochasticSignBit | CompressorSpec::Identity => None,
        }
    }

    pub fn is_unbiased(&self) -> bool {
        matches!(
            self,
            CompressorSpec::StochasticSignBit
                | CompressorSpec::AmplifiedRandK { .. }
                | CompressorSpec::Identity
        )
    }

    pub fn is_biased(&self) -> bool {
        matches!(
            self,
            CompressorSpec::GroupedSignBit { .. } | CompressorSpec::TopK { .. } | CompressorSpec::Identity
        )
    }

    /// Whether `compress` consumes randomness.
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            CompressorSpec::StochasticSignBit | CompressorSpec::AmplifiedRandK { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            CompressorSpec::GroupedSignBit { groups } if groups.len() == 1 => "sign",
            CompressorSpec::GroupedSignBit { .. } => "grouped_sign",
            CompressorSpec::TopK { .. } => "top_k",
            CompressorSpec::StochasticSignBit => "stochastic_sign",
            CompressorSpec::AmplifiedRandK { .. } => "rand_k",
            CompressorSpec::Identity => "identity",
        }
    }

    pub fn compress(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vector> {
        if let Some(d) = self.dim() {
            check_dim(d, x.len())?;
        }
        Ok(match self {
            CompressorSpec::GroupedSignBit { groups } => grouped_sign_bit(groups, x),
            CompressorSpec::TopK { k, .. } => top_k(*k, x),
            CompressorSpec::StochasticSignBit => stochastic_sign_bit(x, rng),
            CompressorSpec::AmplifiedRandK { k, .. } => amplified_rand_k(*k, x, rng),
            CompressorSpec::Identity => x.to_vec(),
        })
    }

    /// Contraction constant `δ` of a biased compressor.
    pub fn delta(&self) -> Result<f64> {
        match self {
            CompressorSpec::GroupedSignBit { groups } => {
                let largest = groups.iter().map(Vec::len).max().unwrap_or(1);
                Ok(1.0 - 1.0 / largest as f64)
            }
            CompressorSpec::TopK { k, dim } => Ok(1.0 - *k as f64 / *dim as f64),
            CompressorSpec::Identity => Ok(0.0),
            CompressorSpec::StochasticSignBit | CompressorSpec::AmplifiedRandK { .. } => Err(
                Error::Undefined("δ undefined for unbiased compressor".into()),
            ),
        }
    }

    /// Variance factor `ω` of an unbiased compressor acting on `dim`
    /// coordinates: `E‖C(x) − x‖² ≤ ω‖x‖²`.
    pub fn variance_factor(&self, dim: usize) -> Result<f64> {
        match self {
            CompressorSpec::StochasticSignBit => Ok(dim.saturating_sub(1) as f64),
            CompressorSpec::AmplifiedRandK { k, dim } => Ok(*dim as f64 / *k as f64 - 1.0),
            CompressorSpec::Identity => Ok(0.0),
            CompressorSpec::GroupedSignBit { .. } | CompressorSpec::TopK { .. } => Err(Error::Undefined(
                "ω undefined for biased compressor".into(),
            )),
        }
    }
}

fn check_k(k: usize, dim: usize) -> Result<()> {
    if k == 0 || k > dim {
        return Err(Error::config(format!("need 1 <= k <= D, got k = {k}, D = {dim}")));
    }
    Ok(())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn grouped_sign_bit(groups: &[Vec<usize>], x: &[f64]) -> Vector {
    let mut out = vec![0.0; x.len()];
    for g in groups {
        let l1: f64 = g.iter().map(|&j| x[j].abs()).sum();
        let mag = l1 / g.len() as f64;
        for &j in g {
            out[j] = sign(x[j]) * mag;
        }
    }
    out
}

fn top_k(k: usize, x: &[f64]) -> Vector {
    let mut out = vec![0.0; x.len()];
    if k >= x.len() {
        out.copy_from_slice(x);
        return out;
    }
    let by_magnitude = |a: &usize, b: &usize| -> Ordering {
        x[*b].abs().total_cmp(&x[*a].abs()).then(a.cmp(b))
    };
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.select_nth_unstable_by(k - 1, by_magnitude);
    for &j in &idx[..k] {
        out[j] = x[j];
    }
    out
}

fn stochastic_sign_bit(x: &[f64], rng: &mut RandomStream) -> Vector {
    let s = linalg::norm_inf(x);
    // draw one uniform per coordinate regardless of x so consumption is fixed
    let draws: Vec<f64> = (0..x.len()).map(|_| rng.uniform()).collect();
    if s == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter()
        .zip(draws)
        .map(|(&xj, u)| {
            let p_plus = 0.5 * (1.0 + xj / s);
            if u < p_plus {
                s
            } else {
                -s
            }
        })
        .collect()
}

fn amplified_rand_k(k: usize, x: &[f64], rng: &mut RandomStream) -> Vector {
    let d = x.len();
    let scale = d as f64 / k as f64;
    let mut out = vec![0.0; d];
    for j in rng.sample_indices(d, k) {
        out[j] = scale * x[j];
    }
    out
}

/// `‖Σᵢ(xᵢ − C(xᵢ))‖² / ‖Σᵢ xᵢ‖²` for one realisation of the compressed
/// outputs.
pub fn qa_ratio(inputs: &[Vector], outputs: &[Vector]) -> Result<f64> {
    let dim = inputs.first().map(Vec::len).unwrap_or(0);
    let mut sum_in = vec![0.0; dim];
    let mut sum_err = vec![0.0; dim];
    for (x, c) in inputs.iter().zip(outputs) {
        check_dim(dim, x.len())?;
        check_dim(dim, c.len())?;
        for j in 0..dim {
            sum_in[j] += x[j];
            sum_err[j] += x[j] - c[j];
        }
    }
    let denom = linalg::norm_sq(&sum_in);
    if denom == 0.0 {
        return Err(Error::Undefined("q_A ratio undefined for zero aggregate".into()));
    }
    Ok(linalg::norm_sq(&sum_err) / denom)
}

/// Empirical aggregate discrepancy: mean over `trials` draws of
/// [`qa_ratio`]. Deterministic compressors are evaluated once.
pub fn measure_qa(
    xs: &[Vector],
    spec: &CompressorSpec,
    trials: usize,
    rng: &mut RandomStream,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::config("measure_qa needs trials >= 1"));
    }
    let trials = if spec.is_stochastic() { trials } else { 1 };
    let mut total = 0.0;
    for _ in 0..trials {
        let outs = xs
            .iter()
            .map(|x| spec.compress(x, rng))
            .collect::<Result<Vec<_>>>()?;
        total += qa_ratio(xs, &outs)?;
    }
    Ok(total / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rng() -> RandomStream {
        RandomStream::new(11)
    }

    const X: [f64; 4] = [1.0, -2.0, 3.0, -4.0];

    #[test]
    fn sign_single_group() {
        let c = CompressorSpec::sign(4).unwrap();
        assert_eq!(c.compress(&X, &mut rng()).unwrap(), vec![2.5, -2.5, 2.5, -2.5]);
    }

    #[test]
    fn sign_two_groups() {
        let c = CompressorSpec::grouped_sign_from_groups(vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(c.compress(&X, &mut rng()).unwrap(), vec![1.5, -1.5, 3.5, -3.5]);
        assert_eq!(c, CompressorSpec::grouped_sign(4, 2).unwrap());
    }

    #[test]
    fn sign_of_zero_is_zero() {
        let c = CompressorSpec::sign(3).unwrap();
        assert_eq!(c.compress(&[0.0, 3.0, -3.0], &mut rng()).unwrap(), vec![0.0, 2.0, -2.0]);
    }

    #[test]
    fn top_k_examples() {
        let c = CompressorSpec::top_k(2, 4).unwrap();
        assert_eq!(c.compress(&X, &mut rng()).unwrap(), vec![0.0, 0.0, 3.0, -4.0]);
        let full = CompressorSpec::top_k(4, 4).unwrap();
        assert_eq!(full.compress(&X, &mut rng()).unwrap(), X.to_vec());
    }

    #[test]
    fn top_k_ties_lowest_index() {
        let c = CompressorSpec::top_k(2, 4).unwrap();
        let out = c.compress(&[1.0, -1.0, 1.0, 1.0], &mut rng()).unwrap();
        assert_eq!(out, vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_vector_fixed_point() {
        let zero = vec![0.0; 4];
        for spec in [
            CompressorSpec::sign(4).unwrap(),
            CompressorSpec::grouped_sign(4, 2).unwrap(),
            CompressorSpec::top_k(2, 4).unwrap(),
            CompressorSpec::StochasticSignBit,
            CompressorSpec::rand_k(2, 4).unwrap(),
            CompressorSpec::Identity,
        ] {
            assert_eq!(spec.compress(&zero, &mut rng()).unwrap(), zero, "{}", spec.name());
        }
    }

    #[test]
    fn rand_k_full_selection_is_identity() {
        let c = CompressorSpec::rand_k(4, 4).unwrap();
        assert_eq!(c.compress(&X, &mut rng()).unwrap(), X.to_vec());
    }

    #[test]
    fn rand_k_single_scaled_by_dim() {
        let c = CompressorSpec::rand_k(1, 2).unwrap();
        let out = c.compress(&[2.0, 4.0], &mut rng()).unwrap();
        assert!(out == vec![4.0, 0.0] || out == vec![0.0, 8.0], "{out:?}");
    }

    #[test]
    fn dimension_mismatch() {
        let c = CompressorSpec::top_k(2, 4).unwrap();
        assert!(matches!(
            c.compress(&[1.0, 2.0], &mut rng()),
            Err(Error::DimensionMismatch { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!(CompressorSpec::top_k(0, 4).is_err());
        assert!(CompressorSpec::top_k(5, 4).is_err());
        assert!(CompressorSpec::grouped_sign_from_groups(vec![vec![0, 1], vec![1]]).is_err());
        assert!(CompressorSpec::grouped_sign_from_groups(vec![vec![0], vec![]]).is_err());
        assert!(CompressorSpec::grouped_sign_from_groups(vec![vec![0, 3]]).is_err());
    }

    #[test]
    fn deltas() {
        assert!((CompressorSpec::top_k(2, 100).unwrap().delta().unwrap() - 0.98).abs() < 1e-15);
        assert_eq!(CompressorSpec::Identity.delta().unwrap(), 0.0);
        assert_eq!(CompressorSpec::grouped_sign(16, 4).unwrap().delta().unwrap(), 0.75);
        assert!(CompressorSpec::StochasticSignBit.delta().is_err());
        assert!(CompressorSpec::rand_k(1, 2).unwrap().delta().is_err());
    }

    #[test]
    fn qa_examples() {
        let x = X.to_vec();
        let top = CompressorSpec::top_k(2, 4).unwrap();
        let qa = measure_qa(&[x.clone(), x.clone()], &top, 1, &mut rng()).unwrap();
        assert!((qa - 20.0 / 120.0).abs() < 1e-15);

        let id = measure_qa(&[x.clone(), vec![0.5; 4]], &CompressorSpec::Identity, 1, &mut rng()).unwrap();
        assert_eq!(id, 0.0);

        let sign = CompressorSpec::sign(4).unwrap();
        let single = measure_qa(std::slice::from_ref(&x), &sign, 1, &mut rng()).unwrap();
        let c = sign.compress(&x, &mut rng()).unwrap();
        let per_vec = linalg::norm_sq(&linalg::sub(&x, &c)) / linalg::norm_sq(&x);
        assert_eq!(single, per_vec);

        let zero_sum = measure_qa(&[x.clone(), linalg::scale(-1.0, &x)], &top, 1, &mut rng());
        assert!(matches!(zero_sum, Err(Error::Undefined(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).sin()).collect();
        for spec in [CompressorSpec::StochasticSignBit, CompressorSpec::rand_k(5, 32).unwrap()] {
            let a = spec.compress(&x, &mut RandomStream::derive(5, &[1])).unwrap();
            let b = spec.compress(&x, &mut RandomStream::derive(5, &[1])).unwrap();
            assert_eq!(a, b);
        }
    }

    proptest! {
        #[test]
        fn biased_contraction(x in prop::collection::vec(-1e3f64..1e3, 12), gs in 1usize..=12, k in 1usize..=12) {
            for spec in [CompressorSpec::grouped_sign(12, gs).unwrap(), CompressorSpec::top_k(k, 12).unwrap()] {
                let c = spec.compress(&x, &mut rng()).unwrap();
                let lhs = linalg::norm_sq(&linalg::sub(&c, &x));
                let rhs = spec.delta().unwrap() * linalg::norm_sq(&x);
                prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
            }
        }

        #[test]
        fn top_k_support(x in prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 10), k in 1usize..=10) {
            let c = CompressorSpec::top_k(k, 10).unwrap().compress(&x, &mut rng()).unwrap();
            let nnz_in = x.iter().filter(|v| **v != 0.0).count();
            let nnz_out = c.iter().filter(|v| **v != 0.0).count();
            prop_assert_eq!(nnz_out, k.min(nnz_in));
            for (ci, xi) in c.iter().zip(&x) {
                prop_assert!(*ci == 0.0 || ci == xi);
            }
        }

        #[test]
        fn grouped_sign_structure(x in prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 9), gs in 1usize..=9) {
            let spec = CompressorSpec::grouped_sign(9, gs).unwrap();
            let c = spec.compress(&x, &mut rng()).unwrap();
            if let CompressorSpec::GroupedSignBit { groups } = &spec {
                for g in groups {
                    let mags: Vec<f64> = g.iter().map(|&j| c[j].abs()).filter(|m| *m != 0.0).collect();
                    prop_assert!(mags.windows(2).all(|w| w[0] == w[1]));
                    for &j in g {
                        prop_assert_eq!(sign(c[j]), sign(x[j]));
                    }
                }
            }
        }
    }
}
