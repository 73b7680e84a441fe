//! Synthetic linear regression: `F(θ) = Σ_k ½(⟨θ, z_k⟩ − y_k)²`, one sample
//! per training subset.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{self, check_dim, Vector};
use crate::rng::RandomStream;

/// Standard deviation of the feature entries (variance 100).
pub const FEATURE_STD: f64 = 10.0;
/// Standard deviation of the label noise.
pub const LABEL_NOISE_STD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressionTask {
    features: Vec<Vector>,
    labels: Vector,
    theta_true: Vector,
}

impl LinearRegressionTask {
    pub fn new(features: Vec<Vector>, labels: Vector, theta_true: Vector) -> Result<Self> {
        let dim = theta_true.len();
        if dim == 0 || features.is_empty() {
            return Err(Error::config("task needs D >= 1 and M >= 1"));
        }
        check_dim(features.len(), labels.len())?;
        for z in &features {
            check_dim(dim, z.len())?;
        }
        Ok(Self {
            features,
            labels,
            theta_true,
        })
    }

    /// `z_k ~ N(0, 100 I)`, `θ̂ ~ N(0, I)`, `y_k ~ N(⟨z_k, θ̂⟩, 1)`.
    pub fn generate(samples: usize, dim: usize, rng: &mut RandomStream) -> Result<Self> {
        if samples == 0 || dim == 0 {
            return Err(Error::config("task needs M >= 1 and D >= 1"));
        }
        let features: Vec<Vector> = (0..samples)
            .map(|_| rng.normal_vector(dim, 0.0, FEATURE_STD))
            .collect();
        let theta_true = rng.normal_vector(dim, 0.0, 1.0);
        let labels = features
            .iter()
            .map(|z| rng.normal(linalg::dot(z, &theta_true), LABEL_NOISE_STD))
            .collect();
        Self::new(features, labels, theta_true)
    }

    pub fn dim(&self) -> usize {
        self.theta_true.len()
    }

    pub fn samples(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Vector] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn theta_true(&self) -> &[f64] {
        &self.theta_true
    }

    /// `⟨θ, z_k⟩ − y_k`
    pub fn residual(&self, k: usize, theta: &[f64]) -> f64 {
        linalg::dot(theta, &self.features[k]) - self.labels[k]
    }

    /// `∇f_k(θ) = (⟨θ, z_k⟩ − y_k) z_k`
    pub fn subset_gradient(&self, k: usize, theta: &[f64]) -> Result<Vector> {
        if k >= self.samples() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.samples(),
            });
        }
        check_dim(self.dim(), theta.len())?;
        Ok(linalg::scale(self.residual(k, theta), &self.features[k]))
    }

    pub fn subset_loss(&self, k: usize, theta: &[f64]) -> f64 {
        let r = self.residual(k, theta);
        0.5 * r * r
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        (0..self.samples()).map(|k| self.subset_loss(k, theta)).sum()
    }

    /// `Σ_k ∇f_k(θ)`, accumulated in ascending `k`.
    pub fn full_gradient(&self, theta: &[f64]) -> Vector {
        let mut g = vec![0.0; self.dim()];
        for k in 0..self.samples() {
            linalg::add_assign(&mut g, &linalg::scale(self.residual(k, theta), &self.features[k]));
        }
        g
    }

    /// Header `D M`, then the `θ̂` row, then one `z_k… y_k` row per sample.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.dim(), self.samples());
        out.push_str(&join(&self.theta_true));
        out.push('\n');
        for (z, y) in self.features.iter().zip(&self.labels) {
            out.push_str(&join(z));
            out.push(' ');
            out.push_str(&y.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty task file".into(),
        })?;
        let head = parse_row(ln, header)?;
        if head.len() != 2 {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "header must be `D M`".into(),
            });
        }
        let (dim, samples) = (head[0] as usize, head[1] as usize);
        let (ln, theta_line) = lines.next().ok_or(Error::Parse {
            line: ln + 2,
            msg: "missing θ̂ row".into(),
        })?;
        let theta_true = parse_row(ln, theta_line)?;
        let mut features = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for (ln, line) in lines {
            let mut row = parse_row(ln, line)?;
            if row.len() != dim + 1 {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected {} values, got {}", dim + 1, row.len()),
                });
            }
            labels.push(row.pop().unwrap_or_default());
            features.push(row);
        }
        if features.len() != samples || theta_true.len() != dim {
            return Err(Error::Parse {
                line: 0,
                msg: format!("header says D={dim} M={samples}, body disagrees"),
            });
        }
        Self::new(features, labels, theta_true)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_row(ln: usize, line: &str) -> Result<Vector> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|e| Error::Parse {
                line: ln + 1,
                msg: format!("{tok:?}: {e}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LinearRegressionTask {
        LinearRegressionTask::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![2.0, -1.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn subset_gradient_examples() {
        let t = tiny();
        assert_eq!(t.subset_gradient(0, &[3.0, 5.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(t.subset_gradient(0, &[0.0, 0.0]).unwrap(), vec![-2.0, -0.0]);
        assert_eq!(t.subset_gradient(1, &[7.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(t.subset_gradient(2, &[0.0, 0.0]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn loss_examples() {
        let t = LinearRegressionTask::new(vec![vec![1.0]], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(t.loss(&[2.0]), 2.0);

        let mut rng = RandomStream::new(5);
        let g = LinearRegressionTask::generate(8, 3, &mut rng).unwrap();
        let noiseless_labels = g.features().iter().map(|z| linalg::dot(z, g.theta_true())).collect();
        let clean = LinearRegressionTask::new(g.features().to_vec(), noiseless_labels, g.theta_true().to_vec()).unwrap();
        assert_eq!(clean.loss(clean.theta_true()), 0.0);
    }

    #[test]
    fn full_gradient_at_zero() {
        let mut rng = RandomStream::new(6);
        let t = LinearRegressionTask::generate(5, 4, &mut rng).unwrap();
        let g = t.full_gradient(&[0.0; 4]);
        let mut expected = vec![0.0; 4];
        for k in 0..5 {
            linalg::axpy(-t.labels()[k], &t.features()[k], &mut expected);
        }
        for (a, b) in g.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn full_gradient_is_sum_of_subsets() {
        let mut rng = RandomStream::new(7);
        let t = LinearRegressionTask::generate(6, 5, &mut rng).unwrap();
        let theta = rng.normal_vector(5, 0.0, 1.0);
        let mut acc = vec![0.0; 5];
        for k in 0..6 {
            linalg::add_assign(&mut acc, &t.subset_gradient(k, &theta).unwrap());
        }
        assert_eq!(acc, t.full_gradient(&theta));
        let sum_f: f64 = (0..6).map(|k| t.subset_loss(k, &theta)).sum();
        assert_eq!(sum_f, t.loss(&theta));
    }

    #[test]
    fn generation_deterministic() {
        let a = LinearRegressionTask::generate(10, 4, &mut RandomStream::new(3)).unwrap();
        let b = LinearRegressionTask::generate(10, 4, &mut RandomStream::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn text_roundtrip() {
        let a = LinearRegressionTask::generate(4, 3, &mut RandomStream::new(8)).unwrap();
        assert_eq!(LinearRegressionTask::from_text(&a.to_text()).unwrap(), a);
        assert!(LinearRegressionTask::from_text("2 1\n0 0\n1 2\n").is_err());
    }
}
