use crate::theory::{TheoryConstants, TheoryInputs};

/// One row of a run: the state at `θ^t` and what round `t` did. The last row
/// of each trial (`iter = T`) has no round statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub trial: usize,
    pub iter: usize,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub responders: Option<usize>,
    pub qa: Option<f64>,
    /// virtual-iterate recursion residual (error feedback only)
    pub residual: Option<f64>,
    pub encoding_residual: Option<f64>,
    /// `‖Σᵢ eᵢ^{t+1}‖²`
    pub error_sum_norm_sq: Option<f64>,
    /// theoretical bound on the average of `grad_norm_sq` over rows `0..=iter`
    pub bound: Option<f64>,
}

/// Theory evaluated against one trial's realised trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTheory {
    pub inputs: TheoryInputs,
    /// `None` when the error-bound conditions fail (e.g. `δ ≥ 1/2`).
    pub constants: Option<TheoryConstants>,
    /// `max ‖∇f_k − ∇F/M‖` along the trajectory, before the safety factor
    pub beta_trajectory: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub trial: usize,
    pub records: Vec<IterationRecord>,
    pub theory: Option<TrialTheory>,
}

impl TrialMetrics {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    /// Average of `‖∇F(θ^t)‖²` over the rounds actually run (rows `0..T`).
    pub fn mean_grad_norm_sq(&self) -> f64 {
        let rounds: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.responders.is_some())
            .map(|r| r.grad_norm_sq)
            .collect();
        rounds.iter().sum::<f64>() / rounds.len() as f64
    }

    pub fn max_residual(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.residual).reduce(f64::max)
    }

    pub fn max_qa(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.qa).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub iter: usize,
    pub loss_mean: f64,
    pub loss_std: f64,
    pub grad_norm_sq_mean: f64,
    pub grad_norm_sq_std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub label: String,
    pub trials: Vec<TrialMetrics>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunMetrics {
    pub fn records(&self) -> impl Iterator<Item = &IterationRecord> {
        self.trials.iter().flat_map(|t| t.records.iter())
    }

    /// Mean and sample standard deviation across trials, per iteration.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let len = self.trials.iter().map(|t| t.records.len()).min().unwrap_or(0);
        (0..len)
            .map(|i| {
                let losses: Vec<f64> = self.trials.iter().map(|t| t.records[i].loss).collect();
                let grads: Vec<f64> = self.trials.iter().map(|t| t.records[i].grad_norm_sq).collect();
                let (loss_mean, loss_std) = mean_std(&losses);
                let (grad_norm_sq_mean, grad_norm_sq_std) = mean_std(&grads);
                SummaryRow {
                    iter: self.trials[0].records[i].iter,
                    loss_mean,
                    loss_std,
                    grad_norm_sq_mean,
                    grad_norm_sq_std,
                }
            })
            .collect()
    }

    /// Mean over trials of the final-iterate loss.
    pub fn final_loss_mean(&self) -> f64 {
        let finals: Vec<f64> = self.trials.iter().map(TrialMetrics::final_loss).collect();
        mean_std(&finals).0
    }

    pub fn max_residual(&self) -> Option<f64> {
        self.trials.iter().filter_map(TrialMetrics::max_residual).reduce(f64::max)
    }
}
