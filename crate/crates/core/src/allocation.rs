//! Redundant assignment of training subsets to devices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// `N × M` binary matrix: `s(i, k) = 1` iff subset `k` is stored on device
/// `i`. Column sums are the replication counts `d_k`, all at least one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationMatrix {
    devices: usize,
    subsets: usize,
    /// row-major, `devices × subsets`
    cells: Vec<bool>,
    replication: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseBalanceStats {
    /// `Σᵢ s(i, k)` per subset
    pub counts: Vec<usize>,
    /// `Σᵢ s(i, k₁) s(i, k₂)`, `M × M` row-major (diagonal holds `d_k`)
    pub overlaps: Vec<usize>,
    /// `max_{k₁ ≠ k₂} |overlap − d_{k₁} d_{k₂} / N|`
    pub max_deviation: f64,
}

impl AllocationMatrix {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let devices = rows.len();
        if devices == 0 {
            return Err(Error::config("allocation needs at least one device"));
        }
        let subsets = rows[0].len();
        if subsets == 0 {
            return Err(Error::config("allocation needs at least one subset"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != subsets) {
            return Err(Error::config(format!("allocation row {bad} has wrong length")));
        }
        let cells: Vec<bool> = rows.into_iter().flatten().collect();
        let replication: Vec<usize> = (0..subsets)
            .map(|k| (0..devices).filter(|&i| cells[i * subsets + k]).count())
            .collect();
        if let Some(k) = replication.iter().position(|&d| d == 0) {
            return Err(Error::config(format!("subset {k} is not held by any device")));
        }
        Ok(Self {
            devices,
            subsets,
            cells,
            replication,
        })
    }

    /// Each subset goes to exactly `d` devices chosen uniformly without
    /// replacement, independently across subsets.
    pub fn uniform_random(devices: usize, subsets: usize, d: usize, rng: &mut RandomStream) -> Result<Self> {
        Self::uniform_random_heterogeneous(devices, &vec![d; subsets], rng)
    }

    /// Like [`Self::uniform_random`] with a per-subset replication count.
    pub fn uniform_random_heterogeneous(
        devices: usize,
        replication: &[usize],
        rng: &mut RandomStream,
    ) -> Result<Self> {
        if devices == 0 || replication.is_empty() {
            return Err(Error::config("allocation needs N >= 1 and M >= 1"));
        }
        if let Some((k, &d)) = replication.iter().enumerate().find(|(_, &d)| d == 0 || d > devices) {
            return Err(Error::config(format!(
                "replication d_{k} = {d} must satisfy 1 <= d <= N = {devices}"
            )));
        }
        let subsets = replication.len();
        let mut cells = vec![false; devices * subsets];
        for (k, &d) in replication.iter().enumerate() {
            for i in rng.sample_indices(devices, d) {
                cells[i * subsets + k] = true;
            }
        }
        Ok(Self {
            devices,
            subsets,
            cells,
            replication: replication.to_vec(),
        })
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn subsets(&self) -> usize {
        self.subsets
    }

    pub fn get(&self, device: usize, subset: usize) -> bool {
        self.cells[device * self.subsets + subset]
    }

    /// Replication counts `d_k`.
    pub fn replication(&self) -> &[usize] {
        &self.replication
    }

    /// `S_i`, ascending.
    pub fn subsets_of(&self, device: usize) -> Vec<usize> {
        let row = &self.cells[device * self.subsets..(device + 1) * self.subsets];
        row.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k).collect()
    }

    pub fn pairwise_balance_stats(&self) -> PairwiseBalanceStats {
        let m = self.subsets;
        let counts: Vec<usize> = (0..m)
            .map(|k| (0..self.devices).filter(|&i| self.get(i, k)).count())
            .collect();
        let mut overlaps = vec![0usize; m * m];
        for i in 0..self.devices {
            let held = self.subsets_of(i);
            for &a in &held {
                for &b in &held {
                    overlaps[a * m + b] += 1;
                }
            }
        }
        let n = self.devices as f64;
        let mut max_deviation: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                let target = (self.replication[a] * self.replication[b]) as f64 / n;
                max_deviation = max_deviation.max((overlaps[a * m + b] as f64 - target).abs());
            }
        }
        PairwiseBalanceStats {
            counts,
            overlaps,
            max_deviation,
        }
    }

    /// `ϑ = Σ_k (1/d_k − 1/N)`.
    pub fn vartheta(&self) -> f64 {
        vartheta(&self.replication, self.devices)
    }

    /// One row per device, space-separated 0/1 entries.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.devices * (2 * self.subsets + 1));
        for i in 0..self.devices {
            for k in 0..self.subsets {
                if k > 0 {
                    out.push(' ');
                }
                out.push(if self.get(i, k) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| match tok {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected 0 or 1, got {other:?}"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
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

/// `ϑ = Σ_k (1/d_k − 1/N)` from replication counts alone.
pub fn vartheta(replication: &[usize], devices: usize) -> f64 {
    let inv_n = 1.0 / devices as f64;
    replication.iter().map(|&d| 1.0 / d as f64 - inv_n).sum()
}
