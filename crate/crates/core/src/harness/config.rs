//! Declarative experiment description and its flat `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! N = 100
//! M = 100
//! D = 100
//! d = 5              # or a comma-separated list of M per-subset counts
//! p = 0.2
//! method = coco_ef   # coco_ef | coco | unbiased | unbiased_diff | uncompressed
//! compressor = sign  # sign | grouped_sign | top_k | stochastic_sign | rand_k | identity
//! k = 2              # top_k / rand_k
//! group_size = 10    # grouped_sign, or: groups = 0,1,2;3,4,5;...
//! T = 1000
//! gamma0 = 1e-5
//! lr_schedule = constant   # constant | inv_sqrt
//! trials = 5
//! seed = 1
//! emit_theory = false
//! debug_invariants = false
//! ```
//!
//! Keys are case-sensitive (`d` and `D` differ). Omitted keys keep their
//! [`ExperimentConfig::default`] value; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::compression::CompressorSpec;
use crate::error::{Error, Result};
use crate::protocol::{MethodKind, MethodSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    /// `γ^t = γ₀`
    Constant,
    /// `γ^t = γ₀ / √(t+1)`
    InvSqrt,
}

impl LrSchedule {
    pub fn rate(self, gamma0: f64, t: usize) -> f64 {
        match self {
            LrSchedule::Constant => gamma0,
            LrSchedule::InvSqrt => gamma0 / ((t + 1) as f64).sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LrSchedule::Constant => "constant",
            LrSchedule::InvSqrt => "inv_sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replication {
    Uniform(usize),
    PerSubset(Vec<usize>),
}

impl Replication {
    pub fn counts(&self, subsets: usize) -> Vec<usize> {
        match self {
            Replication::Uniform(d) => vec![*d; subsets],
            Replication::PerSubset(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub devices: usize,
    pub subsets: usize,
    pub dim: usize,
    pub replication: Replication,
    pub p: f64,
    pub method: MethodSpec,
    pub iterations: usize,
    pub gamma0: f64,
    pub lr_schedule: LrSchedule,
    pub trials: usize,
    pub seed: u64,
    pub emit_theory: bool,
    pub debug_invariants: bool,
}

impl Default for ExperimentConfig {
    /// 100 devices, 100 single-sample subsets in dimension 100, `d = 5`,
    /// `p = 0.2`, error feedback with sign-bit compression at `γ = 1e-5`.
    fn default() -> Self {
        Self {
            devices: 100,
            subsets: 100,
            dim: 100,
            replication: Replication::Uniform(5),
            p: 0.2,
            method: MethodSpec::new(MethodKind::CocoEf, CompressorSpec::sign(100).expect("dim > 0"))
                .expect("sign is biased"),
            iterations: 1000,
            gamma0: 1e-5,
            lr_schedule: LrSchedule::Constant,
            trials: 5,
            seed: 1,
            emit_theory: false,
            debug_invariants: false,
        }
    }
}

/// Raw compressor description as it appears in a config file.
#[derive(Debug, Clone, PartialEq)]
struct CompressorFields {
    name: String,
    k: Option<usize>,
    group_size: Option<usize>,
    groups: Option<Vec<Vec<usize>>>,
}

impl CompressorFields {
    fn from_spec(spec: &CompressorSpec) -> Self {
        let mut f = CompressorFields {
            name: spec.name().to_string(),
            k: None,
            group_size: None,
            groups: None,
        };
        match spec {
            CompressorSpec::TopK { k, .. } | CompressorSpec::AmplifiedRandK { k, .. } => f.k = Some(*k),
            CompressorSpec::GroupedSignBit { groups } if groups.len() > 1 => f.groups = Some(groups.clone()),
            _ => {}
        }
        f
    }

    fn build(&self, dim: usize) -> Result<CompressorSpec> {
        let need_k = || self.k.ok_or_else(|| Error::config(format!("compressor {} needs k", self.name)));
        match self.name.as_str() {
            "sign" => CompressorSpec::sign(dim),
            "grouped_sign" => match (&self.groups, self.group_size) {
                (Some(groups), _) => CompressorSpec::grouped_sign_from_groups(groups.clone()),
                (None, Some(size)) => CompressorSpec::grouped_sign(dim, size),
                (None, None) => Err(Error::config("grouped_sign needs group_size or groups")),
            },
            "top_k" => CompressorSpec::top_k(need_k()?, dim),
            "rand_k" => CompressorSpec::rand_k(need_k()?, dim),
            "stochastic_sign" => Ok(CompressorSpec::StochasticSignBit),
            "identity" => Ok(CompressorSpec::Identity),
            other => Err(Error::config(format!("unknown compressor {other:?}"))),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.devices == 0 || self.subsets == 0 || self.dim == 0 {
            return Err(Error::config("N, M and D must be at least 1"));
        }
        if self.iterations == 0 || self.trials == 0 {
            return Err(Error::config("T and trials must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::config(format!("p must lie in [0, 1), got {}", self.p)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::config(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        let counts = self.replication.counts(self.subsets);
        if counts.len() != self.subsets {
            return Err(Error::config(format!(
                "replication list has {} entries, M = {}",
                counts.len(),
                self.subsets
            )));
        }
        if let Some(&d) = counts.iter().find(|&&d| d == 0 || d > self.devices) {
            return Err(Error::config(format!("replication {d} outside 1..=N ({})", self.devices)));
        }
        if let Some(cd) = self.method.compressor().dim() {
            if cd != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: cd,
                });
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut method = cfg.method.kind();
        let mut comp = CompressorFields::from_spec(cfg.method.compressor());
        let mut comp_touched = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: lineno,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |msg: String| Error::Parse { line: lineno, msg };
            let int = |v: &str| v.parse::<usize>().map_err(|e| bad(format!("{key}: {e}")));
            let float = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
            let boolean = |v: &str| v.parse::<bool>().map_err(|e| bad(format!("{key}: {e}")));
            match key {
                "N" => cfg.devices = int(value)?,
                "M" => cfg.subsets = int(value)?,
                "D" => cfg.dim = int(value)?,
                "d" => {
                    cfg.replication = if value.contains(',') {
                        Replication::PerSubset(value.split(',').map(|v| int(v.trim())).collect::<Result<_>>()?)
                    } else {
                        Replication::Uniform(int(value)?)
                    }
                }
                "p" => cfg.p = float(value)?,
                "method" => method = MethodKind::parse(value)?,
                "compressor" => {
                    comp.name = value.to_string();
                    comp_touched = true;
                }
                "k" => {
                    comp.k = Some(int(value)?);
                    comp_touched = true;
                }
                "group_size" => {
                    comp.group_size = Some(int(value)?);
                    comp_touched = true;
                }
                "groups" => {
                    let groups = value
                        .split(';')
                        .map(|g| g.split(',').map(|v| int(v.trim())).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?;
                    comp.groups = Some(groups);
                    comp_touched = true;
                }
                "T" => cfg.iterations = int(value)?,
                "gamma0" => cfg.gamma0 = float(value)?,
                "lr_schedule" => {
                    cfg.lr_schedule = match value {
                        "constant" => LrSchedule::Constant,
                        "inv_sqrt" => LrSchedule::InvSqrt,
                        other => return Err(bad(format!("unknown lr_schedule {other:?}"))),
                    }
                }
                "trials" => cfg.trials = int(value)?,
                "seed" => cfg.seed = value.parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?,
                "emit_theory" => cfg.emit_theory = boolean(value)?,
                "debug_invariants" => cfg.debug_invariants = boolean(value)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        if method == MethodKind::Uncompressed && !comp_touched {
            comp.name = "identity".into();
        }
        cfg.method = MethodSpec::new(method, comp.build(cfg.dim)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Serialise in the format accepted by [`Self::parse`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "N = {}", self.devices);
        let _ = writeln!(s, "M = {}", self.subsets);
        let _ = writeln!(s, "D = {}", self.dim);
        match &self.replication {
            Replication::Uniform(d) => {
                let _ = writeln!(s, "d = {d}");
            }
            Replication::PerSubset(v) => {
                let list: Vec<String> = v.iter().map(usize::to_string).collect();
                let _ = writeln!(s, "d = {}", list.join(","));
            }
        }
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "method = {}", self.method.kind().name());
        let comp = CompressorFields::from_spec(self.method.compressor());
        let _ = writeln!(s, "compressor = {}", comp.name);
        if let Some(k) = comp.k {
            let _ = writeln!(s, "k = {k}");
        }
        if let Some(groups) = comp.groups {
            let g: Vec<String> = groups
                .iter()
                .map(|g| g.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
                .collect();
            let _ = writeln!(s, "groups = {}", g.join(";"));
        }
        let _ = writeln!(s, "T = {}", self.iterations);
        let _ = writeln!(s, "gamma0 = {:e}", self.gamma0);
        let _ = writeln!(s, "lr_schedule = {}", self.lr_schedule.name());
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "emit_theory = {}", self.emit_theory);
        let _ = writeln!(s, "debug_invariants = {}", self.debug_invariants);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_full() {
        let text = "N = 10\nM = 8\nD = 6 # dim\nd = 2\np = 0.5\nmethod = unbiased_diff\ncompressor = rand_k\nk = 3\n\
                    T = 50\ngamma0 = 2e-5\nlr_schedule = inv_sqrt\ntrials = 2\nseed = 9\nemit_theory = true\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.devices, 10);
        assert_eq!(c.method.kind(), MethodKind::UnbiasedDiff);
        assert_eq!(c.method.compressor(), &CompressorSpec::rand_k(3, 6).unwrap());
        assert_eq!(c.lr_schedule, LrSchedule::InvSqrt);
        assert!(c.emit_theory && !c.debug_invariants);
        assert_eq!(ExperimentConfig::parse(&c.to_config_string()).unwrap(), c);
    }

    #[test]
    fn defaults_and_roundtrip() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(ExperimentConfig::parse(&c.to_config_string()).unwrap(), c);
    }

    #[test]
    fn groups_and_heterogeneous_replication() {
        let c = ExperimentConfig::parse("N=4\nM=3\nD=4\nd=1,2,4\ncompressor=grouped_sign\ngroups=0,1;2,3\n").unwrap();
        assert_eq!(c.replication, Replication::PerSubset(vec![1, 2, 4]));
        assert_eq!(ExperimentConfig::parse(&c.to_config_string()).unwrap(), c);
    }

    #[test]
    fn rejects() {
        assert!(ExperimentConfig::parse("p = 1").is_err());
        assert!(ExperimentConfig::parse("bogus = 3").is_err());
        assert!(ExperimentConfig::parse("N = 3\nd = 4").is_err());
        assert!(ExperimentConfig::parse("gamma0 = 0").is_err());
        assert!(ExperimentConfig::parse("method = unbiased").is_err());
        assert!(ExperimentConfig::parse("compressor = top_k").is_err());
        assert!(ExperimentConfig::parse("M = 3\nd = 1,2").is_err());
        assert!(ExperimentConfig::parse("just words").is_err());
    }

    #[test]
    fn uncompressed_defaults_to_identity() {
        let c = ExperimentConfig::parse("method = uncompressed").unwrap();
        assert_eq!(c.method, MethodSpec::uncompressed());
    }

    #[test]
    fn schedules() {
        assert_eq!(LrSchedule::Constant.rate(2.0, 8), 2.0);
        assert_eq!(LrSchedule::InvSqrt.rate(2.0, 3), 1.0);
    }
}
