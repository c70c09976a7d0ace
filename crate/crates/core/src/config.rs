//! Pipeline configuration shared by every subcommand.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluate::ExperimentConfig;
use crate::solvers::required_sample_size;
use crate::synth::SynthFleetConfig;
use crate::tail::GammaGrid;

pub const DEFAULT_ALPHAS: [f64; 5] = [0.1, 0.0333, 0.01, 0.005, 0.0005];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub eps: f64,
    /// `None` means `eps / 3`.
    pub alpha: Option<f64>,
    pub delta: f64,
    pub n_params: u32,
    pub n_runs: usize,
    /// `None` means the sample-size bound for `eps`, `delta`, `n_params`.
    pub in_sample_size: Option<usize>,
    pub seed: u64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub gamma_steps: usize,
    pub alphas: Vec<f64>,
    pub cv_draw_size: Option<usize>,
    pub cv_reps: usize,
    pub synth: SynthFleetConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let g = GammaGrid::default();
        Self {
            eps: 0.1,
            alpha: None,
            delta: 0.01,
            n_params: 2,
            n_runs: 10,
            in_sample_size: None,
            seed: SynthFleetConfig::default().seed,
            gamma_lo: g.lo,
            gamma_hi: g.hi,
            gamma_steps: g.steps,
            alphas: DEFAULT_ALPHAS.to_vec(),
            cv_draw_size: None,
            cv_reps: 5000,
            synth: SynthFleetConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl PipelineConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.eps / 3.0)
    }

    pub fn in_sample_size(&self) -> Result<usize> {
        match self.in_sample_size {
            Some(n) => Ok(n),
            None => required_sample_size(self.eps, self.delta, self.n_params),
        }
    }

    pub fn grid(&self) -> Result<GammaGrid> {
        GammaGrid::new(self.gamma_lo, self.gamma_hi, self.gamma_steps)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            eps: self.eps,
            alpha: self.alpha(),
            n_runs: self.n_runs,
            in_sample_size: self.in_sample_size()?,
            seed: self.seed,
            grid: self.grid()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment()?;
        if self.alphas.iter().any(|&a| !(a > 0.0 && a <= self.eps)) {
            return Err(Error::config(format!(
                "every sweep alpha must lie in (0, eps={}]",
                self.eps
            )));
        }
        if self.cv_reps < 2 {
            return Err(Error::config("cv_reps must be at least 2"));
        }
        self.synth.validate()
    }

    /// Sets one key. Synthetic-fleet keys are forwarded; `seed` drives both.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let auto = |v: &str| v.trim().eq_ignore_ascii_case("auto");
        match key {
            "eps" => self.eps = parse(key, value)?,
            "alpha" => self.alpha = if auto(value) { None } else { Some(parse(key, value)?) },
            "delta" => self.delta = parse(key, value)?,
            "n_params" => self.n_params = parse(key, value)?,
            "n_runs" => self.n_runs = parse(key, value)?,
            "in_sample_size" => {
                self.in_sample_size = if auto(value) { None } else { Some(parse(key, value)?) }
            }
            "seed" => {
                self.seed = parse(key, value)?;
                self.synth.seed = self.seed;
            }
            "gamma_lo" => self.gamma_lo = parse(key, value)?,
            "gamma_hi" => self.gamma_hi = parse(key, value)?,
            "gamma_steps" => self.gamma_steps = parse(key, value)?,
            "alphas" => self.alphas = parse_list(key, value)?,
            "cv_draw_size" => {
                self.cv_draw_size = if auto(value) { None } else { Some(parse(key, value)?) }
            }
            "cv_reps" => self.cv_reps = parse(key, value)?,
            _ => {
                if !self.synth.set(key, value)? {
                    return Err(Error::config(format!("unknown config key '{key}'")));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        kv.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        c.apply(kv)?;
        Ok(c)
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut out: Vec<(String, String)> = vec![
            ("eps".into(), self.eps.to_string()),
            ("alpha".into(), opt(self.alpha.map(|a| a.to_string()))),
            ("delta".into(), self.delta.to_string()),
            ("n_params".into(), self.n_params.to_string()),
            ("n_runs".into(), self.n_runs.to_string()),
            ("in_sample_size".into(), opt(self.in_sample_size.map(|n| n.to_string()))),
            ("gamma_lo".into(), self.gamma_lo.to_string()),
            ("gamma_hi".into(), self.gamma_hi.to_string()),
            ("gamma_steps".into(), self.gamma_steps.to_string()),
            ("alphas".into(), list(&self.alphas)),
            ("cv_draw_size".into(), opt(self.cv_draw_size.map(|n| n.to_string()))),
            ("cv_reps".into(), self.cv_reps.to_string()),
        ];
        out.extend(self.synth.to_pairs());
        out.sort();
        out
    }

    /// SHA-256 of the canonical `key=value` listing.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.to_pairs() {
            h.update(format!("{k}={v}\n"));
        }
        crate::io::hex(&h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.in_sample_size().unwrap(), 216);
        assert!((c.alpha() - 0.1 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pairs_round_trip() {
        let mut c = PipelineConfig::default();
        c.set("eps", "0.05").unwrap();
        c.set("alpha", "0.01").unwrap();
        c.set("seed", "99").unwrap();
        c.set("n_evs", "12").unwrap();
        c.set("alphas", "0.05,0.01").unwrap();
        assert_eq!(c.synth.seed, 99);
        let kv: BTreeMap<String, String> = c.to_pairs().into_iter().collect();
        let back = PipelineConfig::from_kv(&kv).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(PipelineConfig::default().hash(), c.hash());
    }

    #[test]
    fn bad_values_rejected() {
        let mut c = PipelineConfig::default();
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("eps", "x").is_err());
        c.set("alpha", "0.2").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
