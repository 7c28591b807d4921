//! Model constants and iteration schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Number of false values per data item for the single-layer model.
    pub n_single: usize,
    /// Number of false values per data item for the multi-layer model.
    pub n_multi: usize,
    /// Prior probability that a source provides any particular candidate triple;
    /// links precision and recall to the false-extraction rate.
    pub gamma: f64,
    /// Initial prior of extraction correctness.
    pub alpha0: f64,
    pub default_a: f64,
    pub default_r: f64,
    pub default_q: f64,
    pub t_max: usize,
    /// First iteration (1-based) whose correctness prior comes from the previous
    /// iteration's value posteriors.
    pub prior_update_start_iter: usize,
    pub clamp_eps: f64,
    /// When set, extraction confidences are binarised at this threshold.
    pub confidence_threshold: Option<f64>,
    /// Use the MAP extraction-correctness decision instead of its probability
    /// in the value and source-accuracy steps.
    pub hard_correctness: bool,
    /// Keep the correctness prior at `alpha0` for every iteration.
    pub freeze_alpha: bool,
    pub m_min: usize,
    pub m_max: usize,
    pub convergence_tol: f64,
    pub rng_seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            n_single: 100,
            n_multi: 10,
            gamma: 0.25,
            alpha0: 0.5,
            default_a: 0.8,
            default_r: 0.8,
            default_q: 0.2,
            t_max: 5,
            prior_update_start_iter: 3,
            clamp_eps: 1e-6,
            confidence_threshold: None,
            hard_correctness: false,
            freeze_alpha: false,
            m_min: 5,
            m_max: 10_000,
            convergence_tol: 1e-6,
            rng_seed: 0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0, 1], got {p}")))
            }
        };
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(Error::Config(format!(
                "clamp_eps must be in (0, 0.5), got {}",
                self.clamp_eps
            )));
        }
        if self.m_min >= self.m_max {
            return Err(Error::Config(format!(
                "min size {} must be below max size {}",
                self.m_min, self.m_max
            )));
        }
        if self.t_max < 1 {
            return Err(Error::Config("t_max must be at least 1".into()));
        }
        if self.n_single < 1 || self.n_multi < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1), got {}", self.gamma)));
        }
        prob("alpha0", self.alpha0)?;
        prob("default_a", self.default_a)?;
        prob("default_r", self.default_r)?;
        prob("default_q", self.default_q)?;
        if let Some(t) = self.confidence_threshold {
            prob("confidence_threshold", t)?;
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("convergence_tol must be non-negative".into()));
        }
        Ok(())
    }

    /// Applies one `key=value` setting, as found in a config file or on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        match key.trim() {
            "n_single" => self.n_single = parse(key, value)?,
            "n_multi" => self.n_multi = parse(key, value)?,
            "n" => {
                self.n_single = parse(key, value)?;
                self.n_multi = self.n_single;
            }
            "gamma" => self.gamma = parse(key, value)?,
            "alpha0" => self.alpha0 = parse(key, value)?,
            "default_a" => self.default_a = parse(key, value)?,
            "default_r" => self.default_r = parse(key, value)?,
            "default_q" => self.default_q = parse(key, value)?,
            "t_max" | "iters" => self.t_max = parse(key, value)?,
            "prior_update_start_iter" => self.prior_update_start_iter = parse(key, value)?,
            "clamp_eps" => self.clamp_eps = parse(key, value)?,
            "confidence_threshold" | "threshold" => {
                let v = value.trim();
                self.confidence_threshold = if v.is_empty() || v == "none" {
                    None
                } else {
                    Some(parse(key, v)?)
                };
            }
            "hard_correctness" => self.hard_correctness = parse(key, value)?,
            "freeze_alpha" => self.freeze_alpha = parse(key, value)?,
            "m_min" | "min_size" => self.m_min = parse(key, value)?,
            "m_max" | "max_size" => self.m_max = parse(key, value)?,
            "convergence_tol" => self.convergence_tol = parse(key, value)?,
            "rng_seed" | "seed" => self.rng_seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }
}
