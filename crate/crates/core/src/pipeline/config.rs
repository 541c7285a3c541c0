//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Recognized keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `K` | unrolled iterations | 10 |
//! | `B` | buffer channels | 5 |
//! | `filters` | hidden CNN filters | 16 |
//! | `kind` | `cnn` or `gradient_step` | `cnn` |
//! | `use_dc` | `true` / `false` | `true` |
//! | `lr` | Adam learning rate | 1e-4 |
//! | `epochs` | passes over the training phantoms | 1 |
//! | `max_steps` | optional cap on optimizer steps | none |
//! | `seed` | seed of initialization, phantoms, noise and shuffling | 0 |
//! | `size` | phantom side length | 64 |
//! | `spokes`, `samples` | radial trajectory | 40, 128 |
//! | `noise` | k-space noise std | 0.005 |
//! | `train_cases` | number of training phantoms | 20 |
//! | `dc_iters` | density-compensation iterations | 10 |

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::recon::{CorrectionKind, DEFAULT_BUFFER_SIZE, DEFAULT_FILTERS, DEFAULT_ITERATIONS};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_iter: usize,
    pub buffer_size: usize,
    pub filters: usize,
    pub gradient_step: bool,
    pub use_dc: bool,
    pub lr: f64,
    pub epochs: usize,
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub size: usize,
    pub spokes: usize,
    pub samples: usize,
    pub noise: f64,
    pub train_cases: usize,
    pub dc_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_iter: DEFAULT_ITERATIONS,
            buffer_size: DEFAULT_BUFFER_SIZE,
            filters: DEFAULT_FILTERS,
            gradient_step: false,
            use_dc: true,
            lr: 1e-4,
            epochs: 1,
            max_steps: None,
            seed: 0,
            size: 64,
            spokes: 40,
            samples: 128,
            noise: 0.005,
            train_cases: 20,
            dc_iters: crate::dcomp::DEFAULT_ITERATIONS,
        }
    }
}

impl ExperimentConfig {
    pub fn kind(&self) -> CorrectionKind {
        if self.gradient_step {
            CorrectionKind::GradientStep
        } else {
            CorrectionKind::SmallCnn {
                filters: self.filters,
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got {raw:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            fn num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
                value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid value {value:?} for {key}"),
                })
            }
            let n = line_no;
            match key {
                "K" => cfg.n_iter = num(n, key, value)?,
                "B" => cfg.buffer_size = num(n, key, value)?,
                "filters" => cfg.filters = num(n, key, value)?,
                "kind" => {
                    cfg.gradient_step = match value {
                        "cnn" => false,
                        "gradient_step" => true,
                        _ => {
                            return Err(Error::Parse {
                                line: n,
                                message: format!(
                                    "kind must be cnn or gradient_step, got {value:?}"
                                ),
                            })
                        }
                    }
                }
                "use_dc" => cfg.use_dc = num(n, key, value)?,
                "lr" => cfg.lr = num(n, key, value)?,
                "epochs" => cfg.epochs = num(n, key, value)?,
                "max_steps" => cfg.max_steps = Some(num(n, key, value)?),
                "seed" => cfg.seed = num(n, key, value)?,
                "size" => cfg.size = num(n, key, value)?,
                "spokes" => cfg.spokes = num(n, key, value)?,
                "samples" => cfg.samples = num(n, key, value)?,
                "noise" => cfg.noise = num(n, key, value)?,
                "train_cases" => cfg.train_cases = num(n, key, value)?,
                "dc_iters" => cfg.dc_iters = num(n, key, value)?,
                _ => {
                    return Err(Error::Parse {
                        line: n,
                        message: format!("unknown key {key:?}"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("K", self.n_iter),
            ("B", self.buffer_size),
            ("filters", self.filters),
            ("spokes", self.spokes),
            ("samples", self.samples),
            ("train_cases", self.train_cases),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("{k} must be at least 1")));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Parameter(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Parameter(format!(
                "noise must be non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }

    /// The configuration as `key = value` lines accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "K = {}\nB = {}\nfilters = {}\nkind = {}\nuse_dc = {}\nlr = {}\nepochs = {}\n",
            self.n_iter,
            self.buffer_size,
            self.filters,
            if self.gradient_step {
                "gradient_step"
            } else {
                "cnn"
            },
            self.use_dc,
            self.lr,
            self.epochs
        );
        if let Some(m) = self.max_steps {
            s.push_str(&format!("max_steps = {m}\n"));
        }
        s.push_str(&format!(
            "seed = {}\nsize = {}\nspokes = {}\nsamples = {}\nnoise = {}\ntrain_cases = {}\ndc_iters = {}\n",
            self.seed, self.size, self.spokes, self.samples, self.noise, self.train_cases, self.dc_iters
        ));
        s
    }
}
