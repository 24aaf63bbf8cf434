//! Declarative training schedules.
//!
//! ```text
//! # comment
//! momentum 0.9
//! 40 short 2e-3
//! 32 full  5e-3
//! ```

use std::path::Path;

use crate::error::{HtrError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingStage {
    pub epochs: usize,
    pub dataset: String,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curriculum {
    /// Fixed for every stage; in `[0, 1)`.
    pub momentum: f64,
    pub stages: Vec<TrainingStage>,
}

impl Curriculum {
    pub fn new(momentum: f64, stages: Vec<TrainingStage>) -> Result<Self> {
        let c = Curriculum { momentum, stages };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HtrError::Config(m));
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.stages.is_empty() {
            return bad("curriculum has no stages".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.epochs == 0 {
                return bad(format!("stage {} has zero epochs", i + 1));
            }
            if !(s.learning_rate.is_finite() && s.learning_rate > 0.0) {
                return bad(format!("stage {} learning rate must be positive, got {}", i + 1, s.learning_rate));
            }
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.stages.iter().map(|s| s.epochs).sum()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut momentum = None;
        let mut stages = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| HtrError::Parse {
                line: n as u32 + 1,
                column: 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["momentum", m] => {
                    if momentum.is_some() || !stages.is_empty() {
                        return Err(err("momentum must be given once, before the stages".into()));
                    }
                    momentum = Some(m.parse::<f64>().map_err(|_| err(format!("bad momentum {m:?}")))?);
                }
                [epochs, dataset, lr] => stages.push(TrainingStage {
                    epochs: epochs.parse().map_err(|_| err(format!("bad epoch count {epochs:?}")))?,
                    dataset: dataset.to_string(),
                    learning_rate: lr.parse().map_err(|_| err(format!("bad learning rate {lr:?}")))?,
                }),
                _ => return Err(err(format!("expected `epochs dataset learning-rate`, got {line:?}"))),
            }
        }
        let momentum = momentum.ok_or_else(|| HtrError::Config("curriculum lacks a `momentum` line".into()))?;
        Curriculum::new(momentum, stages)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| HtrError::io(path, e))?)
    }
}
