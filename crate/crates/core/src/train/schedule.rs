use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant-then-linear-decay learning-rate schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    pub lr0: f64,
    pub total_epochs: usize,
    pub constant_epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            lr0: 2e-4,
            total_epochs: 200,
            constant_epochs: 100,
            batch_size: 1,
        }
    }
}

impl TrainSchedule {
    pub fn new(lr0: f64, total_epochs: usize, constant_epochs: usize) -> Self {
        Self {
            lr0,
            total_epochs,
            constant_epochs,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if self.constant_epochs == 0 || self.constant_epochs > self.total_epochs {
            return Err(Error::config(format!(
                "need 0 < constant_epochs <= total_epochs, got {} and {}",
                self.constant_epochs, self.total_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Learning rate used throughout `epoch` (0-based).
pub fn lr_at(epoch: usize, s: &TrainSchedule) -> Result<f64> {
    s.validate()?;
    if epoch > s.total_epochs {
        return Err(Error::config(format!(
            "epoch {epoch} is past the schedule end {}",
            s.total_epochs
        )));
    }
    if epoch < s.constant_epochs {
        return Ok(s.lr0);
    }
    if s.total_epochs == s.constant_epochs {
        return Ok(0.0);
    }
    let left = (s.total_epochs - epoch) as f64;
    Ok(s.lr0 * (left / (s.total_epochs - s.constant_epochs) as f64))
}
