use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn d_lr() -> f64 {
    0.001
}
fn d_max_epochs() -> usize {
    350
}
fn d_plateau_patience() -> usize {
    10
}
fn d_plateau_factor() -> f64 {
    0.8
}
fn d_plateau_tolerance() -> f64 {
    1e-4
}
fn d_early_stop_patience() -> usize {
    50
}
fn d_bootstrap() -> usize {
    150
}
fn d_batch() -> usize {
    64
}
fn d_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    #[serde(default = "d_lr")]
    pub initial_lr: f64,
    #[serde(default = "d_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "d_plateau_patience")]
    pub plateau_patience: usize,
    #[serde(default = "d_plateau_factor")]
    pub plateau_factor: f64,
    /// Relative train-loss improvement below this counts as a plateau epoch.
    #[serde(default = "d_plateau_tolerance")]
    pub plateau_tolerance: f64,
    #[serde(default = "d_early_stop_patience")]
    pub early_stop_patience: usize,
    /// Epochs before the early-stop counter starts.
    #[serde(default = "d_bootstrap")]
    pub bootstrap_epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    /// Threads used for gradient and evaluation passes; results do not depend on it.
    #[serde(default = "d_workers")]
    pub workers: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            initial_lr: d_lr(),
            max_epochs: d_max_epochs(),
            plateau_patience: d_plateau_patience(),
            plateau_factor: d_plateau_factor(),
            plateau_tolerance: d_plateau_tolerance(),
            early_stop_patience: d_early_stop_patience(),
            bootstrap_epochs: d_bootstrap(),
            batch_size: d_batch(),
            workers: d_workers(),
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::config("initial_lr must be positive"));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::config(format!("plateau_factor {} outside (0, 1)", self.plateau_factor)));
        }
        if !(self.plateau_tolerance >= 0.0) {
            return Err(Error::config("plateau_tolerance must be non-negative"));
        }
        for (name, v) in [
            ("max_epochs", self.max_epochs),
            ("plateau_patience", self.plateau_patience),
            ("early_stop_patience", self.early_stop_patience),
            ("batch_size", self.batch_size),
            ("workers", self.workers),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// What the schedule decided after one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    /// Learning rate for the next epoch.
    pub next_lr: f64,
    pub reduced: bool,
    pub val_improved: bool,
    pub stop: bool,
}

/// Plateau reduction on the training loss and bootstrap-protected early
/// stopping on the validation loss.
#[derive(Debug, Clone)]
pub struct ScheduleState {
    schedule: TrainSchedule,
    lr: f64,
    best_train: f64,
    plateau: usize,
    best_val: f64,
    best_val_epoch: usize,
    epoch: usize,
}

impl ScheduleState {
    pub fn new(schedule: &TrainSchedule) -> Self {
        ScheduleState {
            lr: schedule.initial_lr,
            schedule: schedule.clone(),
            best_train: f64::INFINITY,
            plateau: 0,
            best_val: f64::INFINITY,
            best_val_epoch: 0,
            epoch: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn best_val_epoch(&self) -> usize {
        self.best_val_epoch
    }

    /// Feeds the losses of the next epoch (epochs count from 1).
    pub fn observe(&mut self, train_loss: f64, val_loss: f64) -> Decision {
        self.epoch += 1;
        let s = &self.schedule;
        let improved = self.best_train.is_infinite()
            || train_loss < self.best_train - s.plateau_tolerance * self.best_train.abs();
        let mut reduced = false;
        if improved {
            self.best_train = train_loss;
            self.plateau = 0;
        } else {
            self.plateau += 1;
            if self.plateau >= s.plateau_patience {
                self.lr *= s.plateau_factor;
                self.plateau = 0;
                reduced = true;
            }
        }
        let val_improved = val_loss < self.best_val;
        if val_improved {
            self.best_val = val_loss;
            self.best_val_epoch = self.epoch;
        }
        let since = self.epoch.saturating_sub(self.best_val_epoch.max(s.bootstrap_epochs));
        let stop = since >= s.early_stop_patience || self.epoch >= s.max_epochs;
        Decision {
            next_lr: self.lr,
            reduced,
            val_improved,
            stop,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_train_loss_reduces_after_ten_epochs() {
        let mut st = ScheduleState::new(&TrainSchedule::default());
        let mut lrs = Vec::new();
        for e in 0..12 {
            lrs.push(st.observe(1.0, 1.0 / (e + 1) as f64).next_lr);
        }
        assert_eq!(lrs[9], 0.001);
        assert_eq!(lrs[10], 0.001 * 0.8);
        assert_eq!(lrs[11], 0.001 * 0.8);
    }

    #[test]
    fn flat_validation_stops_at_bootstrap_plus_patience() {
        let mut st = ScheduleState::new(&TrainSchedule::default());
        let mut stopped = None;
        for e in 1..=350 {
            if st.observe(1.0 / e as f64, 0.5).stop {
                stopped = Some(e);
                break;
            }
        }
        assert_eq!(stopped, Some(200));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut s = TrainSchedule::default();
        s.validate().unwrap();
        s.plateau_factor = 1.0;
        assert!(s.validate().is_err());
        let s = TrainSchedule {
            batch_size: 0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }
}
