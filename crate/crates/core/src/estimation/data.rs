use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment arm; serializes as the treatment indicator `IT` (0 or 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn indicator(self) -> f64 {
        match self {
            Arm::Control => 0.0,
            Arm::Treated => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Treated => "treated",
        }
    }
}

impl From<Arm> for u8 {
    fn from(a: Arm) -> u8 {
        a.index() as u8
    }
}

impl TryFrom<u8> for Arm {
    type Error = Error;

    fn try_from(v: u8) -> Result<Arm> {
        match v {
            0 => Ok(Arm::Control),
            1 => Ok(Arm::Treated),
            other => Err(Error::Validation(format!("arm must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Follow-up time (months), finite and positive.
    pub time: f64,
    /// `true` when the death was observed, `false` when right-censored.
    pub event: bool,
    pub arm: Option<Arm>,
    /// Latent component (0-based), known only for simulated data.
    pub component: Option<usize>,
}

impl Observation {
    pub fn new(time: f64, event: bool) -> Self {
        Observation {
            time,
            event,
            arm: None,
            component: None,
        }
    }

    pub fn with_arm(time: f64, event: bool, arm: Arm) -> Self {
        Observation {
            time,
            event,
            arm: Some(arm),
            component: None,
        }
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.event.cmp(&other.event))
            .then(self.arm.cmp(&other.arm))
    }
}

/// Right-censored survival records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        for (i, o) in observations.iter().enumerate() {
            if !(o.time > 0.0 && o.time.is_finite()) {
                return Err(Error::Data {
                    row: i + 1,
                    reason: format!("time must be finite and > 0, got {}", o.time),
                });
            }
        }
        Ok(Dataset { observations })
    }

    pub fn from_times(times: &[f64], events: &[bool]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::Usage(format!(
                "{} times but {} event flags",
                times.len(),
                events.len()
            )));
        }
        Self::new(
            times
                .iter()
                .zip(events)
                .map(|(&t, &e)| Observation::new(t, e))
                .collect(),
        )
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// n₁: observed deaths.
    pub fn n_events(&self) -> usize {
        self.observations.iter().filter(|o| o.event).count()
    }

    /// n₂: censored subjects.
    pub fn n_censored(&self) -> usize {
        self.len() - self.n_events()
    }

    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.time).collect()
    }

    /// True when every observation carries an arm label.
    pub fn has_arms(&self) -> bool {
        !self.is_empty() && self.observations.iter().all(|o| o.arm.is_some())
    }

    /// Subject counts `(control, treated)`.
    pub fn arm_counts(&self) -> (usize, usize) {
        let treated = self
            .observations
            .iter()
            .filter(|o| o.arm == Some(Arm::Treated))
            .count();
        let control = self
            .observations
            .iter()
            .filter(|o| o.arm == Some(Arm::Control))
            .count();
        (control, treated)
    }

    pub fn filter<P: Fn(&Observation) -> bool>(&self, keep: P) -> Dataset {
        Dataset {
            observations: self.observations.iter().copied().filter(|o| keep(o)).collect(),
        }
    }

    pub fn arm(&self, arm: Arm) -> Dataset {
        self.filter(|o| o.arm == Some(arm))
    }

    pub fn events_only(&self) -> Dataset {
        self.filter(|o| o.event)
    }

    /// Indices that put the observations in canonical (time, event, arm)
    /// order; fitting runs in this order so results do not depend on row order.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.observations[a].sort_key_cmp(&self.observations[b]));
        idx
    }

    pub fn push(&mut self, o: Observation) -> Result<()> {
        if !(o.time > 0.0 && o.time.is_finite()) {
            return Err(Error::Data {
                row: self.len() + 1,
                reason: format!("time must be finite and > 0, got {}", o.time),
            });
        }
        self.observations.push(o);
        Ok(())
    }

    pub fn extend(&mut self, other: Dataset) {
        self.observations.extend(other.observations);
    }
}
