//! Earthquake segmentation.
//!
//! An event opens at the first sample in which any block slips and closes at
//! the first later sample in which every block is stuck. Slip is accumulated
//! per block from the positive position increments between samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{StepObserver, TrajectorySample};

/// Base-10 and natural-log magnitudes of a total slip.
pub fn magnitude(per_block_slip: &[f64]) -> Result<(f64, f64)> {
    let total: f64 = per_block_slip.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NonPositiveSlip(total));
    }
    Ok((total.log10(), total.ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub start_time: f64,
    pub end_time: f64,
    /// Empty when the record was loaded from a file that does not keep it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_block_slip: Vec<f64>,
    pub magnitude_log10: f64,
    pub magnitude_ln: f64,
    pub participating_blocks: usize,
}

impl EventRecord {
    pub fn from_slips(start_time: f64, end_time: f64, per_block_slip: Vec<f64>) -> Result<Self> {
        let (m10, mln) = magnitude(&per_block_slip)?;
        let participating_blocks = per_block_slip.iter().filter(|&&d| d > 0.0).count();
        Ok(EventRecord {
            start_time,
            end_time,
            per_block_slip,
            magnitude_log10: m10,
            magnitude_ln: mln,
            participating_blocks,
        })
    }

    pub fn total_slip(&self) -> f64 {
        10f64.powf(self.magnitude_log10)
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCatalog {
    pub events: Vec<EventRecord>,
    pub window: (f64, f64),
}

impl EventCatalog {
    pub fn new(events: Vec<EventRecord>, window: (f64, f64)) -> Self {
        EventCatalog { events, window }
    }

    /// `N_T`.
    pub fn total_events(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn magnitudes_log10(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.magnitude_log10).collect()
    }

    pub fn magnitudes_ln(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.magnitude_ln).collect()
    }

    /// (min, max) of the base-10 magnitudes.
    pub fn magnitude_range(&self) -> Option<(f64, f64)> {
        self.events
            .iter()
            .map(|e| e.magnitude_log10)
            .fold(None, |acc, m| match acc {
                None => Some((m, m)),
                Some((lo, hi)) => Some((lo.min(m), hi.max(m))),
            })
    }
}

#[derive(Debug)]
struct OpenEvent {
    start_time: f64,
    slip: Vec<f64>,
}

/// Step observer that builds an [`EventCatalog`].
#[derive(Debug)]
pub struct EventDetector {
    last_time: f64,
    last_positions: Vec<f64>,
    open: Option<OpenEvent>,
    events: Vec<EventRecord>,
    window_start: f64,
    discarded: usize,
}

impl EventDetector {
    /// Starts observing from `time` with the chain at `positions`.
    pub fn new(time: f64, positions: &[f64]) -> Self {
        EventDetector {
            last_time: time,
            last_positions: positions.to_vec(),
            open: None,
            events: Vec::new(),
            window_start: time,
            discarded: 0,
        }
    }

    pub fn on_step(&mut self, sample: &TrajectorySample<'_>) -> Result<()> {
        if !(sample.time > self.last_time) {
            return Err(Error::OutOfOrderSample {
                last: self.last_time,
                got: sample.time,
            });
        }
        self.last_time = sample.time;

        if self.open.is_none() {
            if !sample.any_slipping {
                // Nothing moves between fully stuck samples outside an event.
                return Ok(());
            }
            self.open = Some(OpenEvent {
                start_time: sample.time,
                slip: vec![0.0; sample.positions.len()],
            });
        }
        let ev = self.open.as_mut().expect("event is open");
        for ((acc, &x), prev) in ev
            .slip
            .iter_mut()
            .zip(sample.positions)
            .zip(self.last_positions.iter_mut())
        {
            let dx = x - *prev;
            if dx > 0.0 {
                *acc += dx;
            }
            *prev = x;
        }
        if !sample.any_slipping {
            let ev = self.open.take().expect("event is open");
            match EventRecord::from_slips(ev.start_time, sample.time, ev.slip) {
                Ok(rec) => self.events.push(rec),
                Err(_) => self.discarded += 1,
            }
        }
        Ok(())
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    /// Events that closed without any net slip (never seen in practice).
    pub fn discarded(&self) -> usize {
        self.discarded
    }

    /// Completed catalog; an event still open at the end is dropped.
    pub fn finish(self) -> EventCatalog {
        EventCatalog::new(self.events, (self.window_start, self.last_time))
    }
}

impl StepObserver for EventDetector {
    fn observe(&mut self, sample: &TrajectorySample<'_>) -> Result<()> {
        self.on_step(sample)
    }
}
