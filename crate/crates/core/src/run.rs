//! Complete runs: warm-up, integration with event detection and optional
//! trajectory recording, and parallel batches of independent runs.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{EventCatalog, EventDetector};
use crate::integrator::{run_rng, warm_up_with, Integrator, IntegratorConfig, StepObserver, TrajectorySample};
use crate::model::{ModelParams, SystemState};

/// Snapshots taken every `stride` steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.positions.iter().map(Vec::as_slice))
    }
}

#[derive(Debug)]
pub struct TrajectoryRecorder {
    stride: usize,
    seen: usize,
    pub trajectory: Trajectory,
}

impl TrajectoryRecorder {
    /// Records the initial state, then every `stride`-th sample.
    pub fn new(stride: usize, initial: &SystemState) -> Self {
        let mut rec = TrajectoryRecorder {
            stride: stride.max(1),
            seen: 0,
            trajectory: Trajectory::default(),
        };
        rec.push(&TrajectorySample::of(initial));
        rec
    }

    fn push(&mut self, s: &TrajectorySample<'_>) {
        self.trajectory.times.push(s.time);
        self.trajectory.positions.push(s.positions.to_vec());
        self.trajectory.velocities.push(s.velocities.to_vec());
    }
}

impl StepObserver for TrajectoryRecorder {
    fn observe(&mut self, sample: &TrajectorySample<'_>) -> Result<()> {
        self.seen += 1;
        if self.seen.is_multiple_of(self.stride) {
            self.push(sample);
        }
        Ok(())
    }
}

/// Center-of-mass displacement, sampled every `stride` steps.
#[derive(Debug)]
pub struct CenterOfMassRecorder {
    stride: usize,
    seen: usize,
    pub series: Vec<(f64, f64)>,
}

impl CenterOfMassRecorder {
    pub fn new(stride: usize, initial: &SystemState) -> Self {
        CenterOfMassRecorder {
            stride: stride.max(1),
            seen: 0,
            series: vec![(initial.time, initial.center_of_mass())],
        }
    }
}

impl StepObserver for CenterOfMassRecorder {
    fn observe(&mut self, s: &TrajectorySample<'_>) -> Result<()> {
        self.seen += 1;
        if self.seen.is_multiple_of(self.stride) {
            let mean = s.positions.iter().sum::<f64>() / s.positions.len() as f64;
            self.series.push((s.time, mean));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordOptions {
    /// Keep full snapshots every this many steps.
    pub trajectory_stride: Option<usize>,
    /// Keep the center-of-mass displacement every this many steps.
    pub center_of_mass_stride: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub params: ModelParams,
    pub config: IntegratorConfig,
    pub run_index: u64,
    /// State at the relabelled `t = 0`.
    pub initial: SystemState,
    pub final_state: SystemState,
    pub catalog: EventCatalog,
    pub trajectory: Option<Trajectory>,
    pub center_of_mass: Option<Vec<(f64, f64)>>,
    pub wall_time: Duration,
}

impl RunOutput {
    /// Mean center-of-mass velocity between the first and last global stick
    /// that close an event, i.e. over whole stick-slip cycles.
    pub fn mean_slip_rate(&self) -> Option<f64> {
        self.mean_slip_rate_after(f64::NEG_INFINITY)
    }

    /// Like [`mean_slip_rate`](Self::mean_slip_rate), ignoring events that end
    /// before `spin_up` so the loading transient after warm-up is excluded.
    pub fn mean_slip_rate_after(&self, spin_up: f64) -> Option<f64> {
        catalog_slip_rate(&self.catalog, self.params.n_blocks, spin_up)
    }
}

/// Mean center-of-mass velocity implied by a catalog with per-block slips:
/// the slip of the events ending in `(t_a, t_b]` divided by `N (t_b - t_a)`,
/// where `t_a` and `t_b` are the first and last event ends at or after
/// `spin_up`. Both ends are global sticks, so only whole cycles are counted.
pub fn catalog_slip_rate(catalog: &EventCatalog, n_blocks: usize, spin_up: f64) -> Option<f64> {
    let events: Vec<_> = catalog.events.iter().filter(|e| e.end_time >= spin_up).collect();
    let (first, last) = (events.first()?, events.last()?);
    if last.end_time <= first.end_time || first.per_block_slip.is_empty() {
        return None;
    }
    let slip: f64 = events[1..].iter().map(|e| e.per_block_slip.iter().sum::<f64>()).sum();
    Some(slip / n_blocks as f64 / (last.end_time - first.end_time))
}

/// Warm up, then integrate to `cfg.t_end` collecting the event catalog.
pub fn simulate(p: &ModelParams, cfg: &IntegratorConfig, opts: RecordOptions) -> Result<RunOutput> {
    simulate_indexed(p, cfg, opts, 0)
}

/// Like [`simulate`], with the random stream of run `run_index` under `cfg.seed`.
pub fn simulate_indexed(
    p: &ModelParams,
    cfg: &IntegratorConfig,
    opts: RecordOptions,
    run_index: u64,
) -> Result<RunOutput> {
    let started = Instant::now();
    let mut rng = run_rng(cfg.seed, run_index);
    let initial = warm_up_with(p, cfg, &mut rng)?;
    let mut state = initial.clone();

    let mut detector = EventDetector::new(state.time, state.positions());
    let mut trajectory = opts.trajectory_stride.map(|s| TrajectoryRecorder::new(s, &state));
    let mut com = opts.center_of_mass_stride.map(|s| CenterOfMassRecorder::new(s, &state));
    {
        let mut observers: Vec<&mut dyn StepObserver> = vec![&mut detector];
        if let Some(t) = trajectory.as_mut() {
            observers.push(t);
        }
        if let Some(c) = com.as_mut() {
            observers.push(c);
        }
        Integrator::from_config(*p, cfg).integrate(&mut state, cfg.t_end, &mut observers)?;
    }
    let mut catalog = detector.finish();
    catalog.window = (0.0, cfg.t_end);
    Ok(RunOutput {
        params: *p,
        config: *cfg,
        run_index,
        initial,
        final_state: state,
        catalog,
        trajectory: trajectory.map(|t| t.trajectory),
        center_of_mass: com.map(|c| c.series),
        wall_time: started.elapsed(),
    })
}

/// Runs every parameter set as an independent job on at most `workers`
/// threads (0 = rayon default). Job `i` uses random stream `i`; results keep
/// input order.
pub fn simulate_batch(
    jobs: &[ModelParams],
    cfg: &IntegratorConfig,
    opts: RecordOptions,
    workers: usize,
) -> Result<Vec<RunOutput>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(i, p)| simulate_indexed(p, cfg, opts, i as u64))
            .collect()
    })
}
