//! Time stepping of the chain: PECE steps, velocity clamping, stick/slip
//! bookkeeping and the randomized warm-up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adams::{self, VectorField, Workspace};
use crate::error::{Error, Result};
use crate::model::{block_acceleration, force_unchecked, History, ModelParams, SystemState};

pub const DEFAULT_STEP: f64 = 0.001;
pub const DEFAULT_PERTURBATION: f64 = 0.1;

fn default_step() -> f64 {
    DEFAULT_STEP
}
fn default_perturbation() -> f64 {
    DEFAULT_PERTURBATION
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(default = "default_step")]
    pub step_size: f64,
    pub t_end: f64,
    #[serde(default)]
    pub seed: u64,
    /// Initial displacements are drawn uniformly from `[-δ, δ]`.
    #[serde(default = "default_perturbation")]
    pub perturbation_amplitude: f64,
    /// Longest warm-up allowed before giving up; `10 * t_end` when unset.
    #[serde(default)]
    pub warmup_cap: Option<f64>,
    /// Jump over globally stuck stretches instead of stepping through them.
    /// Results are identical either way.
    #[serde(default = "default_true")]
    pub fast_forward: bool,
}

impl IntegratorConfig {
    pub fn new(t_end: f64) -> Self {
        IntegratorConfig {
            step_size: DEFAULT_STEP,
            t_end,
            seed: 0,
            perturbation_amplitude: DEFAULT_PERTURBATION,
            warmup_cap: None,
            fast_forward: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_perturbation(mut self, amplitude: f64) -> Self {
        self.perturbation_amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidParams(format!(
                "step_size must be > 0 (got {})",
                self.step_size
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParams(format!("t_end must be >= 0 (got {})", self.t_end)));
        }
        if !(self.perturbation_amplitude.is_finite() && self.perturbation_amplitude >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "perturbation_amplitude must be >= 0 (got {})",
                self.perturbation_amplitude
            )));
        }
        Ok(())
    }

    pub fn warmup_limit(&self) -> f64 {
        self.warmup_cap.unwrap_or(10.0 * self.t_end)
    }
}

/// What observers see after each step. Slices borrow the live state.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample<'a> {
    pub time: f64,
    pub positions: &'a [f64],
    pub velocities: &'a [f64],
    pub stuck: &'a [bool],
    pub any_slipping: bool,
}

impl<'a> TrajectorySample<'a> {
    pub fn of(state: &'a SystemState) -> Self {
        TrajectorySample {
            time: state.time,
            positions: state.positions(),
            velocities: state.velocities(),
            stuck: &state.stuck,
            any_slipping: !state.all_stuck(),
        }
    }
}

pub trait StepObserver {
    fn observe(&mut self, sample: &TrajectorySample<'_>) -> Result<()>;
}

/// Right-hand side of the chain with the stick flags frozen for one step.
struct ChainField<'a> {
    params: &'a ModelParams,
    stuck: &'a [bool],
    origin_time: f64,
}

impl VectorField for ChainField<'_> {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.stuck.len();
        let (x, v) = y.split_at(n);
        let (dx, dv) = dy.split_at_mut(n);
        let plate = self.params.plate_velocity * (self.origin_time + t);
        dx.copy_from_slice(v);
        for i in 0..n {
            let force = force_unchecked(i, x, plate, self.params);
            dv[i] = block_acceleration(force, v[i], self.stuck[i], self.params);
        }
    }
}

/// Steps a [`SystemState`] forward with a fixed step size.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: ModelParams,
    h: f64,
    fast_forward: bool,
    ws: Workspace,
    spare: Option<History>,
}

impl Integrator {
    pub fn new(params: ModelParams, step_size: f64) -> Self {
        Integrator {
            params,
            h: step_size,
            fast_forward: true,
            ws: Workspace::new(2 * params.n_blocks),
            spare: None,
        }
    }

    pub fn from_config(params: ModelParams, cfg: &IntegratorConfig) -> Self {
        let mut it = Self::new(params, cfg.step_size);
        it.fast_forward = cfg.fast_forward;
        it
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// One explicit-midpoint step that (re)starts the multistep history.
    pub fn bootstrap_step(&mut self, state: &mut SystemState) {
        let field = ChainField {
            params: &self.params,
            stuck: &state.stuck,
            origin_time: state.origin_time,
        };
        let recycle = state.history.take().or_else(|| self.spare.take());
        let hist = adams::midpoint_step(&field, state.time, self.h, &mut state.y, &mut self.ws, recycle);
        state.history = Some(hist);
        state.time += self.h;
    }

    /// One AB2/AM3 PECE step. Needs the history left by a previous step.
    pub fn pece_step(&mut self, state: &mut SystemState) -> Result<()> {
        let hist = state.history.as_mut().ok_or(Error::MissingHistory)?;
        let field = ChainField {
            params: &self.params,
            stuck: &state.stuck,
            origin_time: state.origin_time,
        };
        adams::pece_step(&field, state.time, self.h, &mut state.y, hist, &mut self.ws);
        state.time += self.h;
        Ok(())
    }

    /// Clamps negative velocities to zero (sticking the block), releases stuck
    /// blocks loaded beyond `F0` and unsticks blocks that picked up speed.
    /// Any change of a stuck flag discards the multistep history.
    ///
    /// Returns whether any flag changed.
    pub fn post_step_projection(&mut self, state: &mut SystemState) -> bool {
        let n = state.n_blocks();
        let mut flipped = false;
        {
            let (_, v) = state.y.split_at_mut(n);
            for (vi, stuck) in v.iter_mut().zip(state.stuck.iter_mut()) {
                if *vi < 0.0 {
                    *vi = 0.0;
                    if !*stuck {
                        *stuck = true;
                        flipped = true;
                    }
                } else if *vi > 0.0 && *stuck {
                    *stuck = false;
                    flipped = true;
                }
            }
        }
        let plate = self.params.plate_velocity * state.load_time();
        let x = &state.y[..n];
        for (i, stuck) in state.stuck.iter_mut().enumerate() {
            if *stuck && force_unchecked(i, x, plate, &self.params) > self.params.friction.f0 {
                *stuck = false;
                flipped = true;
            }
        }
        if flipped {
            self.spare = state.history.take();
        }
        flipped
    }

    /// Raw step: bootstrap if there is no history, PECE otherwise.
    fn raw_step(&mut self, state: &mut SystemState) {
        if state.history.is_some() {
            // history present, cannot fail
            let _ = self.pece_step(state);
        } else {
            self.bootstrap_step(state);
        }
    }

    fn check_finite(state: &SystemState) -> Result<()> {
        let n = state.n_blocks();
        match state.y.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFinite {
                time: state.time,
                block: k % n,
            }),
            None => Ok(()),
        }
    }

    /// Largest forced load over all blocks at plate time `load_time`.
    fn max_force(&self, state: &SystemState, load_time: f64) -> f64 {
        let n = state.n_blocks();
        let plate = self.params.plate_velocity * load_time;
        let x = &state.y[..n];
        (0..n)
            .map(|i| force_unchecked(i, x, plate, &self.params))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// For a globally stuck state at step `k` of a run started at `t0`, the
    /// number of following steps that cannot move any block.
    ///
    /// Forces grow monotonically with time while nothing moves, so every step
    /// ending before the last index `K` with all forces `<= F0` is an exact
    /// identity on the state.
    fn quiet_steps(&self, state: &SystemState, t0: f64, k: u64, n_steps: u64) -> u64 {
        let f0 = self.params.friction.f0;
        let h = self.h;
        let at = |j: u64| state.origin_time + (t0 + j as f64 * h);
        if self.max_force(state, at(k)) > f0 {
            return 0;
        }
        let rate = self.params.plate_stiffness * self.params.plate_velocity;
        let gap = f0 - self.max_force(state, at(k));
        let guess = (gap / (rate * h)).floor();
        let mut last = if guess.is_finite() {
            (k + guess.max(0.0) as u64).min(n_steps)
        } else {
            n_steps
        };
        while last > k && self.max_force(state, at(last)) > f0 {
            last -= 1;
        }
        while last < n_steps && self.max_force(state, at(last + 1)) <= f0 {
            last += 1;
        }
        last.saturating_sub(k + 1)
    }

    /// Advances `state` to `t_end`, running the projection and then every
    /// observer (in order) after each step.
    pub fn integrate(
        &mut self,
        state: &mut SystemState,
        t_end: f64,
        observers: &mut [&mut dyn StepObserver],
    ) -> Result<()> {
        let t0 = state.time;
        if !(t_end > t0) {
            return Ok(());
        }
        let h = self.h;
        let n_steps = ((t_end - t0) / h).round() as u64;
        let mut k = 0u64;
        while k < n_steps {
            if self.fast_forward && state.all_stuck() {
                let quiet = self.quiet_steps(state, t0, k, n_steps);
                if quiet > 0 {
                    if state.history.is_none() {
                        let dim = state.y.len();
                        let mut hist = self.spare.take().unwrap_or(History {
                            current: Vec::new(),
                            previous: Vec::new(),
                        });
                        hist.current.clear();
                        hist.current.resize(dim, 0.0);
                        hist.previous.clear();
                        hist.previous.resize(dim, 0.0);
                        state.history = Some(hist);
                    }
                    for _ in 0..quiet {
                        k += 1;
                        state.time = t0 + k as f64 * h;
                        let sample = TrajectorySample::of(state);
                        for obs in observers.iter_mut() {
                            obs.observe(&sample)?;
                        }
                    }
                    continue;
                }
            }
            self.raw_step(state);
            k += 1;
            state.time = t0 + k as f64 * h;
            Self::check_finite(state)?;
            self.post_step_projection(state);
            let sample = TrajectorySample::of(state);
            for obs in observers.iter_mut() {
                obs.observe(&sample)?;
            }
        }
        Ok(())
    }

    /// Steps until every block is stuck again, starting from a state in which
    /// at least one block moves. Returns `false` if `cap` is reached first.
    fn run_to_global_stick(&mut self, state: &mut SystemState, cap: f64) -> Result<bool> {
        let t0 = state.time;
        let h = self.h;
        let max_steps = (cap / h).ceil() as u64;
        for k in 1..=max_steps {
            self.raw_step(state);
            state.time = t0 + k as f64 * h;
            Self::check_finite(state)?;
            self.post_step_projection(state);
            if state.all_stuck() {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Random generator for run `index` under a master seed. Runs never share a stream.
pub fn run_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Perturbed rest state, integrated to its first global stick and relabelled
/// so that the stick happens at `t = 0`.
pub fn warm_up(p: &ModelParams, cfg: &IntegratorConfig) -> Result<SystemState> {
    warm_up_with(p, cfg, &mut run_rng(cfg.seed, 0))
}

pub fn warm_up_with<R: Rng>(p: &ModelParams, cfg: &IntegratorConfig, rng: &mut R) -> Result<SystemState> {
    p.validate()?;
    cfg.validate()?;
    let delta = cfg.perturbation_amplitude;
    let positions: Vec<f64> = (0..p.n_blocks)
        .map(|_| {
            if delta > 0.0 {
                rng.gen_range(-delta..=delta)
            } else {
                0.0
            }
        })
        .collect();
    let mut state = SystemState::at_rest(&positions);
    let mut integrator = Integrator::from_config(*p, cfg);
    integrator.post_step_projection(&mut state);
    if state.all_stuck() {
        return Ok(state);
    }
    let cap = cfg.warmup_limit();
    if !integrator.run_to_global_stick(&mut state, cap)? {
        return Err(Error::NoGlobalStick { cap });
    }
    state.origin_time += state.time;
    state.time = 0.0;
    state.history = None;
    Ok(state)
}

/// Convenience wrapper around [`Integrator::integrate`].
pub fn integrate(
    mut state: SystemState,
    p: &ModelParams,
    cfg: &IntegratorConfig,
    observers: &mut [&mut dyn StepObserver],
) -> Result<SystemState> {
    cfg.validate()?;
    Integrator::from_config(*p, cfg).integrate(&mut state, cfg.t_end, observers)?;
    Ok(state)
}
