//! Physical model of the spring-block chain.
//!
//! Every block `i` obeys
//!
//! ```text
//! m x_i'' = k_c (x_{i+1} - 2 x_i + x_{i-1}) + k_p (V t - x_i) - F(x_i')
//! ```
//!
//! with free ends (`x_0 = x_1`, `x_{N+1} = x_N`) and the asymmetric
//! velocity-weakening friction law: a block with `v > 0` feels
//! `F0 (1 - s) / (1 + 2 a v / (1 - s))`, a block at rest is held by any
//! static force in `(-inf, F0]`. All quantities are dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Velocity-weakening friction law constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionParams {
    /// Maximum static friction force.
    pub f0: f64,
    /// Fractional friction drop at slip onset, in (0, 1).
    pub sigma: f64,
    /// Weakening rate of the dynamic friction with slip speed.
    pub alpha: f64,
}

impl FrictionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(Error::InvalidParams(format!("f0 must be > 0 (got {})", self.f0)));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidParams(format!(
                "sigma must lie in (0, 1) (got {})",
                self.sigma
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be > 0 (got {})", self.alpha)));
        }
        Ok(())
    }

    /// Dynamic friction in the limit `v -> 0+`, i.e. `F0 (1 - sigma)`.
    #[inline]
    pub fn onset_friction(&self) -> f64 {
        self.f0 * (1.0 - self.sigma)
    }

    #[inline]
    pub(crate) fn dynamic_unchecked(&self, v: f64) -> f64 {
        let drop = 1.0 - self.sigma;
        self.f0 * drop / (1.0 + 2.0 * self.alpha * v / drop)
    }
}

fn default_spacing() -> f64 {
    1.0
}

/// Constants of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_blocks: usize,
    pub mass: f64,
    /// Inter-block spring constant `k_c`.
    pub coupling_stiffness: f64,
    /// Block-to-plate spring constant `k_p`.
    pub plate_stiffness: f64,
    /// Driving plate velocity `V`.
    pub plate_velocity: f64,
    pub friction: FrictionParams,
    /// Rest spacing between blocks. It never enters the dynamics.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

impl ModelParams {
    /// Single block, `m = k_p = V/0.001 = F0 = 1`, `k_c = 60`, `sigma = 0.01`, `alpha = 1`.
    pub fn single_block() -> Self {
        ModelParams {
            n_blocks: 1,
            mass: 1.0,
            coupling_stiffness: 60.0,
            plate_stiffness: 1.0,
            plate_velocity: 0.001,
            friction: FrictionParams {
                f0: 1.0,
                sigma: 0.01,
                alpha: 1.0,
            },
            spacing: 1.0,
        }
    }

    /// 200-block chain with `k_c = 100` (so `l^2 = 100`) and the given `alpha`.
    pub fn long_chain(alpha: f64) -> Self {
        ModelParams {
            n_blocks: 200,
            coupling_stiffness: 100.0,
            friction: FrictionParams {
                alpha,
                ..Self::single_block().friction
            },
            ..Self::single_block()
        }
    }

    /// 32-block base configuration of the block-doubling study (`alpha = 2`).
    pub fn scaling_base() -> Self {
        ModelParams {
            n_blocks: 32,
            ..Self::long_chain(2.0)
        }
    }

    pub fn with_blocks(mut self, n_blocks: usize) -> Self {
        self.n_blocks = n_blocks;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.friction.alpha = alpha;
        self
    }

    /// `k_c / k_p`, usually written `l^2`.
    pub fn stiffness_ratio(&self) -> f64 {
        self.coupling_stiffness / self.plate_stiffness
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::InvalidParams("n_blocks must be >= 1".into()));
        }
        let positive = [
            ("mass", self.mass),
            ("coupling_stiffness", self.coupling_stiffness),
            ("plate_stiffness", self.plate_stiffness),
            ("plate_velocity", self.plate_velocity),
            ("spacing", self.spacing),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0 (got {value})")));
            }
        }
        self.friction.validate()?;
        if self.coupling_stiffness < self.plate_stiffness {
            return Err(Error::InvalidParams(format!(
                "coupling_stiffness ({}) must not be below plate_stiffness ({})",
                self.coupling_stiffness, self.plate_stiffness
            )));
        }
        if self.coupling_stiffness == self.plate_stiffness {
            log::warn!("coupling_stiffness equals plate_stiffness (l^2 = 1)");
        }
        Ok(())
    }
}

/// Vector-field evaluations kept by the two-step Adams scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    /// `f_n`, evaluated at the current state.
    pub current: Vec<f64>,
    /// `f_{n-1}`.
    pub previous: Vec<f64>,
}

/// Dynamic state of the chain.
///
/// The ODE state is stored flat as `[x_1..x_N, v_1..v_N]` so the integrator
/// can treat it as a single vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    /// Absolute time of the relabelled origin; the plate sits at `V (origin_time + time)`.
    pub origin_time: f64,
    pub(crate) y: Vec<f64>,
    pub stuck: Vec<bool>,
    pub history: Option<History>,
}

impl SystemState {
    /// All blocks at rest, stuck, at the given displacements.
    pub fn at_rest(positions: &[f64]) -> Self {
        let n = positions.len();
        let mut y = Vec::with_capacity(2 * n);
        y.extend_from_slice(positions);
        y.resize(2 * n, 0.0);
        SystemState {
            time: 0.0,
            origin_time: 0.0,
            y,
            stuck: vec![true; n],
            history: None,
        }
    }

    /// Builds a state from explicit positions, velocities and stuck flags.
    pub fn from_parts(positions: &[f64], velocities: &[f64], stuck: &[bool]) -> Result<Self> {
        let n = positions.len();
        if velocities.len() != n || stuck.len() != n {
            return Err(Error::InvalidParams(format!(
                "state arrays disagree in length ({}, {}, {})",
                n,
                velocities.len(),
                stuck.len()
            )));
        }
        for (i, (&v, &s)) in velocities.iter().zip(stuck).enumerate() {
            if v < 0.0 || (s && v != 0.0) {
                return Err(Error::InvalidParams(format!(
                    "block {i}: velocity {v} inconsistent with stuck = {s}"
                )));
            }
        }
        let mut y = positions.to_vec();
        y.extend_from_slice(velocities);
        Ok(SystemState {
            time: 0.0,
            origin_time: 0.0,
            y,
            stuck: stuck.to_vec(),
            history: None,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.stuck.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.y[..self.n_blocks()]
    }

    pub fn velocities(&self) -> &[f64] {
        &self.y[self.n_blocks()..]
    }

    /// Time on the plate clock, used for the loading term.
    pub fn load_time(&self) -> f64 {
        self.origin_time + self.time
    }

    pub fn all_stuck(&self) -> bool {
        self.stuck.iter().all(|&s| s)
    }

    pub fn center_of_mass(&self) -> f64 {
        let x = self.positions();
        x.iter().sum::<f64>() / x.len() as f64
    }

    /// Flat `[positions, velocities]` vector.
    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }
}

/// Dynamic friction for a slipping block.
pub fn dynamic_friction(v: f64, fp: &FrictionParams) -> Result<f64> {
    if v > 0.0 {
        Ok(fp.dynamic_unchecked(v))
    } else {
        Err(Error::FrictionDomain(v))
    }
}

#[inline]
pub(crate) fn force_unchecked(i: usize, x: &[f64], plate: f64, p: &ModelParams) -> f64 {
    let n = x.len();
    let left = if i == 0 { x[0] } else { x[i - 1] };
    let right = if i + 1 == n { x[n - 1] } else { x[i + 1] };
    p.coupling_stiffness * (right - 2.0 * x[i] + left) + p.plate_stiffness * (plate - x[i])
}

/// Coupling plus plate-spring force on block `i` (zero-based) at plate time `t`.
pub fn net_elastic_force(i: usize, positions: &[f64], t: f64, p: &ModelParams) -> Result<f64> {
    if i >= positions.len() {
        return Err(Error::BlockIndex {
            index: i,
            n_blocks: positions.len(),
        });
    }
    Ok(force_unchecked(i, positions, p.plate_velocity * t, p))
}

/// True when the elastic resultant exceeds the static friction threshold.
#[inline]
pub fn stick_release_check(force: f64, fp: &FrictionParams) -> bool {
    force > fp.f0
}

#[inline]
pub(crate) fn block_acceleration(force: f64, v: f64, stuck: bool, p: &ModelParams) -> f64 {
    let fp = &p.friction;
    if stuck {
        if stick_release_check(force, fp) {
            (force - fp.onset_friction()) / p.mass
        } else {
            0.0
        }
    } else if v > 0.0 {
        (force - fp.dynamic_unchecked(v)) / p.mass
    } else {
        // just released, or an intermediate stage dipped below zero
        (force - fp.onset_friction()) / p.mass
    }
}

/// Acceleration of block `i` in the given state.
pub fn acceleration(i: usize, state: &SystemState, p: &ModelParams) -> Result<f64> {
    let force = net_elastic_force(i, state.positions(), state.load_time(), p)?;
    Ok(block_acceleration(force, state.velocities()[i], state.stuck[i], p))
}
