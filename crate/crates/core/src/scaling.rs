//! Block-doubling study of the continuum limit.
//!
//! Going from `N` to `2N` blocks doubles `k_c` and halves `m`, `k_p` and
//! `F0`, so that `N m`, `k_c / N`, `N k_p` and `N F0` stay fixed. `sigma`,
//! `alpha` and `V` are untouched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::model::ModelParams;
use crate::run::{simulate_batch, RecordOptions};
use crate::stats::{build_distribution, common_support, distance_on_support, LogBase, MagnitudeDistribution, Norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLevel {
    pub n: u32,
    pub params: ModelParams,
}

impl ScalingLevel {
    pub fn n_blocks(&self) -> usize {
        self.params.n_blocks
    }

    /// `(N m, k_c / N, N k_p, N F0)`.
    pub fn continuum_constants(&self) -> [f64; 4] {
        let p = &self.params;
        let n = p.n_blocks as f64;
        [
            n * p.mass,
            p.coupling_stiffness / n,
            n * p.plate_stiffness,
            n * p.friction.f0,
        ]
    }
}

/// Applies `n` doublings to `base`.
pub fn rescale(base: &ModelParams, n: u32) -> ScalingLevel {
    let factor = 2f64.powi(n as i32);
    let mut p = *base;
    p.n_blocks = base.n_blocks << n;
    p.mass = base.mass / factor;
    p.plate_stiffness = base.plate_stiffness / factor;
    p.coupling_stiffness = base.coupling_stiffness * factor;
    p.friction.f0 = base.friction.f0 / factor;
    ScalingLevel { n, params: p }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    /// Compares level `from` with level `from + 1`.
    pub from: u32,
    pub euclidean: f64,
    pub max: f64,
}

/// Distances between successive distributions, all measured on the bins
/// occupied at every level (lowest such bin dropped), so each row compares
/// the same magnitude range.
pub fn distance_table(dists: &[MagnitudeDistribution]) -> Result<Vec<DistanceRow>> {
    let support = common_support(dists)?;
    dists
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            Ok(DistanceRow {
                from: i as u32,
                euclidean: distance_on_support(&w[0], &w[1], &support, Norm::Euclidean)?,
                max: distance_on_support(&w[0], &w[1], &support, Norm::Max)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: ScalingLevel,
    pub events: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub levels: Vec<LevelSummary>,
    pub distributions: Vec<MagnitudeDistribution>,
    pub distances: Vec<DistanceRow>,
}

/// Runs levels `0..=n_max` over the same horizon and compares their
/// natural-log rate distributions.
pub fn run_scaling_suite(
    base: &ModelParams,
    n_max: u32,
    cfg: &IntegratorConfig,
    bin_width: f64,
    workers: usize,
) -> Result<ScalingReport> {
    if n_max < 1 {
        return Err(Error::InvalidParams("n_max must be >= 1".into()));
    }
    base.validate()?;
    let levels: Vec<ScalingLevel> = (0..=n_max).map(|n| rescale(base, n)).collect();
    let jobs: Vec<ModelParams> = levels.iter().map(|l| l.params).collect();
    let runs = simulate_batch(&jobs, cfg, RecordOptions::default(), workers)?;

    let mut summaries = Vec::with_capacity(runs.len());
    let mut distributions = Vec::with_capacity(runs.len());
    for (level, run) in levels.iter().zip(&runs) {
        if run.catalog.is_empty() {
            return Err(Error::EmptyLevel {
                level: level.n,
                n_blocks: level.n_blocks(),
            });
        }
        distributions.push(build_distribution(&run.catalog, bin_width, LogBase::Natural)?);
        summaries.push(LevelSummary {
            level: *level,
            events: run.catalog.total_events(),
            wall_seconds: run.wall_time.as_secs_f64(),
        });
    }
    let distances = distance_table(&distributions)?;
    Ok(ScalingReport {
        levels: summaries,
        distributions,
        distances,
    })
}
