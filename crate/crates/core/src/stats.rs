//! Magnitude statistics: binned distributions, the cumulative ratio P(M),
//! the rate R(M1), Gutenberg-Richter slope fits and distances between
//! distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventCatalog;

pub const DEFAULT_BIN_WIDTH: f64 = 0.2;
/// Linear region of the `alpha = 1`, `N = 200` distribution.
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (-3.7, 1.7);

/// Which magnitude a distribution is built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    /// `M = log10(total slip)`.
    Ten,
    /// `M1 = ln(total slip)`.
    Natural,
}

impl LogBase {
    pub fn magnitudes(self, catalog: &EventCatalog) -> Vec<f64> {
        match self {
            LogBase::Ten => catalog.magnitudes_log10(),
            LogBase::Natural => catalog.magnitudes_ln(),
        }
    }
}

/// Histogram over `[k dM, (k+1) dM)` bins plus the sorted raw magnitudes,
/// so that the cumulative ratio is exact rather than bin-smoothed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeDistribution {
    pub bin_width: f64,
    /// Lattice index of the first bin; its lower edge is `first_bin * bin_width`.
    pub first_bin: i64,
    pub counts: Vec<u64>,
    pub total: u64,
    pub log_base: LogBase,
    sorted: Vec<f64>,
}

impl MagnitudeDistribution {
    pub fn from_magnitudes(magnitudes: &[f64], bin_width: f64, log_base: LogBase) -> Result<Self> {
        if magnitudes.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::InvalidParams(format!("bin width must be > 0 (got {bin_width})")));
        }
        let mut sorted = magnitudes.to_vec();
        sorted.sort_by(f64::total_cmp);
        let index = |m: f64| (m / bin_width).floor() as i64;
        let first_bin = index(sorted[0]);
        let last_bin = index(sorted[sorted.len() - 1]);
        let mut counts = vec![0u64; (last_bin - first_bin + 1) as usize];
        for &m in &sorted {
            counts[(index(m) - first_bin) as usize] += 1;
        }
        Ok(MagnitudeDistribution {
            bin_width,
            first_bin,
            counts,
            total: sorted.len() as u64,
            log_base,
            sorted,
        })
    }

    pub fn bin_origin(&self) -> f64 {
        self.first_bin as f64 * self.bin_width
    }

    /// Lower edge of bin `k` (0-based within this distribution).
    pub fn bin_lower(&self, k: usize) -> f64 {
        (self.first_bin + k as i64) as f64 * self.bin_width
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_lower(k) + 0.5 * self.bin_width
    }

    pub fn min_magnitude(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max_magnitude(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of events with magnitude `>= m`.
    pub fn cumulative_ratio(&self, m: f64) -> f64 {
        let below = self.sorted.partition_point(|&x| x < m);
        (self.sorted.len() - below) as f64 / self.total as f64
    }

    /// `(M, log10 P(M))` at every bin's lower edge.
    pub fn cumulative_curve(&self) -> Vec<(f64, f64)> {
        (0..self.counts.len())
            .map(|k| {
                let m = self.bin_lower(k);
                (m, self.cumulative_ratio(m).log10())
            })
            .collect()
    }

    /// `(bin center, R)` for every bin, zero-count bins included.
    pub fn rates(&self) -> Vec<(f64, f64)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (self.bin_center(k), c as f64 / self.total as f64))
            .collect()
    }

    /// `(bin center, ln R)` over the nonzero bins.
    pub fn log_rates(&self) -> Vec<(f64, f64)> {
        self.rates()
            .into_iter()
            .filter(|&(_, r)| r > 0.0)
            .map(|(m, r)| (m, r.ln()))
            .collect()
    }

    /// Fraction of events with magnitude in `[lower, lower + 1)`, i.e. one
    /// decade of total slip for base-10 magnitudes.
    pub fn decade_fraction(&self, lower: f64) -> f64 {
        self.cumulative_ratio(lower) - self.cumulative_ratio(lower + 1.0)
    }
}

pub fn build_distribution(catalog: &EventCatalog, bin_width: f64, log_base: LogBase) -> Result<MagnitudeDistribution> {
    MagnitudeDistribution::from_magnitudes(&log_base.magnitudes(catalog), bin_width, log_base)
}

/// Rate distribution R over natural-log magnitudes.
pub fn rate_distribution(dist: &MagnitudeDistribution) -> Result<Vec<(f64, f64)>> {
    if dist.log_base != LogBase::Natural {
        return Err(Error::Incompatible(
            "rate distribution expects natural-log magnitudes".into(),
        ));
    }
    Ok(dist.rates())
}

/// Least-squares line through `(x, y)` points: `(slope, intercept, rms residual)`.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum();
    Some((slope, intercept, (rss / nf).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrFit {
    /// `B` in `log10 P(M) ~ c - B M`.
    pub slope_b: f64,
    /// `c`; the log of the total rate up to normalization.
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub residual_rms: f64,
    /// `b = 1.5 B`.
    pub b_value: f64,
    pub points_used: usize,
}

impl GrFit {
    pub fn from_points(points: &[(f64, f64)], window: (f64, f64)) -> Result<Self> {
        let (slope, intercept, rms) = least_squares(points).ok_or(Error::InsufficientBins {
            lo: window.0,
            hi: window.1,
            found: points.len(),
        })?;
        let slope_b = -slope;
        Ok(GrFit {
            slope_b,
            intercept,
            fit_window: window,
            residual_rms: rms,
            b_value: 1.5 * slope_b,
            points_used: points.len(),
        })
    }
}

/// Fits `log10 P(M)` against `M` over the nonzero bins whose lower edge lies
/// inside `window`.
pub fn fit_gr_slope(dist: &MagnitudeDistribution, window: (f64, f64)) -> Result<GrFit> {
    let (lo, hi) = window;
    let points: Vec<(f64, f64)> = (0..dist.counts.len())
        .filter(|&k| dist.counts[k] > 0)
        .map(|k| (dist.bin_lower(k), dist.cumulative_ratio(dist.bin_lower(k)).log10()))
        .filter(|&(m, _)| m >= lo && m <= hi)
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientBins {
            lo,
            hi,
            found: points.len(),
        });
    }
    GrFit::from_points(&points, window)
}

/// Mean block displacement for each `(time, positions)` sample.
pub fn center_of_mass_series<'a, I>(samples: I) -> Vec<(f64, f64)>
where
    I: IntoIterator<Item = (f64, &'a [f64])>,
{
    samples
        .into_iter()
        .map(|(t, x)| (t, x.iter().sum::<f64>() / x.len() as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Euclidean,
    Max,
}

/// `ln R` on the bins both distributions populate, lowest common bin dropped.
fn check_compatible(a: &MagnitudeDistribution, b: &MagnitudeDistribution) -> Result<()> {
    if a.bin_width != b.bin_width || a.log_base != b.log_base {
        return Err(Error::Incompatible(format!(
            "bin widths {} vs {}, bases {:?} vs {:?}",
            a.bin_width, b.bin_width, a.log_base, b.log_base
        )));
    }
    Ok(())
}

impl MagnitudeDistribution {
    /// Natural log of the relative frequency of lattice bin `idx`, if occupied.
    pub fn log_rate_at(&self, idx: i64) -> Option<f64> {
        let k = idx - self.first_bin;
        if k < 0 || k as usize >= self.counts.len() || self.counts[k as usize] == 0 {
            None
        } else {
            Some((self.counts[k as usize] as f64 / self.total as f64).ln())
        }
    }
}

/// Lattice indices of the bins occupied in every distribution, lowest one
/// dropped.
pub fn common_support(dists: &[MagnitudeDistribution]) -> Result<Vec<i64>> {
    let first = dists.first().ok_or(Error::EmptyIntersection)?;
    for d in &dists[1..] {
        check_compatible(first, d)?;
    }
    let lo = dists.iter().map(|d| d.first_bin).max().unwrap_or(0);
    let hi = dists
        .iter()
        .map(|d| d.first_bin + d.counts.len() as i64)
        .min()
        .unwrap_or(0);
    let support: Vec<i64> = (lo..hi)
        .filter(|&idx| dists.iter().all(|d| d.log_rate_at(idx).is_some()))
        .skip(1)
        .collect();
    if support.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(support)
}

/// `(bin index, ln R_a, ln R_b)` over the common support of `a` and `b`.
pub fn common_log_rates(a: &MagnitudeDistribution, b: &MagnitudeDistribution) -> Result<Vec<(i64, f64, f64)>> {
    let support = common_support(&[a.clone(), b.clone()])?;
    Ok(support
        .into_iter()
        .filter_map(|idx| Some((idx, a.log_rate_at(idx)?, b.log_rate_at(idx)?)))
        .collect())
}

/// Distance between the log rates of `a` and `b` restricted to `support`,
/// which must be occupied in both.
pub fn distance_on_support(
    a: &MagnitudeDistribution,
    b: &MagnitudeDistribution,
    support: &[i64],
    norm: Norm,
) -> Result<f64> {
    check_compatible(a, b)?;
    if support.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let mut diffs = Vec::with_capacity(support.len());
    for &idx in support {
        match (a.log_rate_at(idx), b.log_rate_at(idx)) {
            (Some(ra), Some(rb)) => diffs.push((ra - rb).abs()),
            _ => return Err(Error::EmptyIntersection),
        }
    }
    Ok(match norm {
        Norm::Euclidean => diffs.iter().map(|d| d * d).sum::<f64>().sqrt(),
        Norm::Max => diffs.iter().copied().fold(0.0, f64::max),
    })
}

/// Distance between two distributions on their common support.
pub fn distribution_distance(a: &MagnitudeDistribution, b: &MagnitudeDistribution, norm: Norm) -> Result<f64> {
    let support = common_support(&[a.clone(), b.clone()])?;
    distance_on_support(a, b, &support, norm)
}
