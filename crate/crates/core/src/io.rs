//! Run configuration and on-disk formats.
//!
//! Every CSV starts with one `#` comment line carrying the tool version, the
//! seed and the model/integrator constants, followed by a header row. Floats
//! are written with 17 significant digits so they read back bit-exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventCatalog, EventRecord};
use crate::integrator::IntegratorConfig;
use crate::model::ModelParams;
use crate::run::Trajectory;
use crate::scaling::{DistanceRow, LevelSummary};
use crate::stats::{GrFit, MagnitudeDistribution, DEFAULT_BIN_WIDTH, DEFAULT_FIT_WINDOW};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

fn default_stride() -> usize {
    100
}
fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}
fn default_fit_window() -> (f64, f64) {
    DEFAULT_FIT_WINDOW
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Write the stride-sampled trajectory CSV.
    #[serde(default)]
    pub trajectory: bool,
    #[serde(default = "default_stride")]
    pub trajectory_stride: usize,
    #[serde(default = "default_true")]
    pub catalog_json: bool,
    /// Include per-block slips in the JSON catalog.
    #[serde(default)]
    pub include_slips: bool,
    /// Also write the distributions and the slope fit after the run.
    #[serde(default = "default_true")]
    pub statistics: bool,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default = "default_fit_window")]
    pub fit_window: (f64, f64),
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trajectory: false,
            trajectory_stride: default_stride(),
            catalog_json: true,
            include_slips: false,
            statistics: true,
            bin_width: DEFAULT_BIN_WIDTH,
            fit_window: DEFAULT_FIT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Alpha values for the `sweep` subcommand.
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(model: ModelParams, integrator: IntegratorConfig) -> Self {
        RunConfig {
            model,
            integrator,
            outputs: OutputConfig::default(),
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.integrator.validate()?;
        if self.outputs.trajectory_stride == 0 {
            return Err(Error::InvalidParams("trajectory_stride must be >= 1".into()));
        }
        if !(self.outputs.bin_width > 0.0) {
            return Err(Error::InvalidParams("bin_width must be > 0".into()));
        }
        if let Some(alphas) = &self.sweep {
            for &a in alphas {
                self.model.with_alpha(a).validate()?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// One-line description of how a file was produced.
pub fn provenance(p: &ModelParams, cfg: &IntegratorConfig) -> String {
    format!(
        "{TOOL_VERSION} seed={} N={} m={} k_c={} k_p={} V={} F0={} sigma={} alpha={} h={} t_end={} delta={}",
        cfg.seed,
        p.n_blocks,
        p.mass,
        p.coupling_stiffness,
        p.plate_stiffness,
        p.plate_velocity,
        p.friction.f0,
        p.friction.sigma,
        p.friction.alpha,
        cfg.step_size,
        cfg.t_end,
        cfg.perturbation_amplitude,
    )
}

/// Lossless decimal rendering.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `# comment`, a header and the rows.
pub fn write_table<I>(path: &Path, comment: &str, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = create(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(out, "# {comment}").map_err(io_err)?;
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        writeln!(out, "{}", row.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

const CATALOG_HEADER: [&str; 5] = [
    "start",
    "end",
    "magnitude_log10",
    "magnitude_ln",
    "participating_blocks",
];

pub fn write_catalog_csv(path: &Path, catalog: &EventCatalog, comment: &str) -> Result<()> {
    let rows = catalog.events.iter().map(|e| {
        vec![
            fmt_f64(e.start_time),
            fmt_f64(e.end_time),
            fmt_f64(e.magnitude_log10),
            fmt_f64(e.magnitude_ln),
            e.participating_blocks.to_string(),
        ]
    });
    write_table(path, comment, &CATALOG_HEADER, rows)
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    start: f64,
    end: f64,
    magnitude_log10: f64,
    magnitude_ln: f64,
    participating_blocks: usize,
}

pub fn read_catalog_csv(path: &Path) -> Result<EventCatalog> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let mut events = Vec::new();
    for row in reader.deserialize::<CatalogRow>() {
        let r = row.map_err(csv_err)?;
        events.push(EventRecord {
            start_time: r.start,
            end_time: r.end,
            per_block_slip: Vec::new(),
            magnitude_log10: r.magnitude_log10,
            magnitude_ln: r.magnitude_ln,
            participating_blocks: r.participating_blocks,
        });
    }
    let end = events.last().map_or(0.0, |e| e.end_time);
    Ok(EventCatalog::new(events, (0.0, end)))
}

#[derive(Serialize, Deserialize)]
struct CatalogDocument {
    provenance: String,
    total_events: usize,
    window: (f64, f64),
    events: Vec<EventRecord>,
}

pub fn write_catalog_json(path: &Path, catalog: &EventCatalog, comment: &str, include_slips: bool) -> Result<()> {
    let events = catalog
        .events
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if !include_slips {
                e.per_block_slip.clear();
            }
            e
        })
        .collect();
    write_json(
        path,
        &CatalogDocument {
            provenance: comment.to_string(),
            total_events: catalog.total_events(),
            window: catalog.window,
            events,
        },
    )
}

pub fn read_catalog_json(path: &Path) -> Result<EventCatalog> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: CatalogDocument = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(EventCatalog::new(doc.events, doc.window))
}

/// Reads a catalog, choosing the format from the extension.
pub fn read_catalog(path: &Path) -> Result<EventCatalog> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_catalog_json(path),
        _ => read_catalog_csv(path),
    }
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, comment: &str) -> Result<()> {
    let n = traj.positions.first().map_or(0, Vec::len);
    let mut header = vec!["time".to_string(), "center_of_mass".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=n).map(|i| format!("v_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..traj.len()).map(|k| {
        let x = &traj.positions[k];
        let mut row = Vec::with_capacity(2 + 2 * n);
        row.push(fmt_f64(traj.times[k]));
        row.push(fmt_f64(x.iter().sum::<f64>() / n as f64));
        row.extend(x.iter().copied().map(fmt_f64));
        row.extend(traj.velocities[k].iter().copied().map(fmt_f64));
        row
    });
    write_table(path, comment, &header, rows)
}

pub fn write_center_of_mass_csv(path: &Path, series: &[(f64, f64)], comment: &str) -> Result<()> {
    let rows = series.iter().map(|&(t, x)| vec![fmt_f64(t), fmt_f64(x)]);
    write_table(path, comment, &["time", "center_of_mass"], rows)
}

/// `(M, log10 P(M))` pairs.
pub fn write_cumulative_csv(path: &Path, dist: &MagnitudeDistribution, comment: &str) -> Result<()> {
    let rows = dist
        .cumulative_curve()
        .into_iter()
        .map(|(m, lp)| vec![fmt_f64(m), fmt_f64(lp)]);
    write_table(path, comment, &["magnitude", "log10_p"], rows)
}

/// `(M1, R, ln R)` over the nonzero bins.
pub fn write_rate_csv(path: &Path, dist: &MagnitudeDistribution, comment: &str) -> Result<()> {
    let rows = dist
        .rates()
        .into_iter()
        .filter(|&(_, r)| r > 0.0)
        .map(|(m, r)| vec![fmt_f64(m), fmt_f64(r), fmt_f64(r.ln())]);
    write_table(path, comment, &["magnitude", "rate", "ln_rate"], rows)
}

/// Bin counts with their lattice indices; enough to rebuild rates.
pub fn write_distribution_csv(path: &Path, dist: &MagnitudeDistribution, comment: &str) -> Result<()> {
    let rows = dist.counts.iter().enumerate().map(|(k, &c)| {
        vec![
            (dist.first_bin + k as i64).to_string(),
            fmt_f64(dist.bin_lower(k)),
            fmt_f64(dist.bin_center(k)),
            c.to_string(),
            fmt_f64(c as f64 / dist.total as f64),
        ]
    });
    write_table(path, comment, &["bin", "lower", "center", "count", "rate"], rows)
}

#[derive(Debug, Serialize)]
pub struct FitSummary<'a> {
    pub provenance: &'a str,
    pub total_events: u64,
    pub bin_width: f64,
    #[serde(flatten)]
    pub fit: GrFit,
}

pub fn write_fit_json(path: &Path, fit: &GrFit, dist: &MagnitudeDistribution, comment: &str) -> Result<()> {
    write_json(
        path,
        &FitSummary {
            provenance: comment,
            total_events: dist.total,
            bin_width: dist.bin_width,
            fit: *fit,
        },
    )
}

pub fn write_levels_csv(path: &Path, levels: &[LevelSummary], comment: &str) -> Result<()> {
    let rows = levels.iter().map(|l| {
        let p = &l.level.params;
        vec![
            l.level.n.to_string(),
            p.n_blocks.to_string(),
            fmt_f64(p.mass),
            fmt_f64(p.coupling_stiffness),
            fmt_f64(p.plate_stiffness),
            fmt_f64(p.friction.f0),
            l.events.to_string(),
        ]
    });
    write_table(
        path,
        comment,
        &["level", "n_blocks", "mass", "k_c", "k_p", "f0", "events"],
        rows,
    )
}

pub fn write_distance_csv(path: &Path, rows: &[DistanceRow], comment: &str) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            format!("f{}-f{}", r.from, r.from + 1),
            fmt_f64(r.euclidean),
            fmt_f64(r.max),
        ]
    });
    write_table(path, comment, &["pair", "euclidean", "max"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{build_distribution, fit_gr_slope, LogBase};
    use proptest::prelude::*;

    fn catalog(slips: &[f64]) -> EventCatalog {
        let events = slips
            .iter()
            .enumerate()
            .map(|(i, &s)| EventRecord::from_slips(i as f64, i as f64 + 0.25, vec![s, s / 3.0]).unwrap())
            .collect();
        EventCatalog::new(events, (0.0, slips.len() as f64))
    }

    #[test]
    fn config_defaults_fill_in() {
        let text = r#"{
            "model": {"n_blocks": 5, "mass": 1, "coupling_stiffness": 60, "plate_stiffness": 1,
                      "plate_velocity": 0.001, "friction": {"f0": 1, "sigma": 0.01, "alpha": 1}},
            "integrator": {"t_end": 100}
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.integrator.step_size, 0.001);
        assert_eq!(cfg.outputs.bin_width, 0.2);
        assert_eq!(cfg.outputs.trajectory_stride, 100);
        assert_eq!(cfg.model.spacing, 1.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunConfig::new(ModelParams::single_block(), IntegratorConfig::new(10.0));
        cfg.outputs.trajectory_stride = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::new(ModelParams::single_block(), IntegratorConfig::new(10.0));
        cfg.sweep = Some(vec![1.0, -1.0]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_catalog_csv(&path, &catalog(&[1.0]), "meta").unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# meta");
        assert_eq!(lines[1], "start,end,magnitude_log10,magnitude_ln,participating_blocks");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",2"));
    }

    #[test]
    fn json_slips_are_optional() {
        let dir = tempfile::tempdir().unwrap();
        let cat = catalog(&[1.0, 2.0]);
        let with = dir.path().join("with.json");
        let without = dir.path().join("without.json");
        write_catalog_json(&with, &cat, "m", true).unwrap();
        write_catalog_json(&without, &cat, "m", false).unwrap();
        assert_eq!(read_catalog_json(&with).unwrap(), cat);
        let stripped = read_catalog_json(&without).unwrap();
        assert!(stripped.events.iter().all(|e| e.per_block_slip.is_empty()));
        assert!(!fs::read_to_string(&without).unwrap().contains("per_block_slip"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_preserves_statistics(slips in prop::collection::vec(1e-6f64..1e3, 3..60)) {
            let dir = tempfile::tempdir().unwrap();
            let cat = catalog(&slips);
            let csv_path = dir.path().join("cat.csv");
            let json_path = dir.path().join("cat.json");
            write_catalog_csv(&csv_path, &cat, "x").unwrap();
            write_catalog_json(&json_path, &cat, "x", false).unwrap();
            for back in [read_catalog(&csv_path).unwrap(), read_catalog(&json_path).unwrap()] {
                prop_assert_eq!(back.magnitudes_log10(), cat.magnitudes_log10());
                prop_assert_eq!(back.magnitudes_ln(), cat.magnitudes_ln());
                for base in [LogBase::Ten, LogBase::Natural] {
                    let a = build_distribution(&cat, 0.2, base).unwrap();
                    let b = build_distribution(&back, 0.2, base).unwrap();
                    prop_assert_eq!(&a, &b);
                    prop_assert_eq!(fit_gr_slope(&a, (-10.0, 10.0)).ok(), fit_gr_slope(&b, (-10.0, 10.0)).ok());
                }
            }
        }
    }
}
