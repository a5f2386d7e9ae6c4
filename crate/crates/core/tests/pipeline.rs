use bkquake::io::{provenance, read_catalog, write_catalog_csv, write_catalog_json};
use bkquake::run::{simulate, RecordOptions};
use bkquake::stats::{build_distribution, fit_gr_slope, LogBase};
use bkquake::{IntegratorConfig, ModelParams};

#[test]
fn catalog_files_reproduce_statistics() {
    let p = ModelParams::long_chain(1.0).with_blocks(16);
    let cfg = IntegratorConfig::new(4_000.0).with_seed(21);
    let out = simulate(&p, &cfg, RecordOptions::default()).unwrap();
    assert!(out.catalog.total_events() > 20);

    let dir = tempfile::tempdir().unwrap();
    let comment = provenance(&p, &cfg);
    let csv = dir.path().join("c.csv");
    let json = dir.path().join("c.json");
    write_catalog_csv(&csv, &out.catalog, &comment).unwrap();
    write_catalog_json(&json, &out.catalog, &comment, false).unwrap();

    let window = (-4.0, 1.0);
    let reference = build_distribution(&out.catalog, 0.2, LogBase::Ten).unwrap();
    let reference_fit = fit_gr_slope(&reference, window).unwrap();
    for path in [&csv, &json] {
        let back = read_catalog(path).unwrap();
        assert_eq!(back.magnitudes_log10(), out.catalog.magnitudes_log10());
        assert_eq!(back.magnitudes_ln(), out.catalog.magnitudes_ln());
        let d = build_distribution(&back, 0.2, LogBase::Ten).unwrap();
        assert_eq!(d, reference);
        assert_eq!(fit_gr_slope(&d, window).unwrap(), reference_fit);
    }
}

#[test]
fn events_are_ordered_and_sized_consistently() {
    let p = ModelParams::long_chain(3.0).with_blocks(10);
    let cfg = IntegratorConfig::new(3_000.0).with_seed(4);
    let out = simulate(&p, &cfg, RecordOptions::default()).unwrap();
    for w in out.catalog.events.windows(2) {
        assert!(w[0].end_time < w[1].start_time);
    }
    for e in &out.catalog.events {
        assert!(e.start_time <= e.end_time);
        assert!(e.participating_blocks >= 1 && e.participating_blocks <= 10);
        assert_eq!(
            e.per_block_slip.iter().filter(|&&s| s > 0.0).count(),
            e.participating_blocks
        );
        assert_eq!(e.magnitude_log10, e.total_slip().log10());
    }
}
