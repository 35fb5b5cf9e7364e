use std::fs;
use std::path::Path;
use std::process::Command;

use otfs_core::analysis::Variant;
use otfs_core::channel::{ChannelParams, ChannelRealization};
use otfs_core::harness::{
    run_ber_sweep, run_mse_trace, simulate, ChannelSource, DetectorKind, ExperimentSpec, RunRecord,
};
use otfs_core::transforms::FrameGeometry;

fn small_params() -> ChannelParams {
    ChannelParams { paths: 4, l_max: 3, k_max: 2.0, fractional_doppler: true }
}

fn last_iter(records: &[RunRecord]) -> Vec<&RunRecord> {
    let top = records.iter().map(|r| r.iter).max().unwrap();
    records.iter().filter(|r| r.iter == top).collect()
}

#[test]
fn identity_channel_at_40_db_is_error_free() {
    let spec = ExperimentSpec { iters: 2, ..ExperimentSpec::new(16, 8, vec![40.0], 20) };
    let source = ChannelSource::Fixed(ChannelRealization::identity(spec.geometry().unwrap()));
    let recs = simulate(&spec, &source).unwrap();
    assert!(recs.iter().all(|r| r.bit_errors == 0 && r.bits == 20 * 16 * 8 * 2));
}

#[test]
fn accounting_matches_integer_counts() {
    let spec = ExperimentSpec { seed: 4, ..ExperimentSpec::new(16, 8, vec![0.0, 6.0], 10) };
    for r in simulate(&spec, &ChannelSource::Random(small_params())).unwrap() {
        assert_eq!((r.ber() * r.bits as f64).round() as u64, r.bit_errors);
        assert_eq!((r.ser() * r.symbols as f64).round() as u64, r.symbol_errors);
        assert!(r.bit_errors <= r.bits && r.symbol_errors <= r.symbols);
    }
}

#[test]
fn early_stop_is_the_shortest_qualifying_prefix() {
    let base = ExperimentSpec { seed: 8, iters: 3, ..ExperimentSpec::new(16, 8, vec![8.0], 300) };
    let source = ChannelSource::Random(small_params());
    let early = simulate(&ExperimentSpec { min_bit_errors: Some(100), ..base.clone() }, &source).unwrap();
    let stop = last_iter(&early)[0].frames;
    assert!(stop < base.frames, "early stop never triggered");
    let prefix = simulate(&ExperimentSpec { frames: stop, ..base.clone() }, &source).unwrap();
    let strip = |r: &RunRecord| (r.iter, r.frames, r.bits, r.bit_errors, r.symbol_errors, r.mse.to_bits());
    assert_eq!(early.iter().map(strip).collect::<Vec<_>>(), prefix.iter().map(strip).collect::<Vec<_>>());
    assert!(last_iter(&early)[0].bit_errors >= 100);
    let shorter = simulate(&ExperimentSpec { frames: stop - 1, ..base }, &source).unwrap();
    assert!(last_iter(&shorter)[0].bit_errors < 100);
}

#[test]
fn reruns_write_identical_csvs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = |out: &Path| ExperimentSpec {
        seed: 21,
        min_bit_errors: Some(40),
        out: out.to_path_buf(),
        ..ExperimentSpec::new(8, 8, vec![3.0, 9.0], 25)
    };
    let source = ChannelSource::Random(small_params());
    let ra = run_ber_sweep(&spec(a.path()), &source).unwrap();
    let rb = run_ber_sweep(&spec(b.path()), &source).unwrap();
    for (fa, fb) in ra.files.iter().zip(&rb.files) {
        assert_eq!(fs::read(fa).unwrap(), fs::read(fb).unwrap());
    }
    let header = fs::read_to_string(a.path().join("ber.csv")).unwrap();
    assert!(header.starts_with("snr_db,detector,iters,bits,bit_errors,ber\n"));
}

#[test]
fn proposed_is_close_to_the_oracle_on_tiny_frames() {
    let params = ChannelParams { paths: 2, l_max: 1, k_max: 1.0, fractional_doppler: false };
    let source = ChannelSource::Random(params);
    let spec = |d| ExperimentSpec { detector: d, seed: 2, ..ExperimentSpec::new(2, 2, vec![14.0], 1000) };
    let oracle = simulate(&spec(DetectorKind::MapOracle), &source).unwrap();
    let proposed = simulate(&spec(DetectorKind::Proposed), &source).unwrap();
    let (o, p) = (last_iter(&oracle)[0].ber(), last_iter(&proposed)[0].ber());
    assert!(o > 0.0);
    assert!(p <= 2.0 * o, "proposed {p} vs oracle {o}");
}

#[test]
fn block_estimator_loses_little_to_the_frame_wide_one() {
    let params = ChannelParams { paths: 4, l_max: 5, k_max: 3.0, fractional_doppler: true };
    let source = ChannelSource::Random(params);
    let spec = |d| ExperimentSpec { detector: d, iters: 3, seed: 6, ..ExperimentSpec::new(32, 16, vec![12.0], 4) };
    let block = simulate(&spec(DetectorKind::Proposed), &source).unwrap();
    let full = simulate(&spec(DetectorKind::FullLmmse), &source).unwrap();
    // First iteration: the full-size filter sees every received sample.
    assert!(full[0].mse <= block[0].mse * 1.001, "{} vs {}", full[0].mse, block[0].mse);
    assert!(block[0].mse <= full[0].mse * 1.25, "{} vs {}", block[0].mse, full[0].mse);
    // Iterating closes most of the remaining gap.
    assert!(block[2].mse < 0.1 * block[0].mse && full[2].mse < 0.1 * full[0].mse);
}

#[test]
fn identity_trace_variants_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec { iters: 4, out: dir.path().to_path_buf(), ..ExperimentSpec::new(8, 4, vec![10.0], 3) };
    let source = ChannelSource::Fixed(ChannelRealization::identity(FrameGeometry::new(8, 4).unwrap()));
    let trace = run_mse_trace(&spec, &source).unwrap();
    let exact = trace.trajectory(Variant::Exact).posterior_time();
    for v in [Variant::Tin, Variant::Genie] {
        assert_eq!(trace.trajectory(v).posterior_time(), exact);
    }
    for name in ["mse.csv", "se_exact.csv", "se_tin.csv", "se_genie.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let mse = fs::read_to_string(dir.path().join("mse.csv")).unwrap();
    assert_eq!(mse.lines().count(), 1 + 4 * 4);
}

#[test]
fn mse_trend_on_the_four_path_channel() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec { frames: 6, iters: 4, out: dir.path().to_path_buf(), ..ExperimentSpec::mse_trace_default() };
    let trace = run_mse_trace(&spec, &ChannelSource::Fixed(ChannelRealization::fixed_four_path())).unwrap();
    let mc = trace.monte_carlo();
    assert!(mc[1] < 0.2 * mc[0] && mc[3] < 0.1 * mc[1], "{mc:?}");
    let se = trace.trajectory(Variant::Exact).posterior_time();
    assert!((se[0] - mc[0]).abs() / mc[0] < 0.1);
}

#[test]
fn bundled_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["ber.json", "mse_trace.json", "bench.json", "tiny_oracle.json"] {
        ExperimentSpec::load(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let trace = ExperimentSpec::load(dir.join("mse_trace.json")).unwrap();
    match trace.channel_source().unwrap() {
        ChannelSource::Fixed(ch) => assert_eq!(ch, ChannelRealization::fixed_four_path()),
        other => panic!("expected the fixed channel, got {other:?}"),
    }
}

#[test]
fn cli_runs_a_config_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/tiny_oracle.json");
    let out = Command::new(env!("CARGO_BIN_EXE_otfs-sim"))
        .args(["ber", "--config"])
        .arg(&config)
        .args(["--detector", "proposed", "--iters", "2", "--snr", "-3,10", "--seed", "5", "--frames", "30", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("ber.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("-3,proposed,1,"));

    let bad = Command::new(env!("CARGO_BIN_EXE_otfs-sim")).args(["ber", "--detector", "nope"]).output().unwrap();
    assert!(!bad.status.success());
}
