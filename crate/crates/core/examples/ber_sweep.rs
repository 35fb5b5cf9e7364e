//! BER of the block detector and the frame-wide baseline on random
//! channels, at a reduced frame size so it finishes quickly.
//!
//! cargo run --release --example ber_sweep [-- out_dir]

use otfs_core::channel::ChannelParams;
use otfs_core::harness::{run_ber_sweep, ChannelSource, DetectorKind, ExperimentSpec};

fn main() -> otfs_core::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/example_ber".into());
    let params = ChannelParams { paths: 4, l_max: 3, k_max: 2.0, fractional_doppler: true };
    let source = ChannelSource::Random(params);

    for detector in [DetectorKind::Proposed, DetectorKind::FullLmmse] {
        let spec = ExperimentSpec {
            channel: Some(params),
            detector,
            iters: 5,
            min_bit_errors: Some(100),
            seed: 3,
            out: format!("{out}/{detector}").into(),
            ..ExperimentSpec::new(16, 8, vec![6.0, 9.0, 12.0], 300)
        };
        let res = run_ber_sweep(&spec, &source)?;
        println!("{detector}:");
        for r in res.records.iter().filter(|r| r.iter == 1 || r.iter == spec.iters) {
            println!(
                "  {:5.1} dB  iter {}  frames {:3}  BER {:.3e}  ({} / {})",
                r.snr_db,
                r.iter,
                r.frames,
                r.ber(),
                r.bit_errors,
                r.bits
            );
        }
    }
    println!("CSV files under {out}/");
    Ok(())
}
