//! Decisions of the cross-domain detector against exhaustive search on a
//! 2 x 2 frame.
//!
//! cargo run --release --example map_oracle [-- frames]

use otfs_core::channel::{build_block_channel, build_time_channel_dense, sample_channel_with, ChannelParams};
use otfs_core::detector::{brute_force_map, detect_cross_domain, DetectorConfig, MapObservation};
use otfs_core::modem::{apply_channel, snr_to_n0, Constellation, TxFrame};
use otfs_core::rng::{stream, Stream};
use otfs_core::transforms::{DdTransform, FrameGeometry};

fn main() -> otfs_core::Result<()> {
    let frames: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let geom = FrameGeometry::new(2, 2)?;
    let params = ChannelParams { paths: 2, l_max: 1, k_max: 1.0, fractional_doppler: false };
    let c = Constellation::qpsk();
    let n0 = snr_to_n0(14.0);
    let t = DdTransform::new(geom);

    let (mut agree, mut det_err, mut map_err, mut total) = (0usize, 0usize, 0usize, 0usize);
    for f in 0..frames {
        let ch = sample_channel_with(geom, &params, &mut stream(11, Stream::Channel, 0, f))?;
        let blocks = build_block_channel(&ch);
        let tx = TxFrame::random(&t, &c, &mut stream(11, Stream::Bits, 0, f));
        let r = apply_channel(&tx.s_time, &blocks, n0, &mut stream(11, Stream::Noise, 0, f))?;
        let det = detect_cross_domain(&blocks, &r, n0, &c, &DetectorConfig::with_iters(5))?;
        let h = build_time_channel_dense(&ch);
        let map = brute_force_map(geom, MapObservation::Time { h_t: &h, r: &r }, &c)?;
        for ((d, m), x) in det.hard_symbols.iter().zip(&map).zip(&tx.x_dd) {
            total += 1;
            agree += usize::from((d - m).norm() < 1e-9);
            det_err += usize::from((d - x).norm() > 1e-9);
            map_err += usize::from((m - x).norm() > 1e-9);
        }
    }
    println!("{frames} frames at 14 dB, {total} symbols");
    println!("agreement with exhaustive search {:.2}%", 100.0 * agree as f64 / total as f64);
    println!("symbol errors: detector {det_err}, exhaustive {map_err}");
    Ok(())
}
