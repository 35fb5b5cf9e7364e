//! One frame through the cross-domain detector, traced per iteration.
//!
//! cargo run --release --example detect_frame [-- snr_db]

use otfs_core::channel::{build_block_channel, ChannelRealization};
use otfs_core::detector::{detect_cross_domain_observed, DetectorConfig};
use otfs_core::modem::{apply_channel, snr_to_n0, Constellation, TxFrame};
use otfs_core::rng::{stream, Stream};
use otfs_core::transforms::DdTransform;

fn main() -> otfs_core::Result<()> {
    let snr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12.0);
    let ch = ChannelRealization::fixed_four_path();
    let blocks = build_block_channel(&ch);
    let c = Constellation::qpsk();
    let n0 = snr_to_n0(snr);

    let tx = TxFrame::random(&DdTransform::new(ch.geom), &c, &mut stream(7, Stream::Bits, 0, 0));
    let r = apply_channel(&tx.s_time, &blocks, n0, &mut stream(7, Stream::Noise, 0, 0))?;

    println!("Es/N0 = {snr} dB, {} QPSK symbols", tx.x_dd.len());
    println!("iter  time MSE    claimed var  DD MSE      symbol errors");
    let cfg = DetectorConfig::with_iters(8);
    let res = detect_cross_domain_observed(&blocks, &r, n0, &c, &cfg, &mut |v| {
        let errors = v.decisions.iter().zip(&tx.x_dd).filter(|(d, x)| (c.points()[**d] - **x).norm() > 1e-9).count();
        println!(
            "{:4}  {:.3e}   {:.3e}    {:.3e}   {errors}",
            v.iteration,
            v.time_posterior.mse(&tx.s_time),
            v.time_posterior.mean_var(),
            v.dd_posterior.mse(&tx.x_dd)
        );
    })?;
    let bit_errors = res.hard_bits.iter().zip(&tx.bits).filter(|(a, b)| a != b).count();
    println!("final: {bit_errors} bit errors of {}", tx.bits.len());
    Ok(())
}
