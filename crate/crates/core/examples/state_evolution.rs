//! State evolution of the four-path channel with the TIN and genie bounds.
//!
//! cargo run --release --example state_evolution [-- snr_db]

use otfs_core::analysis::{run_state_evolution, trajectories_csv, Variant};
use otfs_core::channel::{build_block_channel, ChannelRealization};
use otfs_core::modem::{snr_to_n0, Constellation};

fn main() -> otfs_core::Result<()> {
    let snr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12.0);
    let blocks = build_block_channel(&ChannelRealization::fixed_four_path());
    let c = Constellation::qpsk();
    let trajs = Variant::ALL
        .iter()
        .map(|&v| run_state_evolution(&blocks, snr_to_n0(snr), &c, 10, v))
        .collect::<otfs_core::Result<Vec<_>>>()?;

    println!("Es/N0 = {snr} dB, posterior time-domain variance v_pT");
    println!("iter  genie       exact       TIN         TIN-genie");
    for k in 0..10 {
        let [e, t, g] = [0, 1, 2].map(|i| trajs[i].records[k].v_pt);
        println!("{:4}  {g:.4e}  {e:.4e}  {t:.4e}  {:.3e}", k + 1, t - g);
    }
    println!();
    print!("{}", trajectories_csv(&trajs));
    Ok(())
}
