//! The four-path channel, its band-limited time-domain blocks and their
//! agreement with the dense matrix.
//!
//! cargo run --example channel_blocks [-- out.json]

use otfs_core::channel::{build_block_channel, build_time_channel_dense, ChannelRealization};

fn main() -> otfs_core::Result<()> {
    let ch = ChannelRealization::fixed_four_path();
    println!("M = {}, N = {}, energy {:.4}", ch.geom.m, ch.geom.n, ch.energy());
    for (p, path) in ch.paths.iter().enumerate() {
        println!(
            "  path {p}: delay {:2}, Doppler {:+.2} (k {:+}, kappa {:+.2}), gain {:+.2}{:+.2}j",
            path.delay,
            path.doppler(),
            path.doppler_int,
            path.doppler_frac,
            path.gain.re,
            path.gain.im
        );
    }

    let blocks = build_block_channel(&ch);
    let w = blocks.window(5);
    println!(
        "block 5 window: {} rows, {} own columns, {} interfering symbols",
        w.rows.len(),
        w.own_columns.len(),
        w.interference.len()
    );
    let a = blocks.observation_matrix(5);
    let b = blocks.interference_matrix(5);
    println!("A_5 is {}x{}, B_5 is {}x{}", a.nrows(), a.ncols(), b.nrows(), b.ncols());

    let dense = build_time_channel_dense(&ch);
    let diff = (&dense - blocks.embed_dense()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let nnz = dense.iter().filter(|v| v.norm() > 0.0).count();
    println!("dense H_T: {} of {} entries nonzero, block embedding max error {diff:.2e}", nnz, dense.len());

    if let Some(path) = std::env::args().nth(1) {
        ch.save(&path)?;
        println!("saved {path}");
    }
    Ok(())
}
