//! Per-iteration cost of the block LMMSE against the frame-wide LMMSE.
//!
//! cargo run --release --example complexity_bench [-- M N frames]
//!
//! The default 16 x 8 frame runs in seconds; 64 32 10 is the full-size
//! comparison and takes a few minutes.

use otfs_core::harness::{run_complexity_bench, ExperimentSpec};

fn main() -> otfs_core::Result<()> {
    let arg = |i: usize, d: usize| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (m, n, frames) = (arg(1, 16), arg(2, 8), arg(3, 5));
    let mut spec = ExperimentSpec { m, n, frames, out: "out/example_bench".into(), ..ExperimentSpec::bench_default() };
    if let Some(p) = spec.channel.as_mut() {
        p.l_max = p.l_max.min(m - 1);
    }
    let table = run_complexity_bench(&spec, &spec.channel_source()?)?;
    for r in &table.rows {
        println!(
            "{:<10}  {:10.3} ms/iter  dominant-term flops {:.3e}  counted {:.3e}",
            r.detector.name(),
            r.median_ms_per_iter,
            r.flops_est,
            r.flops_counted
        );
    }
    println!("measured speedup      {:.1}x", table.speedup());
    println!("dominant-term ratio   {:.1} (N^2/8 = {})", table.dominant_ratio(), n * n / 8);
    println!("counted-flop ratio    {:.1}", table.counted_ratio());
    Ok(())
}
