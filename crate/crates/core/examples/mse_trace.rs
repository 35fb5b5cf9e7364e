//! Monte Carlo MSE against state evolution on the four-path channel at
//! 12 dB.
//!
//! cargo run --release --example mse_trace [-- frames]

use otfs_core::channel::ChannelRealization;
use otfs_core::harness::{run_mse_trace, ChannelSource, ExperimentSpec};

fn main() -> otfs_core::Result<()> {
    let frames: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let spec = ExperimentSpec { frames, out: "out/example_mse".into(), ..ExperimentSpec::mse_trace_default() };
    let trace = run_mse_trace(&spec, &ChannelSource::Fixed(ChannelRealization::fixed_four_path()))?;

    println!("{frames} frames, Es/N0 = {} dB", spec.snr_db[0]);
    println!("iter  monte_carlo  exact SE    TIN         genie");
    for (k, mc) in trace.monte_carlo().iter().enumerate() {
        let se = |t: usize| trace.trajectories[t].records[k].v_pt;
        println!("{:4}  {mc:.4e}   {:.4e}  {:.4e}  {:.4e}", k + 1, se(0), se(1), se(2));
    }
    for f in &trace.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
