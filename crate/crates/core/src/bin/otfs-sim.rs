//! Command-line driver for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otfs_core::channel::ChannelRealization;
use otfs_core::harness::{
    run_ber_sweep, run_complexity_bench, run_mse_trace, ChannelSource, DetectorKind, ExperimentSpec,
};
use otfs_core::Result;

#[derive(Parser)]
#[command(name = "otfs-sim", version, about = "OTFS cross-domain detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER per SNR and iteration -> ber.csv, records.csv
    Ber(Overrides),
    /// Monte Carlo MSE and state evolution on a fixed channel -> mse.csv, se_*.csv
    MseTrace(Overrides),
    /// Block vs frame-wide LMMSE timing -> bench.csv
    Bench(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// JSON experiment file; built-in defaults otherwise
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    /// Comma-separated Es/N0 values in dB
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// proposed, full_lmmse or map_oracle
    #[arg(long)]
    detector: Option<DetectorKind>,
    #[arg(long)]
    frames: Option<usize>,
}

impl Overrides {
    fn spec(&self, default: fn() -> ExperimentSpec) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => default(),
        };
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = &self.out {
            spec.out = v.clone();
        }
        if let Some(v) = self.iters {
            spec.iters = v;
        }
        if let Some(v) = &self.snr {
            spec.snr_db = v.clone();
        }
        if let Some(v) = self.detector {
            spec.detector = v;
        }
        if let Some(v) = self.frames {
            spec.frames = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ber(o) => {
            let spec = o.spec(ExperimentSpec::ber_default)?;
            let res = run_ber_sweep(&spec, &spec.channel_source()?)?;
            println!("snr_db  iter  frames  ber          ser          mse");
            for r in &res.records {
                println!(
                    "{:6.2}  {:4}  {:6}  {:.4e}  {:.4e}  {:.4e}",
                    r.snr_db,
                    r.iter,
                    r.frames,
                    r.ber(),
                    r.ser(),
                    r.mse
                );
            }
            report(&res.files);
        }
        Command::MseTrace(o) => {
            let spec = o.spec(ExperimentSpec::mse_trace_default)?;
            let source = if o.config.is_none() && spec.channel_file.is_none() {
                ChannelSource::Fixed(ChannelRealization::fixed_four_path())
            } else {
                spec.channel_source()?
            };
            let trace = run_mse_trace(&spec, &source)?;
            println!("iter  monte_carlo  se_exact     se_tin       se_genie");
            for (k, r) in trace.records.iter().enumerate() {
                let se = |t: usize| trace.trajectories[t].records[k].v_pt;
                println!("{:4}  {:.4e}   {:.4e}   {:.4e}   {:.4e}", r.iter, r.mse, se(0), se(1), se(2));
            }
            report(&trace.files);
        }
        Command::Bench(o) => {
            let spec = o.spec(ExperimentSpec::bench_default)?;
            let table = run_complexity_bench(&spec, &spec.channel_source()?)?;
            for r in &table.rows {
                println!(
                    "{:<10}  M={} N={}  {:10.3} ms/iter  dominant {:.3e}  counted {:.3e}",
                    r.detector.name(),
                    r.m,
                    r.n,
                    r.median_ms_per_iter,
                    r.flops_est,
                    r.flops_counted
                );
            }
            println!(
                "speedup {:.1}x, dominant-term ratio {:.1}, counted ratio {:.1}",
                table.speedup(),
                table.dominant_ratio(),
                table.counted_ratio()
            );
            report(&table.files);
        }
    }
    Ok(())
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
