//! Experiment engine: seeded Monte Carlo sweeps, state-evolution traces and
//! complexity benchmarks, with CSV output.
//!
//! An [`ExperimentSpec`] describes one experiment and is usually read from a
//! JSON file. The run functions take the spec plus a [`ChannelSource`], so
//! library users can hand in a channel without writing it to disk first.
//!
//! Every CSV written here is a pure function of the spec and its seed. Wall
//! times are kept in the returned records but never written to the sweep
//! CSVs, so a re-run reproduces them byte for byte.

mod bench;
mod sweep;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, ChannelRealization};
use crate::error::{Error, Result};
use crate::transforms::FrameGeometry;

pub use bench::{
    block_flops_counted, dominant_flops, full_flops_counted, run_complexity_bench, BenchRow, BenchTable,
};
pub use sweep::{run_ber_sweep, run_mse_trace, simulate, MseTrace, SweepResult};

/// Detector evaluated by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Cross-domain loop with the block-wise LMMSE.
    Proposed,
    /// Cross-domain loop with the frame-wide LMMSE.
    FullLmmse,
    /// Exhaustive search; tiny frames only.
    MapOracle,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Proposed => "proposed",
            DetectorKind::FullLmmse => "full_lmmse",
            DetectorKind::MapOracle => "map_oracle",
        }
    }

    pub fn is_iterative(self) -> bool {
        !matches!(self, DetectorKind::MapOracle)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(DetectorKind::Proposed),
            "full_lmmse" => Ok(DetectorKind::FullLmmse),
            "map_oracle" => Ok(DetectorKind::MapOracle),
            _ => Err(Error::Config(format!(
                "unknown detector '{s}' (expected proposed, full_lmmse or map_oracle)"
            ))),
        }
    }
}

/// One experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub m: usize,
    pub n: usize,
    /// Statistics for per-frame random channels.
    #[serde(default)]
    pub channel: Option<ChannelParams>,
    /// Fixed channel used for every frame; takes precedence over `channel`.
    /// Relative paths are resolved against the config file's directory.
    #[serde(default)]
    pub channel_file: Option<PathBuf>,
    #[serde(default = "default_constellation")]
    pub constellation: String,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_detector")]
    pub detector: DetectorKind,
    #[serde(default = "default_iters")]
    pub iters: usize,
    pub frames: usize,
    /// Stop an SNR point once the final iteration has this many bit errors.
    #[serde(default)]
    pub min_bit_errors: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub damping: f64,
}

fn default_constellation() -> String {
    "qpsk".into()
}

fn default_detector() -> DetectorKind {
    DetectorKind::Proposed
}

fn default_iters() -> usize {
    5
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Where each frame's channel comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Random(ChannelParams),
    Fixed(ChannelRealization),
}

impl ExperimentSpec {
    /// Spec with the given geometry and SNR grid; everything else default.
    pub fn new(m: usize, n: usize, snr_db: Vec<f64>, frames: usize) -> Self {
        Self {
            m,
            n,
            channel: None,
            channel_file: None,
            constellation: default_constellation(),
            snr_db,
            detector: default_detector(),
            iters: default_iters(),
            frames,
            min_bit_errors: None,
            seed: 0,
            out: default_out(),
            damping: 0.0,
        }
    }

    /// BER sweep over random four-path channels at `M = 64`, `N = 32`
    /// (maximum delay index 10, maximum Doppler index 5).
    pub fn ber_default() -> Self {
        Self {
            channel: Some(ChannelParams { paths: 4, l_max: 10, k_max: 5.0, fractional_doppler: true }),
            min_bit_errors: Some(100),
            seed: 1,
            out: PathBuf::from("out/ber"),
            ..Self::new(64, 32, vec![8.0, 10.0, 12.0, 14.0, 16.0], 200)
        }
    }

    /// Ten-iteration MSE trace at 12 dB; pair it with a fixed channel.
    pub fn mse_trace_default() -> Self {
        Self { iters: 10, seed: 1, out: PathBuf::from("out/mse"), ..Self::new(64, 32, vec![12.0], 200) }
    }

    /// One timed iteration per frame on ten random channels at 12 dB.
    pub fn bench_default() -> Self {
        Self {
            snr_db: vec![12.0],
            iters: 1,
            frames: 10,
            min_bit_errors: None,
            out: PathBuf::from("out/bench"),
            ..Self::ber_default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Read a JSON config; `channel_file` is made relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec = Self::from_json(&fs::read_to_string(path)?)?;
        if let (Some(file), Some(dir)) = (&spec.channel_file, path.parent()) {
            if file.is_relative() {
                spec.channel_file = Some(dir.join(file));
            }
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn geometry(&self) -> Result<FrameGeometry> {
        FrameGeometry::new(self.m, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("SNR grid is empty".into()));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("SNR {bad} is not finite")));
        }
        if self.iters == 0 {
            return Err(Error::Config("iters must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.damping) {
            return Err(Error::Config(format!("damping {} outside [0, 1]", self.damping)));
        }
        crate::modem::Constellation::by_name(&self.constellation)?;
        Ok(())
    }

    /// Resolve the channel: the fixed file if given, else random parameters.
    pub fn channel_source(&self) -> Result<ChannelSource> {
        if let Some(file) = &self.channel_file {
            return Ok(ChannelSource::Fixed(ChannelRealization::load(file)?));
        }
        self.channel
            .map(ChannelSource::Random)
            .ok_or_else(|| Error::Config("spec needs either `channel` or `channel_file`".into()))
    }
}

/// Totals for one (SNR, detector, iteration) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub snr_db: f64,
    pub detector: DetectorKind,
    pub iter: usize,
    pub frames: usize,
    pub bits: u64,
    pub bit_errors: u64,
    pub symbols: u64,
    pub symbol_errors: u64,
    /// Time-domain posterior MSE averaged over frames.
    pub mse: f64,
    /// Mean detector wall time per iteration, milliseconds.
    pub ms_per_iter: f64,
    /// Wall time of the whole SNR point, milliseconds.
    pub wall_ms: f64,
}

impl RunRecord {
    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.bits)
    }

    pub fn ser(&self) -> f64 {
        ratio(self.symbol_errors, self.symbols)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `snr_db,detector,iters,bits,bit_errors,ber`
pub fn ber_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("snr_db,detector,iters,bits,bit_errors,ber\n");
    for r in records {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.snr_db, r.detector, r.iter, r.bits, r.bit_errors, r.ber()));
    }
    out
}

/// Full record table without wall times.
pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("snr_db,detector,iter,frames,bits,bit_errors,ber,symbols,symbol_errors,ser,mse\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.snr_db,
            r.detector,
            r.iter,
            r.frames,
            r.bits,
            r.bit_errors,
            r.ber(),
            r.symbols,
            r.symbol_errors,
            r.ser(),
            r.mse
        ));
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Median of a non-empty sample.
pub(crate) fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[k]
    } else {
        0.5 * (xs[k - 1] + xs[k])
    }
}
