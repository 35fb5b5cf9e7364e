use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use super::{median, write_file, ChannelSource, DetectorKind, ExperimentSpec};
use crate::channel::{build_block_channel, build_time_channel_dense, sample_channel_with, BlockChannel, ChannelRealization};
use crate::detector::{detect_cross_domain, detect_full_lmmse, DetectorConfig};
use crate::error::{Error, Result};
use crate::modem::{apply_channel, snr_to_n0, Constellation, TxFrame};
use crate::rng::{stream, Stream};
use crate::transforms::{DdTransform, FrameGeometry};

/// Real flops per complex multiply-accumulate.
const CMAC: f64 = 8.0;

/// Timing and flop estimates of one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub detector: DetectorKind,
    pub m: usize,
    pub n: usize,
    pub frames: usize,
    pub median_ms_per_iter: f64,
    /// Dominant-term estimate: `(2M)^3 N` or `(MN)^3`.
    pub flops_est: f64,
    /// Operation count of the LMMSE step for the benchmarked channels.
    pub flops_counted: f64,
}

#[derive(Debug, Clone)]
pub struct BenchTable {
    /// Block estimator first, then the frame-wide one.
    pub rows: Vec<BenchRow>,
    pub files: Vec<PathBuf>,
}

impl BenchTable {
    fn row(&self, d: DetectorKind) -> &BenchRow {
        self.rows.iter().find(|r| r.detector == d).expect("both detectors benchmarked")
    }

    /// Median wall time of the frame-wide detector over the block one.
    pub fn speedup(&self) -> f64 {
        self.row(DetectorKind::FullLmmse).median_ms_per_iter / self.row(DetectorKind::Proposed).median_ms_per_iter
    }

    pub fn dominant_ratio(&self) -> f64 {
        self.row(DetectorKind::FullLmmse).flops_est / self.row(DetectorKind::Proposed).flops_est
    }

    pub fn counted_ratio(&self) -> f64 {
        self.row(DetectorKind::FullLmmse).flops_counted / self.row(DetectorKind::Proposed).flops_counted
    }

    /// `detector,M,N,median_ms_per_iter,flops_est`
    pub fn csv(&self) -> String {
        let mut out = String::from("detector,M,N,median_ms_per_iter,flops_est\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.detector, r.m, r.n, r.median_ms_per_iter, r.flops_est));
        }
        out
    }
}

/// Dominant-term flop estimate of one LMMSE pass.
pub fn dominant_flops(detector: DetectorKind, geom: FrameGeometry) -> Result<f64> {
    let (m, n) = (geom.m as f64, geom.n as f64);
    match detector {
        DetectorKind::Proposed => Ok((2.0 * m).powi(3) * n),
        DetectorKind::FullLmmse => Ok((m * n).powi(3)),
        DetectorKind::MapOracle => Err(Error::Config("the MAP oracle is not benchmarked".into())),
    }
}

/// Counted real flops of one block LMMSE pass: sparse covariance build,
/// Cholesky, the triangular solves for `L^{-1} A_i` and the residual, and
/// the per-symbol inner products.
pub fn block_flops_counted(blocks: &BlockChannel) -> f64 {
    blocks
        .windows()
        .iter()
        .map(|w| {
            let r = w.rows.len() as f64;
            let own = w.own_columns.len() as f64;
            let cov: f64 = w.own_columns.iter().chain(&w.interference).map(|c| (c.entries.len() as f64).powi(2)).sum();
            CMAC * (cov + r.powi(3) / 3.0 + r * r / 2.0 * (own + 1.0) + 2.0 * r * own)
        })
        .sum()
}

/// Counted real flops of one frame-wide LMMSE pass with the same steps.
pub fn full_flops_counted(channel: &ChannelRealization) -> f64 {
    let n = channel.geom.len() as f64;
    let nnz = channel.paths.iter().map(|p| p.delay).collect::<BTreeSet<_>>().len() as f64;
    CMAC * (n * nnz * nnz + n.powi(3) / 3.0 + n * n / 2.0 * (n + 1.0) + 2.0 * n * n)
}

/// Median per-iteration wall time of the block and frame-wide detectors
/// over `spec.frames` frames at the first SNR; writes `bench.csv`.
pub fn run_complexity_bench(spec: &ExperimentSpec, source: &ChannelSource) -> Result<BenchTable> {
    spec.validate()?;
    let geom = spec.geometry()?;
    let transform = DdTransform::new(geom);
    let c = Constellation::by_name(&spec.constellation)?;
    let n0 = snr_to_n0(spec.snr_db[0]);
    let cfg = DetectorConfig { max_iters: spec.iters, damping: spec.damping, ..DetectorConfig::default() };

    let channels = (0..spec.frames)
        .map(|f| match source {
            ChannelSource::Fixed(ch) if ch.geom == geom => Ok(ch.clone()),
            ChannelSource::Fixed(_) => Err(Error::Config("fixed channel geometry differs from the spec".into())),
            ChannelSource::Random(p) => sample_channel_with(geom, p, &mut stream(spec.seed, Stream::Channel, 0, f as u32)),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for detector in [DetectorKind::Proposed, DetectorKind::FullLmmse] {
        let mut times = Vec::with_capacity(spec.frames);
        let mut counted = Vec::with_capacity(spec.frames);
        for (f, ch) in channels.iter().enumerate() {
            let blocks = build_block_channel(ch);
            let tx = TxFrame::random(&transform, &c, &mut stream(spec.seed, Stream::Bits, 0, f as u32));
            let r = apply_channel(&tx.s_time, &blocks, n0, &mut stream(spec.seed, Stream::Noise, 0, f as u32))?;
            let (ms, iters) = match detector {
                DetectorKind::Proposed => {
                    counted.push(block_flops_counted(&blocks));
                    let t = Instant::now();
                    let res = detect_cross_domain(&blocks, &r, n0, &c, &cfg)?;
                    (t.elapsed().as_secs_f64() * 1e3, res.iters_run)
                }
                _ => {
                    counted.push(full_flops_counted(ch));
                    let h = build_time_channel_dense(ch);
                    let t = Instant::now();
                    let res = detect_full_lmmse(geom, &h, &r, n0, &c, &cfg)?;
                    (t.elapsed().as_secs_f64() * 1e3, res.iters_run)
                }
            };
            times.push(ms / iters as f64);
        }
        rows.push(BenchRow {
            detector,
            m: geom.m,
            n: geom.n,
            frames: spec.frames,
            median_ms_per_iter: median(&mut times),
            flops_est: dominant_flops(detector, geom)?,
            flops_counted: median(&mut counted),
        });
    }
    let mut table = BenchTable { rows, files: Vec::new() };
    table.files.push(write_file(&spec.out, "bench.csv", &table.csv())?);
    Ok(table)
}
