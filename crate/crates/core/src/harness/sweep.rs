use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{ber_csv, records_csv, write_file, ChannelSource, DetectorKind, ExperimentSpec, RunRecord};
use crate::analysis::{run_state_evolution, trajectories_csv, StateTrajectory, Variant};
use crate::channel::{build_block_channel, build_time_channel_dense, sample_channel_with, BlockChannel, ChannelRealization};
use crate::detector::{
    brute_force_map, detect_cross_domain_observed, detect_full_lmmse_observed, DetectorConfig, IterationView,
    MapObservation,
};
use crate::error::{Error, Result};
use crate::modem::{apply_channel, snr_to_n0, Constellation, TxFrame};
use crate::rng::{stream, Stream};
use crate::transforms::{DdTransform, FrameGeometry};

/// Records of a BER sweep and the files written.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<RunRecord>,
    pub files: Vec<PathBuf>,
}

/// Monte Carlo MSE per iteration next to the state-evolution trajectories.
#[derive(Debug, Clone)]
pub struct MseTrace {
    pub records: Vec<RunRecord>,
    /// Exact, TIN and genie trajectories, in that order.
    pub trajectories: Vec<StateTrajectory>,
    pub files: Vec<PathBuf>,
}

impl MseTrace {
    pub fn monte_carlo(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mse).collect()
    }

    pub fn trajectory(&self, variant: Variant) -> &StateTrajectory {
        self.trajectories.iter().find(|t| t.variant == variant).expect("all variants traced")
    }

    /// `variant,iter,mse` with the Monte Carlo rows first.
    pub fn mse_csv(&self) -> String {
        let mut out = String::from("variant,iter,mse\n");
        for r in &self.records {
            out.push_str(&format!("monte_carlo,{},{}\n", r.iter, r.mse));
        }
        for t in &self.trajectories {
            for s in &t.records {
                out.push_str(&format!("{},{},{}\n", t.variant, s.iter, s.v_pt));
            }
        }
        out
    }
}

/// Channel state shared by every frame of a fixed-channel run.
struct Prepared {
    blocks: BlockChannel,
    dense: Option<DMatrix<Complex64>>,
}

impl Prepared {
    fn new(channel: &ChannelRealization, detector: DetectorKind) -> Self {
        let blocks = build_block_channel(channel);
        let dense = (detector != DetectorKind::Proposed).then(|| build_time_channel_dense(channel));
        Self { blocks, dense }
    }
}

struct Context<'a> {
    spec: &'a ExperimentSpec,
    geom: FrameGeometry,
    constellation: Constellation,
    transform: DdTransform,
    source: &'a ChannelSource,
    fixed: Option<Prepared>,
    cfg: DetectorConfig,
}

impl<'a> Context<'a> {
    fn new(spec: &'a ExperimentSpec, source: &'a ChannelSource) -> Result<Self> {
        spec.validate()?;
        if u32::try_from(spec.frames).is_err() {
            return Err(Error::Config(format!("{} frames exceed the stream counter", spec.frames)));
        }
        let geom = spec.geometry()?;
        let fixed = match source {
            ChannelSource::Fixed(ch) => {
                if ch.geom != geom {
                    return Err(Error::Config(format!(
                        "fixed channel is {}x{}, spec is {}x{}",
                        ch.geom.m, ch.geom.n, geom.m, geom.n
                    )));
                }
                Some(Prepared::new(ch, spec.detector))
            }
            ChannelSource::Random(_) => None,
        };
        Ok(Self {
            spec,
            geom,
            constellation: crate::modem::Constellation::by_name(&spec.constellation)?,
            transform: DdTransform::new(geom),
            source,
            fixed,
            cfg: DetectorConfig { max_iters: spec.iters, damping: spec.damping, ..DetectorConfig::default() },
        })
    }

    fn rows(&self) -> usize {
        if self.spec.detector.is_iterative() {
            self.spec.iters
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct IterStats {
    bit_errors: u64,
    symbol_errors: u64,
    mse: f64,
}

struct FrameStats {
    per_iter: Vec<IterStats>,
    ms_per_iter: f64,
}

fn score(c: &Constellation, decisions: &[usize], tx_bits: &[u8], mse: f64) -> IterStats {
    let b = c.bits_per_symbol();
    let mut bits = Vec::with_capacity(b);
    let mut st = IterStats { mse, ..IterStats::default() };
    for (k, &j) in decisions.iter().enumerate() {
        bits.clear();
        c.push_bits(j, &mut bits);
        let wrong = bits.iter().zip(&tx_bits[k * b..(k + 1) * b]).filter(|(a, t)| a != t).count() as u64;
        st.bit_errors += wrong;
        st.symbol_errors += u64::from(wrong > 0);
    }
    st
}

fn run_frame(ctx: &Context<'_>, snr_index: u32, n0: f64, frame: u32) -> Result<FrameStats> {
    let spec = ctx.spec;
    let sampled;
    let prepared = match (&ctx.fixed, ctx.source) {
        (Some(p), _) => p,
        (None, ChannelSource::Random(params)) => {
            let ch = sample_channel_with(ctx.geom, params, &mut stream(spec.seed, Stream::Channel, 0, frame))?;
            sampled = Prepared::new(&ch, spec.detector);
            &sampled
        }
        (None, ChannelSource::Fixed(_)) => unreachable!("fixed channels are prepared up front"),
    };
    let c = &ctx.constellation;
    let tx = TxFrame::random(&ctx.transform, c, &mut stream(spec.seed, Stream::Bits, 0, frame));
    let r = apply_channel(&tx.s_time, &prepared.blocks, n0, &mut stream(spec.seed, Stream::Noise, snr_index, frame))?;

    let mut per_iter = Vec::with_capacity(ctx.rows());
    let mut observe = |v: &IterationView<'_>| {
        per_iter.push(score(c, v.decisions, &tx.bits, v.time_posterior.mse(&tx.s_time)));
    };
    let start = Instant::now();
    let iters_run = match spec.detector {
        DetectorKind::Proposed => {
            detect_cross_domain_observed(&prepared.blocks, &r, n0, c, &ctx.cfg, &mut observe)?.iters_run
        }
        DetectorKind::FullLmmse => {
            let h = prepared.dense.as_ref().expect("dense channel prepared");
            detect_full_lmmse_observed(ctx.geom, h, &r, n0, c, &ctx.cfg, &mut observe)?.iters_run
        }
        DetectorKind::MapOracle => {
            let h = prepared.dense.as_ref().expect("dense channel prepared");
            let x = brute_force_map(ctx.geom, MapObservation::Time { h_t: h, r: &r }, c)?;
            let decisions: Vec<usize> = x.iter().map(|&z| c.nearest(z)).collect();
            let s_hat = ctx.transform.dd_to_time(&x)?;
            let mse = s_hat.iter().zip(&tx.s_time).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / s_hat.len() as f64;
            per_iter.push(score(c, &decisions, &tx.bits, mse));
            1
        }
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    // An early stop repeats the final state for the remaining iterations.
    while per_iter.len() < ctx.rows() {
        let last = *per_iter.last().expect("at least one iteration");
        per_iter.push(last);
    }
    Ok(FrameStats { per_iter, ms_per_iter: ms / iters_run as f64 })
}

/// Per-iteration totals for every SNR point, without writing anything.
///
/// Frames run in parallel chunks and are folded in frame order, so the
/// result, including where an early stop lands, is independent of the
/// thread count.
pub fn simulate(spec: &ExperimentSpec, source: &ChannelSource) -> Result<Vec<RunRecord>> {
    let ctx = Context::new(spec, source)?;
    let rows = ctx.rows();
    let chunk = 2 * rayon::current_num_threads().max(1);
    let mut records = Vec::with_capacity(rows * spec.snr_db.len());
    for (si, &snr) in spec.snr_db.iter().enumerate() {
        let n0 = snr_to_n0(snr);
        let start = Instant::now();
        let mut acc = vec![IterStats::default(); rows];
        let (mut frames, mut ms_sum) = (0usize, 0.0);
        let mut next = 0;
        'frames: while next < spec.frames {
            let end = (next + chunk).min(spec.frames);
            let batch: Vec<Result<FrameStats>> =
                (next..end).into_par_iter().map(|f| run_frame(&ctx, si as u32, n0, f as u32)).collect();
            for st in batch {
                let st = st?;
                for (a, s) in acc.iter_mut().zip(&st.per_iter) {
                    a.bit_errors += s.bit_errors;
                    a.symbol_errors += s.symbol_errors;
                    a.mse += s.mse;
                }
                ms_sum += st.ms_per_iter;
                frames += 1;
                if spec.min_bit_errors.is_some_and(|min| acc[rows - 1].bit_errors >= min) {
                    break 'frames;
                }
            }
            next = end;
        }
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let symbols = (frames * ctx.geom.len()) as u64;
        for (it, a) in acc.iter().enumerate() {
            records.push(RunRecord {
                snr_db: snr,
                detector: spec.detector,
                iter: it + 1,
                frames,
                bits: symbols * ctx.constellation.bits_per_symbol() as u64,
                bit_errors: a.bit_errors,
                symbols,
                symbol_errors: a.symbol_errors,
                mse: a.mse / frames as f64,
                ms_per_iter: ms_sum / frames as f64,
                wall_ms,
            });
        }
    }
    Ok(records)
}

/// BER/SER/MSE per SNR and iteration; writes `ber.csv` and `records.csv`
/// under `spec.out`.
pub fn run_ber_sweep(spec: &ExperimentSpec, source: &ChannelSource) -> Result<SweepResult> {
    let records = simulate(spec, source)?;
    let files = vec![
        write_file(&spec.out, "ber.csv", &ber_csv(&records))?,
        write_file(&spec.out, "records.csv", &records_csv(&records))?,
    ];
    Ok(SweepResult { records, files })
}

/// Monte Carlo MSE trajectory on a fixed channel at one SNR, with the
/// exact, TIN and genie state evolution of the same channel. Writes
/// `mse.csv`, `records.csv` and one `se_<variant>.csv` per variant.
pub fn run_mse_trace(spec: &ExperimentSpec, source: &ChannelSource) -> Result<MseTrace> {
    let ChannelSource::Fixed(channel) = source else {
        return Err(Error::Config("an MSE trace needs a fixed channel".into()));
    };
    if spec.snr_db.len() != 1 {
        return Err(Error::Config(format!("an MSE trace takes one SNR, got {}", spec.snr_db.len())));
    }
    if !spec.detector.is_iterative() {
        return Err(Error::Config(format!("{} has no iterations to trace", spec.detector)));
    }
    let records = simulate(spec, source)?;
    let blocks = build_block_channel(channel);
    let c = Constellation::by_name(&spec.constellation)?;
    let n0 = snr_to_n0(spec.snr_db[0]);
    let trajectories = Variant::ALL
        .iter()
        .map(|&v| run_state_evolution(&blocks, n0, &c, spec.iters, v))
        .collect::<Result<Vec<_>>>()?;
    let mut trace = MseTrace { records, trajectories, files: Vec::new() };
    trace.files.push(write_file(&spec.out, "mse.csv", &trace.mse_csv())?);
    trace.files.push(write_file(&spec.out, "records.csv", &records_csv(&trace.records))?);
    for t in &trace.trajectories {
        let name = format!("se_{}.csv", t.variant);
        trace.files.push(write_file(&spec.out, &name, &trajectories_csv(std::slice::from_ref(t)))?);
    }
    Ok(trace)
}
