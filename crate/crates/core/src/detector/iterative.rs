use nalgebra::DMatrix;
use num_complex::Complex64;

use super::lmmse::{BlockLmmse, FullLmmse, TimeEstimator};
use super::{dd_demap_hard, extrinsic_clamped, DetectionResult, DetectorConfig, GaussianMessage};
use crate::channel::BlockChannel;
use crate::error::{check_len, Error, Result};
use crate::modem::Constellation;
use crate::transforms::{variance_dd_to_time, DdTransform, FrameGeometry};

/// Snapshot of one cross-domain iteration, handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct IterationView<'a> {
    /// 1-based iteration number.
    pub iteration: usize,
    pub time_prior: &'a GaussianMessage,
    pub time_posterior: &'a GaussianMessage,
    pub time_extrinsic: &'a GaussianMessage,
    pub dd_prior: &'a GaussianMessage,
    pub dd_posterior: &'a GaussianMessage,
    /// Constellation indices of the max-weight points.
    pub decisions: &'a [usize],
}

/// Delay-Doppler prior from the time-domain extrinsic message: the mean
/// goes through `F_N ⊗ I_M`, the diagonal variance is copied as is.
pub fn dd_prior_from_time(ext_t: &GaussianMessage, transform: &DdTransform) -> Result<GaussianMessage> {
    Ok(GaussianMessage { mean: transform.time_to_dd(&ext_t.mean)?, var: ext_t.var.clone() })
}

/// Time-domain image of the delay-Doppler posterior: mean through
/// `F_N^H ⊗ I_M`, variance lane-averaged.
pub fn time_posterior_from_dd(post_dd: &GaussianMessage, transform: &DdTransform) -> Result<GaussianMessage> {
    Ok(GaussianMessage {
        mean: transform.dd_to_time(&post_dd.mean)?,
        var: variance_dd_to_time(&post_dd.var, transform.geometry())?,
    })
}

/// Extrinsic message of the delay-Doppler stage in the time domain, i.e.
/// the next time-domain prior. The reference prior is the time-domain
/// extrinsic message that fed the delay-Doppler stage.
pub fn time_extrinsic_from_dd(
    post_dd: &GaussianMessage,
    ext_t: &GaussianMessage,
    transform: &DdTransform,
) -> Result<GaussianMessage> {
    let post_s = time_posterior_from_dd(post_dd, transform)?;
    super::extrinsic(&post_s, ext_t)
}

fn run_loop<E: TimeEstimator>(
    estimator: &E,
    r: &[Complex64],
    n0: f64,
    constellation: &Constellation,
    cfg: &DetectorConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<DetectionResult> {
    let geom: FrameGeometry = estimator.geometry();
    check_len(geom.len(), r.len())?;
    if cfg.max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.damping) {
        return Err(Error::Config(format!("damping {} outside [0, 1]", cfg.damping)));
    }
    let transform = DdTransform::new(geom);
    let (floor, ceil) = (cfg.var_floor, cfg.var_ceil);
    let wrap = |iteration: usize| move |e: Error| Error::Iteration { iteration, source: Box::new(e) };

    let mut prior = GaussianMessage::uninformative(geom.len(), ceil);
    let mut proxies = Vec::with_capacity(cfg.max_iters);
    let mut decisions = Vec::new();
    for it in 1..=cfg.max_iters {
        let post_t = estimator.estimate(r, &prior, n0).map_err(wrap(it))?;
        let ext_t = extrinsic_clamped(&post_t, &prior, floor, ceil)?;
        let dd_prior = dd_prior_from_time(&ext_t, &transform)?;
        let (dd_post, hard) = dd_demap_hard(&dd_prior, constellation);
        let post_s = time_posterior_from_dd(&dd_post, &transform)?;
        let mut next = extrinsic_clamped(&post_s, &ext_t, floor, ceil)?;

        observer(&IterationView {
            iteration: it,
            time_prior: &prior,
            time_posterior: &post_t,
            time_extrinsic: &ext_t,
            dd_prior: &dd_prior,
            dd_posterior: &dd_post,
            decisions: &hard,
        });

        let proxy = post_t.mean_var();
        let settled = cfg.stop_tol > 0.0 && proxies.last().is_some_and(|&p: &f64| (p - proxy).abs() < cfg.stop_tol);
        proxies.push(proxy);
        decisions = hard;
        if settled {
            break;
        }
        if cfg.damping > 0.0 {
            let d = cfg.damping;
            for k in 0..next.len() {
                next.mean[k] = next.mean[k] * (1.0 - d) + prior.mean[k] * d;
                next.var[k] = next.var[k] * (1.0 - d) + prior.var[k] * d;
            }
        }
        prior = next;
    }

    let points = constellation.points();
    let mut hard_bits = Vec::with_capacity(decisions.len() * constellation.bits_per_symbol());
    for &j in &decisions {
        constellation.push_bits(j, &mut hard_bits);
    }
    Ok(DetectionResult {
        hard_symbols: decisions.iter().map(|&j| points[j]).collect(),
        hard_bits,
        iters_run: proxies.len(),
        mse_per_iter: proxies,
    })
}

/// Cross-domain iterative detection with the block LMMSE in the time
/// domain and symbol-wise demapping in the delay-Doppler domain.
pub fn detect_cross_domain(
    blocks: &BlockChannel,
    r: &[Complex64],
    n0: f64,
    constellation: &Constellation,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    detect_cross_domain_observed(blocks, r, n0, constellation, cfg, &mut |_| {})
}

/// [`detect_cross_domain`] reporting every iteration to `observer`.
pub fn detect_cross_domain_observed(
    blocks: &BlockChannel,
    r: &[Complex64],
    n0: f64,
    constellation: &Constellation,
    cfg: &DetectorConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<DetectionResult> {
    run_loop(&BlockLmmse::new(blocks), r, n0, constellation, cfg, observer)
}

/// The same loop with the frame-wide LMMSE in the time domain.
pub fn detect_full_lmmse(
    geom: FrameGeometry,
    h_t: &DMatrix<Complex64>,
    r: &[Complex64],
    n0: f64,
    constellation: &Constellation,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    detect_full_lmmse_observed(geom, h_t, r, n0, constellation, cfg, &mut |_| {})
}

pub fn detect_full_lmmse_observed(
    geom: FrameGeometry,
    h_t: &DMatrix<Complex64>,
    r: &[Complex64],
    n0: f64,
    constellation: &Constellation,
    cfg: &DetectorConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<DetectionResult> {
    let est = FullLmmse::new(geom, h_t.clone())?;
    run_loop(&est, r, n0, constellation, cfg, observer)
}
