//! The cross-domain iterative receiver.
//!
//! Time domain: reduced-size block LMMSE with SIC over the two received
//! blocks that observe each transmitted block ([`block_lmmse`]). Delay-Doppler
//! domain: symbol-wise Gaussian demapping ([`dd_demap`]). The two exchange
//! extrinsic Gaussian messages ([`extrinsic`]) through the unitary lane DFTs
//! until the iteration budget is spent ([`detect_cross_domain`]).
//!
//! [`full_lmmse_baseline`] is the frame-wide LMMSE the block estimator
//! replaces, and [`brute_force_map`] an exhaustive decision oracle for tiny
//! frames.

mod demap;
mod iterative;
mod lmmse;
mod map;

pub use demap::{dd_demap, dd_demap_hard};
pub use iterative::{
    detect_cross_domain, detect_cross_domain_observed, detect_full_lmmse, detect_full_lmmse_observed,
    dd_prior_from_time, time_extrinsic_from_dd, time_posterior_from_dd, IterationView,
};
pub(crate) use lmmse::{accumulate_covariance, factor_hermitian};
pub use lmmse::{block_lmmse, full_lmmse_baseline, BlockLmmse, FullLmmse, TimeEstimator};
pub use map::{brute_force_map, MapObservation, MAP_HYPOTHESIS_LIMIT};

use num_complex::Complex64;

use crate::error::{check_len, Result};

/// Lower clamp for every message variance.
pub const VAR_FLOOR: f64 = 1e-10;
/// Upper clamp for every message variance (unit symbol energy).
pub const VAR_CEIL: f64 = 1.0;

/// Gaussian message with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMessage {
    pub mean: Vec<Complex64>,
    pub var: Vec<f64>,
}

impl GaussianMessage {
    pub fn new(mean: Vec<Complex64>, var: Vec<f64>) -> Result<Self> {
        check_len(mean.len(), var.len())?;
        Ok(Self { mean, var })
    }

    /// Zero mean, variance `var` everywhere.
    pub fn uninformative(len: usize, var: f64) -> Self {
        Self { mean: vec![Complex64::new(0.0, 0.0); len], var: vec![var; len] }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean_var(&self) -> f64 {
        self.var.iter().sum::<f64>() / self.var.len().max(1) as f64
    }

    /// Empirical `(1/len) Σ |mean - truth|²`.
    pub fn mse(&self, truth: &[Complex64]) -> f64 {
        self.mean.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / truth.len().max(1) as f64
    }
}

/// Iteration control for the cross-domain loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub max_iters: usize,
    pub var_floor: f64,
    pub var_ceil: f64,
    /// Stop once the mean time-domain posterior variance changes by less
    /// than this. `0` runs all `max_iters`.
    pub stop_tol: f64,
    /// Weight of the previous prior in the next one, `0` disables damping.
    pub damping: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { max_iters: 5, var_floor: VAR_FLOOR, var_ceil: VAR_CEIL, stop_tol: 0.0, damping: 0.0 }
    }
}

impl DetectorConfig {
    pub fn with_iters(max_iters: usize) -> Self {
        Self { max_iters, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub hard_symbols: Vec<Complex64>,
    pub hard_bits: Vec<u8>,
    /// Mean time-domain posterior variance after each iteration.
    pub mse_per_iter: Vec<f64>,
    pub iters_run: usize,
}

/// Per-element Gaussian division `post / prior`.
///
/// `v_e = 1/(1/v_p - 1/v_a)`, `m_e = v_e (m_p/v_p - m_a/v_a)`, variance
/// clamped to `[VAR_FLOOR, VAR_CEIL]`. A variance above the ceiling is
/// clamped in natural parameters, i.e. the mean is `VAR_CEIL (m_p/v_p -
/// m_a/v_a)`, so a nearly uninformative message shrinks towards zero
/// instead of growing without bound. Where the posterior is no more
/// certain than the prior the result is uninformative (`VAR_CEIL`, mean
/// `m_p`).
pub fn extrinsic(post: &GaussianMessage, prior: &GaussianMessage) -> Result<GaussianMessage> {
    extrinsic_clamped(post, prior, VAR_FLOOR, VAR_CEIL)
}

pub(crate) fn extrinsic_clamped(
    post: &GaussianMessage,
    prior: &GaussianMessage,
    floor: f64,
    ceil: f64,
) -> Result<GaussianMessage> {
    check_len(prior.len(), post.len())?;
    let mut mean = Vec::with_capacity(post.len());
    let mut var = Vec::with_capacity(post.len());
    for k in 0..post.len() {
        let (mp, vp) = (post.mean[k], post.var[k]);
        let (ma, va) = (prior.mean[k], prior.var[k]);
        if !(vp < va) || !(vp > 0.0) {
            mean.push(mp);
            var.push(ceil);
            continue;
        }
        let ve = 1.0 / (1.0 / vp - 1.0 / va);
        mean.push((mp / vp - ma / va) * ve.min(ceil));
        var.push(ve.clamp(floor, ceil));
    }
    Ok(GaussianMessage { mean, var })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn msg(mean: &[(f64, f64)], var: &[f64]) -> GaussianMessage {
        GaussianMessage::new(mean.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), var.to_vec()).unwrap()
    }

    #[test]
    fn extrinsic_arithmetic() {
        let e = extrinsic(&msg(&[(1.0, 0.0)], &[0.5]), &msg(&[(0.0, 0.0)], &[1.0])).unwrap();
        assert!((e.var[0] - 1.0).abs() < 1e-15);
        assert!((e.mean[0] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn no_information_is_uninformative() {
        let e = extrinsic(&msg(&[(0.3, 0.1)], &[0.4]), &msg(&[(0.0, 0.0)], &[0.4])).unwrap();
        assert_eq!(e.var[0], VAR_CEIL);
        assert_eq!(e.mean[0], Complex64::new(0.3, 0.1));
        let e = extrinsic(&msg(&[(0.3, 0.1)], &[0.5]), &msg(&[(0.0, 0.0)], &[0.4])).unwrap();
        assert_eq!(e.var[0], VAR_CEIL);
    }

    #[test]
    fn weak_extrinsic_mean_stays_bounded() {
        // v_e = 1/(1/0.999 - 1/1) = 999: clamped to 1, mean from the natural
        // parameter instead of 999 * eta.
        let e = extrinsic(&msg(&[(0.5, 0.0)], &[0.999]), &msg(&[(0.49, 0.0)], &[1.0])).unwrap();
        let eta = 0.5 / 0.999 - 0.49;
        assert_eq!(e.var[0], VAR_CEIL);
        assert!((e.mean[0].re - eta * VAR_CEIL).abs() < 1e-15);
        assert!(e.mean[0].norm() < 0.02);
    }

    #[test]
    fn product_with_prior_recovers_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut checked = 0;
        for _ in 0..1000 {
            let va = rng.random_range(0.05..1.0);
            let vp = va * rng.random_range(0.05..0.95);
            let ma = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let mp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let post = GaussianMessage::new(vec![mp], vec![vp]).unwrap();
            let prior = GaussianMessage::new(vec![ma], vec![va]).unwrap();
            let e = extrinsic(&post, &prior).unwrap();
            let raw = 1.0 / (1.0 / vp - 1.0 / va);
            if raw > VAR_CEIL {
                continue;
            }
            checked += 1;
            let v = 1.0 / (1.0 / e.var[0] + 1.0 / va);
            let m = (e.mean[0] / e.var[0] + ma / va) * v;
            assert!((v - vp).abs() < 1e-10);
            assert!((m - mp).norm() < 1e-10);
        }
        assert!(checked > 300);
    }
}
