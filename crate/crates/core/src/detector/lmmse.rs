use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use super::{GaussianMessage, VAR_FLOOR};
use crate::channel::{BlockChannel, BlockWindow, SparseColumn};
use crate::error::{check_len, Error, Result};
use crate::transforms::FrameGeometry;

/// A time-domain soft estimator: turns the received frame and a diagonal
/// Gaussian prior on `s` into a diagonal Gaussian posterior on `s`.
pub trait TimeEstimator {
    fn geometry(&self) -> FrameGeometry;
    fn estimate(&self, r: &[Complex64], prior: &GaussianMessage, n0: f64) -> Result<GaussianMessage>;
}

/// Add `Σ_c v_c h_c h_c^H` to `sigma` for sparse columns `h_c`.
pub(crate) fn accumulate_covariance<'a>(
    sigma: &mut DMatrix<Complex64>,
    columns: impl IntoIterator<Item = &'a SparseColumn>,
    weight: impl Fn(usize) -> f64,
) {
    for col in columns {
        let v = weight(col.symbol);
        if v == 0.0 {
            continue;
        }
        for &(a, ha) in &col.entries {
            let hv = ha * v;
            for &(b, hb) in &col.entries {
                sigma[(a, b)] += hv * hb.conj();
            }
        }
    }
}

/// Cholesky factor of a Hermitian positive-definite matrix. On failure the
/// diagonal is loaded with `1e-12 * trace / dim` once and the factorization
/// retried.
pub(crate) fn factor_hermitian(sigma: DMatrix<Complex64>, block: usize) -> Result<Cholesky<Complex64, Dyn>> {
    let dim = sigma.nrows();
    let trace: f64 = (0..dim).map(|k| sigma[(k, k)].re).sum();
    let backup = sigma.clone();
    if let Some(ch) = sigma.cholesky() {
        return Ok(ch);
    }
    let jitter = 1e-12 * trace.abs() / dim as f64;
    let mut loaded = backup;
    for k in 0..dim {
        loaded[(k, k)] += Complex64::new(jitter, 0.0);
    }
    loaded.cholesky().ok_or(Error::NotPositiveDefinite { block })
}

/// Posterior of one block from its observation window.
fn window_posterior(
    w: &BlockWindow,
    m: usize,
    r: &[Complex64],
    prior: &GaussianMessage,
    n0: f64,
    out: &mut GaussianMessage,
) -> Result<()> {
    let rows = w.rows.len();
    let mut sigma = DMatrix::from_diagonal_element(rows, rows, Complex64::new(n0, 0.0));
    accumulate_covariance(&mut sigma, w.own_columns.iter().chain(&w.interference), |k| prior.var[k]);

    // SIC residual r~ - H_B m~ - H_A m
    let mut resid = DVector::from_iterator(rows, w.rows.iter().map(|&k| r[k]));
    for col in w.own_columns.iter().chain(&w.interference) {
        let mk = prior.mean[col.symbol];
        for &(a, h) in &col.entries {
            resid[a] -= h * mk;
        }
    }

    let chol = factor_hermitian(sigma, w.block)?;
    let l = chol.l_dirty();
    let z = l.solve_lower_triangular(&w.own).ok_or(Error::NotPositiveDefinite { block: w.block })?;
    let zr = l.solve_lower_triangular(&resid).ok_or(Error::NotPositiveDefinite { block: w.block })?;

    let base = w.block * m;
    for c in 0..m {
        let k = base + c;
        let v = prior.var[k];
        let zc = z.column(c);
        let gain = zc.dotc(&zr);
        out.mean[k] = prior.mean[k] + gain * v;
        out.var[k] = (v - v * v * zc.norm_squared()).max(VAR_FLOOR);
    }
    Ok(())
}

/// Reduced-size block LMMSE bound to one channel.
#[derive(Debug, Clone, Copy)]
pub struct BlockLmmse<'a> {
    blocks: &'a BlockChannel,
}

impl<'a> BlockLmmse<'a> {
    pub fn new(blocks: &'a BlockChannel) -> Self {
        Self { blocks }
    }
}

impl TimeEstimator for BlockLmmse<'_> {
    fn geometry(&self) -> FrameGeometry {
        self.blocks.geometry()
    }

    fn estimate(&self, r: &[Complex64], prior: &GaussianMessage, n0: f64) -> Result<GaussianMessage> {
        block_lmmse(self.blocks, r, prior, n0)
    }
}

/// Block-wise LMMSE with SIC.
///
/// For every block `i` the window `r~_i = [r_i; r_{i+1}]` is filtered with
/// `W_i = C_i A_i^H (A_i C_i A_i^H + B_i C~_i B_i^H + N0 I)^{-1}` after
/// cancelling the prior means of `s_i` and its neighbours. Only the
/// diagonal of the posterior covariance `C_i - W_i A_i C_i` is kept. All
/// blocks use the same prior (parallel schedule).
pub fn block_lmmse(
    blocks: &BlockChannel,
    r: &[Complex64],
    prior: &GaussianMessage,
    n0: f64,
) -> Result<GaussianMessage> {
    let geom = blocks.geometry();
    check_len(geom.len(), r.len())?;
    check_len(geom.len(), prior.len())?;
    if !(n0 > 0.0) {
        return Err(Error::Domain(format!("N0 must be positive, got {n0}")));
    }
    let mut post = prior.clone();
    for w in blocks.windows() {
        window_posterior(w, geom.m, r, prior, n0, &mut post)?;
    }
    Ok(post)
}

/// Frame-wide LMMSE over the dense `MN x MN` channel.
#[derive(Debug, Clone)]
pub struct FullLmmse {
    geom: FrameGeometry,
    h: DMatrix<Complex64>,
    columns: Vec<SparseColumn>,
}

impl FullLmmse {
    pub fn new(geom: FrameGeometry, h_t: DMatrix<Complex64>) -> Result<Self> {
        check_len(geom.len(), h_t.nrows())?;
        check_len(geom.len(), h_t.ncols())?;
        let columns = (0..h_t.ncols())
            .map(|c| SparseColumn {
                symbol: c,
                entries: h_t
                    .column(c)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
                    .map(|(r, v)| (r, *v))
                    .collect(),
            })
            .collect();
        Ok(Self { geom, h: h_t, columns })
    }
}

impl TimeEstimator for FullLmmse {
    fn geometry(&self) -> FrameGeometry {
        self.geom
    }

    fn estimate(&self, r: &[Complex64], prior: &GaussianMessage, n0: f64) -> Result<GaussianMessage> {
        let len = self.geom.len();
        check_len(len, r.len())?;
        check_len(len, prior.len())?;
        if !(n0 > 0.0) {
            return Err(Error::Domain(format!("N0 must be positive, got {n0}")));
        }
        let mut sigma = DMatrix::from_diagonal_element(len, len, Complex64::new(n0, 0.0));
        accumulate_covariance(&mut sigma, &self.columns, |k| prior.var[k]);
        let mut resid = DVector::from_column_slice(r);
        for col in &self.columns {
            let mk = prior.mean[col.symbol];
            for &(a, h) in &col.entries {
                resid[a] -= h * mk;
            }
        }
        let chol = factor_hermitian(sigma, 0)?;
        let l = chol.l_dirty();
        let z = l.solve_lower_triangular(&self.h).ok_or(Error::NotPositiveDefinite { block: 0 })?;
        let zr = l.solve_lower_triangular(&resid).ok_or(Error::NotPositiveDefinite { block: 0 })?;
        let mut post = prior.clone();
        for k in 0..len {
            let v = prior.var[k];
            let zc = z.column(k);
            post.mean[k] = prior.mean[k] + zc.dotc(&zr) * v;
            post.var[k] = (v - v * v * zc.norm_squared()).max(VAR_FLOOR);
        }
        Ok(post)
    }
}

/// Full-size LMMSE with SIC over the whole frame:
/// `m_p = m_a + C H^H (H C H^H + N0 I)^{-1} (r - H m_a)`, diagonal of
/// `C - C H^H (H C H^H + N0 I)^{-1} H C`. `O((MN)^3)`; desk-scale frames.
pub fn full_lmmse_baseline(
    h_t: &DMatrix<Complex64>,
    r: &[Complex64],
    prior: &GaussianMessage,
    n0: f64,
) -> Result<GaussianMessage> {
    let len = r.len();
    let geom = FrameGeometry::new(len.max(1), 1)?;
    FullLmmse::new(geom, h_t.clone())?.estimate(r, prior, n0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_block_channel, build_time_channel_dense, sample_channel, ChannelParams, ChannelRealization};
    use crate::transforms::FrameGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    /// Direct transcription of the block LMMSE with an explicit inverse and
    /// the stacked `A_i`, `B_i` matrices (N >= 3).
    fn dense_block_oracle(
        blocks: &BlockChannel,
        r: &[Complex64],
        prior: &GaussianMessage,
        n0: f64,
    ) -> GaussianMessage {
        let FrameGeometry { m, n } = blocks.geometry();
        let mut post = prior.clone();
        for i in 0..n {
            let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
            let a = blocks.observation_matrix(i);
            let b = blocks.interference_matrix(i);
            let own: Vec<usize> = (0..m).map(|c| i * m + c).collect();
            let nb: Vec<usize> = (0..m).map(|c| prev * m + c).chain((0..m).map(|c| next * m + c)).collect();
            let diag = |idx: &[usize]| {
                DMatrix::from_diagonal(&DVector::from_iterator(
                    idx.len(),
                    idx.iter().map(|&k| Complex64::new(prior.var[k], 0.0)),
                ))
            };
            let (c, ct) = (diag(&own), diag(&nb));
            let inner = a * &c * a.adjoint()
                + b * &ct * b.adjoint()
                + DMatrix::from_diagonal_element(2 * m, 2 * m, Complex64::new(n0, 0.0));
            let w = &c * a.adjoint() * inner.try_inverse().unwrap();
            let rt = DVector::from_iterator(2 * m, (0..m).map(|k| r[i * m + k]).chain((0..m).map(|k| r[next * m + k])));
            let ma = DVector::from_iterator(m, own.iter().map(|&k| prior.mean[k]));
            let mt = DVector::from_iterator(2 * m, nb.iter().map(|&k| prior.mean[k]));
            let mp = &ma + &w * (rt - b * mt - a * &ma);
            let cp = &c - &w * a * &c;
            for (j, &k) in own.iter().enumerate() {
                post.mean[k] = mp[j];
                post.var[k] = cp[(j, j)].re;
            }
        }
        post
    }

    /// Textbook frame-wide LMMSE `C H^H (H C H^H + N0 I)^{-1}`.
    fn dense_full_oracle(h: &DMatrix<Complex64>, r: &[Complex64], prior: &GaussianMessage, n0: f64) -> GaussianMessage {
        let len = r.len();
        let c = DMatrix::from_diagonal(&DVector::from_iterator(len, prior.var.iter().map(|&v| Complex64::new(v, 0.0))));
        let w = &c * h.adjoint()
            * (h * &c * h.adjoint() + DMatrix::from_diagonal_element(len, len, Complex64::new(n0, 0.0)))
                .try_inverse()
                .unwrap();
        let ma = DVector::from_column_slice(&prior.mean);
        let mp = &ma + &w * (DVector::from_column_slice(r) - h * &ma);
        let cp = &c - &w * h * &c;
        GaussianMessage { mean: mp.as_slice().to_vec(), var: (0..len).map(|k| cp[(k, k)].re).collect() }
    }

    fn max_dev(a: &GaussianMessage, b: &GaussianMessage) -> f64 {
        let dm = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let dv = a.var.iter().zip(&b.var).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        dm.max(dv)
    }

    fn random_instance(seed: u64, m: usize, n: usize) -> (ChannelRealization, Vec<Complex64>, GaussianMessage) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = FrameGeometry::new(m, n).unwrap();
        let params = ChannelParams { paths: 3, l_max: m - 1, k_max: 1.5, fractional_doppler: true };
        let ch = sample_channel(g, &params, seed).unwrap();
        let r: Vec<Complex64> = (0..m * n).map(|_| rand_c(&mut rng)).collect();
        let prior = GaussianMessage {
            mean: (0..m * n).map(|_| rand_c(&mut rng) * 0.5).collect(),
            var: (0..m * n).map(|_| rng.random_range(0.05..1.0)).collect(),
        };
        (ch, r, prior)
    }

    #[test]
    fn identity_channel_inverts() {
        let g = FrameGeometry::new(4, 3).unwrap();
        let blocks = build_block_channel(&ChannelRealization::identity(g));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r: Vec<Complex64> = (0..12).map(|_| rand_c(&mut rng)).collect();
        let post = block_lmmse(&blocks, &r, &GaussianMessage::uninformative(12, 1.0), 1e-12).unwrap();
        for ((m, v), r) in post.mean.iter().zip(&post.var).zip(&r) {
            assert!((m - r).norm() < 1e-9);
            assert!(*v < 1e-9);
        }
    }

    #[test]
    fn confident_prior_is_kept() {
        let (ch, _, _) = random_instance(5, 4, 4);
        let blocks = build_block_channel(&ch);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<Complex64> = (0..16).map(|_| rand_c(&mut rng)).collect();
        let r = blocks.apply(&s).unwrap();
        let prior = GaussianMessage { mean: s.clone(), var: vec![1e-14; 16] };
        let post = block_lmmse(&blocks, &r, &prior, 0.1).unwrap();
        for (m, s) in post.mean.iter().zip(&s) {
            assert!((m - s).norm() < 1e-12);
        }
    }

    #[test]
    fn block_matches_dense_transcription() {
        for seed in 0..100 {
            let (ch, r, prior) = random_instance(seed, 4, 4);
            let blocks = build_block_channel(&ch);
            let n0 = 0.05 + seed as f64 * 0.01;
            let fast = block_lmmse(&blocks, &r, &prior, n0).unwrap();
            let slow = dense_block_oracle(&blocks, &r, &prior, n0);
            assert!(max_dev(&fast, &slow) < 1e-10, "seed {seed}: {}", max_dev(&fast, &slow));
            let unif = GaussianMessage::uninformative(16, 1.0);
            let fast = block_lmmse(&blocks, &r, &unif, n0).unwrap();
            let slow = dense_block_oracle(&blocks, &r, &unif, n0);
            assert!(max_dev(&fast, &slow) < 1e-10);
        }
    }

    #[test]
    fn full_matches_textbook() {
        for seed in 0..100 {
            let (ch, r, prior) = random_instance(1000 + seed, 4, 4);
            let h = build_time_channel_dense(&ch);
            let fast = full_lmmse_baseline(&h, &r, &prior, 0.1).unwrap();
            let slow = dense_full_oracle(&h, &r, &prior, 0.1);
            assert!(max_dev(&fast, &slow) < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn full_equals_block_without_coupling() {
        let g = FrameGeometry::new(4, 4).unwrap();
        let ch = ChannelRealization::identity(g);
        let (_, r, prior) = random_instance(3, 4, 4);
        let a = full_lmmse_baseline(&build_time_channel_dense(&ch), &r, &prior, 0.2).unwrap();
        let b = block_lmmse(&build_block_channel(&ch), &r, &prior, 0.2).unwrap();
        assert!(max_dev(&a, &b) < 1e-10);
    }

    #[test]
    fn two_block_frame_matches_full_lmmse_per_block_marginal() {
        // N = 2: both neighbours are the same block; the merged window is the
        // exact joint model, so the first-iteration posterior of each block
        // equals the marginal of the frame-wide LMMSE restricted to the two
        // received blocks, which here are the whole frame.
        let (ch, r, _) = random_instance(17, 3, 2);
        let unif = GaussianMessage::uninformative(6, 1.0);
        let a = block_lmmse(&build_block_channel(&ch), &r, &unif, 0.1).unwrap();
        let b = full_lmmse_baseline(&build_time_channel_dense(&ch), &r, &unif, 0.1).unwrap();
        assert!(max_dev(&a, &b) < 1e-10);
    }

    #[test]
    fn single_block_frame() {
        let (ch, r, prior) = random_instance(21, 5, 1);
        let a = block_lmmse(&build_block_channel(&ch), &r, &prior, 0.1).unwrap();
        let b = full_lmmse_baseline(&build_time_channel_dense(&ch), &r, &prior, 0.1).unwrap();
        assert!(max_dev(&a, &b) < 1e-10);
    }

    #[test]
    fn rejects_bad_noise_and_lengths() {
        let (ch, r, prior) = random_instance(1, 3, 3);
        let blocks = build_block_channel(&ch);
        assert!(matches!(block_lmmse(&blocks, &r, &prior, 0.0), Err(Error::Domain(_))));
        assert!(matches!(block_lmmse(&blocks, &r[..8], &prior, 0.1), Err(Error::Dimension { .. })));
    }
}
