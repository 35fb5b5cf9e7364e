//! Linear time-varying multipath channels and their banded time-domain
//! block structure.
//!
//! With integer delays `l_p <= M-1`, received block `r_i` only sees the
//! transmitted blocks `s_i` and `s_{i-1}` (block 0 sees block `N-1` through
//! the reduced cyclic prefix):
//!
//! ```text
//! r_i = H_T^{i,0} s_i + H_T^{i,1} s_{(i-1) mod N} + n_i
//! ```
//!
//! [`BlockChannel`] holds those blocks together with the stacked
//! observation/interference matrices `A_i = [H^{i,0}; H^{i+1,1}]` and
//! `B_i = blkdiag(H^{i,1}, H^{i+1,0})` the block LMMSE works on.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::transforms::{dense_transform_matrix, FrameGeometry};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One propagation path: complex gain, integer delay index and Doppler
/// index split into integer and fractional parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPath {
    pub gain: Complex64,
    pub delay: usize,
    pub doppler_int: i64,
    /// Fractional Doppler in `(-0.5, 0.5]`.
    pub doppler_frac: f64,
}

impl ChannelPath {
    /// Build a path from a combined Doppler index, splitting it into the
    /// nearest integer and a remainder in `(-0.5, 0.5]`.
    pub fn new(gain: Complex64, delay: usize, doppler: f64) -> Self {
        let (doppler_int, doppler_frac) = split_doppler(doppler);
        Self { gain, delay, doppler_int, doppler_frac }
    }

    /// Combined Doppler index `k + kappa`.
    #[inline]
    pub fn doppler(&self) -> f64 {
        self.doppler_int as f64 + self.doppler_frac
    }
}

fn split_doppler(nu: f64) -> (i64, f64) {
    let mut k = nu.round();
    let mut frac = nu - k;
    if frac <= -0.5 {
        k -= 1.0;
        frac += 1.0;
    }
    (k as i64, frac)
}

/// Random channel statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub paths: usize,
    pub l_max: usize,
    pub k_max: f64,
    /// When false, Doppler indices are rounded to integers.
    #[serde(default = "default_true")]
    pub fractional_doppler: bool,
}

fn default_true() -> bool {
    true
}

/// A `P`-path channel for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub geom: FrameGeometry,
    pub paths: Vec<ChannelPath>,
}

impl ChannelRealization {
    pub fn new(geom: FrameGeometry, paths: Vec<ChannelPath>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("a channel needs at least one path".into()));
        }
        for (p, path) in paths.iter().enumerate() {
            if path.delay >= geom.m {
                return Err(Error::Config(format!(
                    "path {p} has delay {} but M = {}",
                    path.delay, geom.m
                )));
            }
            if !path.gain.re.is_finite() || !path.gain.im.is_finite() || !path.doppler().is_finite() {
                return Err(Error::Config(format!("path {p} has non-finite parameters")));
            }
            if !(path.doppler_frac > -0.5 && path.doppler_frac <= 0.5) {
                return Err(Error::Config(format!(
                    "path {p} fractional Doppler {} outside (-0.5, 0.5]",
                    path.doppler_frac
                )));
            }
        }
        Ok(Self { geom, paths })
    }

    /// Single unit-gain path with zero delay and Doppler: `H_T = I`.
    pub fn identity(geom: FrameGeometry) -> Self {
        Self { geom, paths: vec![ChannelPath::new(Complex64::new(1.0, 0.0), 0, 0.0)] }
    }

    /// The fixed four-path realization used by the MSE-trace benchmark
    /// (`M = 64`, `N = 32`): delays `[0, 8, 4, 6]`, combined Doppler indices
    /// `[4.82, -3.23, 1.38, -2.47]`.
    pub fn fixed_four_path() -> Self {
        let geom = FrameGeometry { m: 64, n: 32 };
        let spec = [
            (-0.02, -0.09, 0, 4.82),
            (0.40, 0.73, 8, -3.23),
            (0.03, 0.45, 4, 1.38),
            (0.15, -0.43, 6, -2.47),
        ];
        let paths = spec
            .iter()
            .map(|&(re, im, l, nu)| ChannelPath::new(Complex64::new(re, im), l, nu))
            .collect();
        Self { geom, paths }
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }

    pub fn energy(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    pub fn to_record(&self) -> ChannelRecord {
        ChannelRecord {
            m: self.geom.m,
            n: self.geom.n,
            paths: self
                .paths
                .iter()
                .map(|p| (p.gain.re, p.gain.im, p.delay, p.doppler_int, p.doppler_frac))
                .collect(),
        }
    }

    pub fn from_record(rec: &ChannelRecord) -> Result<Self> {
        let geom = FrameGeometry::new(rec.m, rec.n)?;
        let paths = rec
            .paths
            .iter()
            .map(|&(re, im, delay, doppler_int, doppler_frac)| ChannelPath {
                gain: Complex64::new(re, im),
                delay,
                doppler_int,
                doppler_frac,
            })
            .collect();
        Self::new(geom, paths)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// Path-dependent coefficient of row `row` of `H_T`:
    /// `h_p exp(-j2π ν_p l_p / MN) α^{row ν_p}`.
    fn coefficient(&self, path: &ChannelPath, row: usize) -> Complex64 {
        let mn = self.geom.len() as f64;
        let nu = path.doppler();
        let phase = 2.0 * PI * nu * (row as f64 - path.delay as f64) / mn;
        path.gain * Complex64::from_polar(1.0, phase)
    }
}

/// Serialized channel: geometry plus `(re, im, l, k, kappa)` per path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub m: usize,
    pub n: usize,
    pub paths: Vec<(f64, f64, usize, i64, f64)>,
}

/// Draw a channel: path 0 at delay 0, the other delays uniform on
/// `{0, ..., l_max}`, combined Doppler uniform on `[-k_max, k_max]`, gains
/// circularly-symmetric Gaussian with variance `1/(2P)` per real dimension.
pub fn sample_channel(geom: FrameGeometry, params: &ChannelParams, seed: u64) -> Result<ChannelRealization> {
    sample_channel_with(geom, params, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_channel_with<R: Rng + ?Sized>(
    geom: FrameGeometry,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if params.paths == 0 {
        return Err(Error::Config("P must be at least 1".into()));
    }
    if params.l_max >= geom.m {
        return Err(Error::Config(format!(
            "maximum delay index {} must be below M = {}",
            params.l_max, geom.m
        )));
    }
    if !(params.k_max >= 0.0 && params.k_max.is_finite()) {
        return Err(Error::Config(format!("invalid maximum Doppler {}", params.k_max)));
    }
    let sigma = (1.0 / (2.0 * params.paths as f64)).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
    let paths = (0..params.paths)
        .map(|p| {
            let delay = if p == 0 { 0 } else { rng.random_range(0..=params.l_max) };
            let mut nu = if params.k_max > 0.0 {
                rng.random_range(-params.k_max..=params.k_max)
            } else {
                0.0
            };
            if !params.fractional_doppler {
                nu = nu.round();
            }
            let gain = Complex64::new(normal.sample(rng), normal.sample(rng));
            ChannelPath::new(gain, delay, nu)
        })
        .collect();
    ChannelRealization::new(geom, paths)
}

/// Dense `MN x MN` time-domain channel
/// `H_T = Σ_p h_p e^{-j2πν_p l_p/MN} Δ^{ν_p} Π^{l_p}`. Oracle use only.
pub fn build_time_channel_dense(ch: &ChannelRealization) -> DMatrix<Complex64> {
    let mn = ch.geom.len();
    let mut h = DMatrix::zeros(mn, mn);
    for path in &ch.paths {
        for row in 0..mn {
            let col = (row + mn - path.delay) % mn;
            h[(row, col)] += ch.coefficient(path, row);
        }
    }
    h
}

/// Dense delay-Doppler channel `(F_N ⊗ I_M) H_T (F_N^H ⊗ I_M)`. Oracle use
/// only.
pub fn build_dd_channel_dense(ch: &ChannelRealization) -> DMatrix<Complex64> {
    let f = dense_transform_matrix(ch.geom, false);
    let fh = f.adjoint();
    f * build_time_channel_dense(ch) * fh
}

/// Nonzero entries of one column of a window matrix, keyed by the global
/// symbol index the column multiplies.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumn {
    pub symbol: usize,
    pub entries: Vec<(usize, Complex64)>,
}

/// Rows of `H_T` that observe block `i`: `[r_i; r_{i+1}]` (just `r_0` when
/// `N = 1`), split into the columns acting on `s_i` and the interfering
/// columns. Columns of blocks `i-1` and `i+1` that coincide (`N = 2`) are
/// merged, so `Σ_c v_c h_c h_c^H` is the exact interference covariance.
#[derive(Debug, Clone)]
pub struct BlockWindow {
    pub block: usize,
    /// Global received-sample index of every window row.
    pub rows: Vec<usize>,
    /// Dense `rows x M` matrix acting on `s_i`.
    pub own: DMatrix<Complex64>,
    pub own_columns: Vec<SparseColumn>,
    pub interference: Vec<SparseColumn>,
}

/// Banded block form of `H_T`.
#[derive(Debug, Clone)]
pub struct BlockChannel {
    geom: FrameGeometry,
    diag_blocks: Vec<DMatrix<Complex64>>,
    sub_blocks: Vec<DMatrix<Complex64>>,
    observation: Vec<DMatrix<Complex64>>,
    interference: Vec<DMatrix<Complex64>>,
    windows: Vec<BlockWindow>,
}

impl BlockChannel {
    pub fn geometry(&self) -> FrameGeometry {
        self.geom
    }

    /// `H_T^{i,0}`.
    pub fn diag_block(&self, i: usize) -> &DMatrix<Complex64> {
        &self.diag_blocks[i]
    }

    /// `H_T^{i,1}`: interference from `s_{i-1}` onto `r_i`.
    pub fn sub_block(&self, i: usize) -> &DMatrix<Complex64> {
        &self.sub_blocks[i]
    }

    /// `A_i = [H_T^{i,0}; H_T^{(i+1),1}]`, `2M x M`.
    pub fn observation_matrix(&self, i: usize) -> &DMatrix<Complex64> {
        &self.observation[i]
    }

    /// `B_i = blkdiag(H_T^{i,1}, H_T^{(i+1),0})`, `2M x 2M`.
    pub fn interference_matrix(&self, i: usize) -> &DMatrix<Complex64> {
        &self.interference[i]
    }

    pub fn window(&self, i: usize) -> &BlockWindow {
        &self.windows[i]
    }

    pub fn windows(&self) -> &[BlockWindow] {
        &self.windows
    }

    /// Noiseless `H_T s` computed block-wise.
    pub fn apply(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        let FrameGeometry { m, n } = self.geom;
        check_len(m * n, s.len())?;
        let mut r = vec![ZERO; m * n];
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let (d, sb) = (&self.diag_blocks[i], &self.sub_blocks[i]);
            for row in 0..m {
                let mut acc = ZERO;
                for c in 0..m {
                    acc += d[(row, c)] * s[i * m + c] + sb[(row, c)] * s[prev * m + c];
                }
                r[i * m + row] = acc;
            }
        }
        Ok(r)
    }

    /// Place the blocks back into the `MN x MN` layout, including the
    /// top-right wrap `H_T^{0,1}`. For `N = 1` both blocks land on the single
    /// diagonal block.
    pub fn embed_dense(&self) -> DMatrix<Complex64> {
        let FrameGeometry { m, n } = self.geom;
        let mut h = DMatrix::zeros(m * n, m * n);
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let mut view = h.view_mut((i * m, i * m), (m, m));
            view += &self.diag_blocks[i];
            let mut view = h.view_mut((i * m, prev * m), (m, m));
            view += &self.sub_blocks[i];
        }
        h
    }
}

/// Build `H_T^{i,0}`, `H_T^{i,1}` for every block together with `A_i`, `B_i`
/// and the per-block observation windows. Row `m` of block `i` picks up path
/// `p` at column `m - l_p` of the same block when `m >= l_p`, otherwise at
/// column `M + m - l_p` of block `i-1`.
pub fn build_block_channel(ch: &ChannelRealization) -> BlockChannel {
    let FrameGeometry { m, n } = ch.geom;
    let mut diag_blocks = vec![DMatrix::zeros(m, m); n];
    let mut sub_blocks = vec![DMatrix::zeros(m, m); n];
    for i in 0..n {
        for path in &ch.paths {
            let l = path.delay;
            for row in 0..m {
                let coef = ch.coefficient(path, i * m + row);
                if row >= l {
                    diag_blocks[i][(row, row - l)] += coef;
                } else {
                    sub_blocks[i][(row, m + row - l)] += coef;
                }
            }
        }
    }

    let mut observation = Vec::with_capacity(n);
    let mut interference = Vec::with_capacity(n);
    for i in 0..n {
        let next = (i + 1) % n;
        let mut a = DMatrix::zeros(2 * m, m);
        a.view_mut((0, 0), (m, m)).copy_from(&diag_blocks[i]);
        a.view_mut((m, 0), (m, m)).copy_from(&sub_blocks[next]);
        let mut b = DMatrix::zeros(2 * m, 2 * m);
        b.view_mut((0, 0), (m, m)).copy_from(&sub_blocks[i]);
        b.view_mut((m, m), (m, m)).copy_from(&diag_blocks[next]);
        observation.push(a);
        interference.push(b);
    }

    let windows = (0..n).map(|i| block_window(ch.geom, i, &diag_blocks, &sub_blocks)).collect();

    BlockChannel { geom: ch.geom, diag_blocks, sub_blocks, observation, interference, windows }
}

fn block_window(
    geom: FrameGeometry,
    i: usize,
    diag_blocks: &[DMatrix<Complex64>],
    sub_blocks: &[DMatrix<Complex64>],
) -> BlockWindow {
    let FrameGeometry { m, n } = geom;
    let observed: Vec<usize> = if n == 1 { vec![0] } else { vec![i, (i + 1) % n] };
    let nrows = observed.len() * m;
    let mut columns: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
    let mut rows = Vec::with_capacity(nrows);
    for (slot, &blk) in observed.iter().enumerate() {
        rows.extend((0..m).map(|r| blk * m + r));
        let prev = (blk + n - 1) % n;
        for (src_block, mat) in [(blk, &diag_blocks[blk]), (prev, &sub_blocks[blk])] {
            for c in 0..m {
                let col = columns.entry(src_block * m + c).or_insert_with(|| vec![ZERO; nrows]);
                for r in 0..m {
                    col[slot * m + r] += mat[(r, c)];
                }
            }
        }
    }

    let mut own = DMatrix::zeros(nrows, m);
    let mut own_columns = Vec::with_capacity(m);
    let mut interference = Vec::new();
    for (symbol, dense) in columns {
        let entries: Vec<(usize, Complex64)> =
            dense.iter().enumerate().filter(|(_, v)| **v != ZERO).map(|(r, v)| (r, *v)).collect();
        if symbol / m == i {
            let c = symbol % m;
            for &(r, v) in &entries {
                own[(r, c)] = v;
            }
            own_columns.push(SparseColumn { symbol, entries });
        } else if !entries.is_empty() {
            interference.push(SparseColumn { symbol, entries });
        }
    }
    BlockWindow { block: i, rows, own, own_columns, interference }
}
