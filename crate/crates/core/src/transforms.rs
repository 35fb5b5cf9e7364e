//! Time / delay-Doppler domain transforms.
//!
//! Every vector in a frame has length `M*N` and is laid out block-major:
//! element `n = i*M + m` belongs to time block (Doppler bin) `i` and delay
//! lane `m`. The transforms between the two domains are `F_N^H ⊗ I_M`
//! (delay-Doppler to time) and `F_N ⊗ I_M` (time to delay-Doppler), applied
//! as `M` independent length-`N` unitary DFTs over strided lanes.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Frame geometry: `m` delay bins (block length) and `n` Doppler bins
/// (number of time blocks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub m: usize,
    pub n: usize,
}

impl FrameGeometry {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Config(format!(
                "frame geometry needs M >= 1 and N >= 1, got M={m}, N={n}"
            )));
        }
        Ok(Self { m, n })
    }

    /// Total number of symbols `M*N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.m * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of `(block, lane)`.
    #[inline]
    pub fn index(&self, block: usize, lane: usize) -> usize {
        block * self.m + lane
    }

    /// Inverse of [`FrameGeometry::index`].
    #[inline]
    pub fn split(&self, n: usize) -> (usize, usize) {
        (n / self.m, n % self.m)
    }
}

/// Planned lane transforms for one geometry. Reuse this across frames to
/// avoid re-planning the length-`N` FFTs.
#[derive(Clone)]
pub struct DdTransform {
    geom: FrameGeometry,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for DdTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DdTransform").field("geom", &self.geom).finish()
    }
}

impl DdTransform {
    pub fn new(geom: FrameGeometry) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            geom,
            forward: planner.plan_fft_forward(geom.n),
            inverse: planner.plan_fft_inverse(geom.n),
            scale: 1.0 / (geom.n as f64).sqrt(),
        }
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geom
    }

    /// `s = (F_N^H ⊗ I_M) x`.
    pub fn dd_to_time(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.lanes(x, &self.inverse)
    }

    /// `y = (F_N ⊗ I_M) r`.
    pub fn time_to_dd(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        self.lanes(r, &self.forward)
    }

    fn lanes(&self, input: &[Complex64], fft: &Arc<dyn Fft<f64>>) -> Result<Vec<Complex64>> {
        let FrameGeometry { m, n } = self.geom;
        check_len(m * n, input.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); m * n];
        let mut lane = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for d in 0..m {
            for (i, v) in lane.iter_mut().enumerate() {
                *v = input[i * m + d];
            }
            fft.process_with_scratch(&mut lane, &mut scratch);
            for (i, v) in lane.iter().enumerate() {
                out[i * m + d] = v * self.scale;
            }
        }
        Ok(out)
    }
}

/// `s = (F_N^H ⊗ I_M) x` with unitary normalization.
pub fn dd_to_time(x: &[Complex64], geom: FrameGeometry) -> Result<Vec<Complex64>> {
    DdTransform::new(geom).dd_to_time(x)
}

/// `y = (F_N ⊗ I_M) r` with unitary normalization.
pub fn time_to_dd(r: &[Complex64], geom: FrameGeometry) -> Result<Vec<Complex64>> {
    DdTransform::new(geom).time_to_dd(r)
}

/// Diagonal of `(F_N ⊗ I_M) diag(v) (F_N^H ⊗ I_M)`.
///
/// Each delay lane's variance is averaged over the `N` blocks and
/// replicated across Doppler bins; off-diagonal terms are discarded.
pub fn variance_time_to_dd(v: &[f64], geom: FrameGeometry) -> Result<Vec<f64>> {
    lane_average(v, geom)
}

/// Diagonal of `(F_N^H ⊗ I_M) diag(v) (F_N ⊗ I_M)`. Coincides with
/// [`variance_time_to_dd`] for diagonal inputs.
pub fn variance_dd_to_time(v: &[f64], geom: FrameGeometry) -> Result<Vec<f64>> {
    lane_average(v, geom)
}

fn lane_average(v: &[f64], geom: FrameGeometry) -> Result<Vec<f64>> {
    let FrameGeometry { m, n } = geom;
    check_len(m * n, v.len())?;
    if let Some((idx, bad)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::Domain(format!(
            "variance entry {idx} is {bad}, expected a nonnegative value"
        )));
    }
    let mut out = vec![0.0; m * n];
    for d in 0..m {
        let mean = (0..n).map(|i| v[i * m + d]).sum::<f64>() / n as f64;
        for i in 0..n {
            out[i * m + d] = mean;
        }
    }
    Ok(out)
}

/// Unitary `N`-point DFT matrix, `F[k, i] = exp(-j2πki/N) / √N`.
pub fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |k, i| {
        let phase = -2.0 * std::f64::consts::PI * ((k * i) % n) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Dense `F_N ⊗ I_M` (or its adjoint when `inverse`). Oracle use only: this
/// materializes an `MN x MN` matrix.
pub fn dense_transform_matrix(geom: FrameGeometry, inverse: bool) -> DMatrix<Complex64> {
    let f = dft_matrix(geom.n);
    let f = if inverse { f.adjoint() } else { f };
    f.kronecker(&DMatrix::<Complex64>::identity(geom.m, geom.m))
}
