use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::modem::Constellation;
use crate::transforms::{dense_transform_matrix, FrameGeometry};

/// Largest exhaustive search accepted by [`brute_force_map`].
pub const MAP_HYPOTHESIS_LIMIT: usize = 1 << 20;

/// Observation handed to the exhaustive detector.
#[derive(Debug, Clone, Copy)]
pub enum MapObservation<'a> {
    /// Dense `H_T` and the time-domain received vector `r`.
    Time { h_t: &'a DMatrix<Complex64>, r: &'a [Complex64] },
    /// Dense `H_DD` and the delay-Doppler received vector `y`.
    DelayDoppler { h_dd: &'a DMatrix<Complex64>, y: &'a [Complex64] },
}

/// Exhaustive maximum-likelihood sequence decision over all `|A|^{MN}`
/// delay-Doppler symbol vectors (uniform prior, so the noise level does not
/// enter). Returns the decided symbols.
pub fn brute_force_map(
    geom: FrameGeometry,
    obs: MapObservation<'_>,
    constellation: &Constellation,
) -> Result<Vec<Complex64>> {
    let len = geom.len();
    let hypotheses = (constellation.len() as f64).powi(len as i32);
    if hypotheses > MAP_HYPOTHESIS_LIMIT as f64 {
        return Err(Error::SearchSpaceTooLarge { hypotheses, limit: MAP_HYPOTHESIS_LIMIT });
    }
    let (g, target) = match obs {
        MapObservation::Time { h_t, r } => {
            check_len(len, r.len())?;
            (h_t * dense_transform_matrix(geom, true), r)
        }
        MapObservation::DelayDoppler { h_dd, y } => {
            check_len(len, y.len())?;
            (h_dd.clone(), y)
        }
    };
    check_len(len, g.nrows())?;
    check_len(len, g.ncols())?;

    let points = constellation.points();
    let q = points.len();
    let mut digits = vec![0usize; len];
    let x0 = DVector::from_element(len, points[0]);
    let mut resid = DVector::from_column_slice(target) - &g * x0;
    let mut best = (resid.norm_squared(), digits.clone());

    // Odometer walk; each step changes few digits and updates the residual
    // incrementally.
    loop {
        let mut pos = 0;
        while pos < len {
            let old = points[digits[pos]];
            digits[pos] = (digits[pos] + 1) % q;
            let delta = points[digits[pos]] - old;
            resid.axpy(-delta, &g.column(pos), Complex64::new(1.0, 0.0));
            if digits[pos] != 0 {
                break;
            }
            pos += 1;
        }
        if pos == len {
            break;
        }
        let metric = resid.norm_squared();
        if metric < best.0 {
            best = (metric, digits.clone());
        }
    }
    Ok(best.1.into_iter().map(|j| points[j]).collect())
}
