use num_complex::Complex64;

use super::{GaussianMessage, VAR_FLOOR};
use crate::modem::Constellation;

/// Symbol-wise Gaussian demapper on the delay-Doppler grid.
///
/// Treats each prior entry as an observation `m_n = x_n + CN(0, v_n)` with
/// a uniform prior on the alphabet: weights `w(a) ∝ exp(-|m_n - a|²/v_n)`,
/// posterior mean `Σ a w(a)`, variance `Σ |a|² w(a) - |mean|²`.
pub fn dd_demap(prior: &GaussianMessage, constellation: &Constellation) -> GaussianMessage {
    dd_demap_hard(prior, constellation).0
}

/// [`dd_demap`] plus the index of the maximum-weight point per symbol.
pub fn dd_demap_hard(prior: &GaussianMessage, constellation: &Constellation) -> (GaussianMessage, Vec<usize>) {
    let points = constellation.points();
    let mut logw = vec![0.0; points.len()];
    let mut mean = Vec::with_capacity(prior.len());
    let mut var = Vec::with_capacity(prior.len());
    let mut hard = Vec::with_capacity(prior.len());
    for (&m, &v) in prior.mean.iter().zip(&prior.var) {
        let (mu, sigma2, best) = demap_symbol(m, v, points, &mut logw);
        let best = best.unwrap_or_else(|| constellation.nearest(m));
        match (mu, sigma2) {
            (Some(mu), Some(s2)) => {
                mean.push(mu);
                var.push(s2.max(VAR_FLOOR));
            }
            _ => {
                mean.push(points[best]);
                var.push(VAR_FLOOR);
            }
        }
        hard.push(best);
    }
    (GaussianMessage { mean, var }, hard)
}

fn demap_symbol(
    m: Complex64,
    v: f64,
    points: &[Complex64],
    logw: &mut [f64],
) -> (Option<Complex64>, Option<f64>, Option<usize>) {
    if !(v > 0.0) || !v.is_finite() || !m.re.is_finite() || !m.im.is_finite() {
        return (None, None, None);
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (j, a) in points.iter().enumerate() {
        logw[j] = -(m - a).norm_sqr() / v;
        if logw[j] > best.1 {
            best = (j, logw[j]);
        }
    }
    let mut total = 0.0;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut energy = 0.0;
    for (j, a) in points.iter().enumerate() {
        let w = (logw[j] - best.1).exp();
        total += w;
        acc += a * w;
        energy += a.norm_sqr() * w;
    }
    if !(total > 0.0) || !total.is_finite() {
        return (None, None, Some(best.0));
    }
    let mu = acc / total;
    (Some(mu), Some(energy / total - mu.norm_sqr()), Some(best.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(m: Complex64, v: f64) -> GaussianMessage {
        GaussianMessage::new(vec![m], vec![v]).unwrap()
    }

    #[test]
    fn confident_prior_pins_symbol() {
        let c = Constellation::qpsk();
        let p = c.points()[0];
        let post = dd_demap(&one(p, 1e-6), &c);
        assert!((post.mean[0] - p).norm() < 1e-12);
        assert_eq!(post.var[0], VAR_FLOOR);
    }

    #[test]
    fn vague_prior_gives_alphabet_moments() {
        let c = Constellation::qpsk();
        let post = dd_demap(&one(Complex64::new(0.0, 0.0), 1e12), &c);
        assert!(post.mean[0].norm() < 1e-9);
        assert!((post.var[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matches_explicit_enumeration() {
        let c = Constellation::qpsk();
        let (m, v) = (Complex64::new(0.3, 0.0), 0.5);
        let h = 1.0 / 2f64.sqrt();
        let pts = [(h, h), (h, -h), (-h, h), (-h, -h)].map(|(a, b)| Complex64::new(a, b));
        let w: Vec<f64> = pts.iter().map(|a| (-(m - a).norm_sqr() / v).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean = pts.iter().zip(&w).map(|(a, w)| a * *w).sum::<Complex64>() / z;
        let var = pts.iter().zip(&w).map(|(a, w)| a.norm_sqr() * w).sum::<f64>() / z - mean.norm_sqr();
        let post = dd_demap(&one(m, v), &c);
        assert!((post.mean[0] - mean).norm() < 1e-12);
        assert!((post.var[0] - var).abs() < 1e-12);
    }

    #[test]
    fn degenerate_prior_falls_back_to_nearest() {
        let c = Constellation::qpsk();
        let (post, hard) = dd_demap_hard(&one(Complex64::new(-0.9, 0.2), 0.0), &c);
        assert_eq!(post.mean[0], c.points()[hard[0]]);
        assert_eq!(c.label(hard[0]), 0b10);
        assert_eq!(post.var[0], VAR_FLOOR);
    }

    #[test]
    fn posterior_variance_bounded_for_qpsk() {
        let c = Constellation::qpsk();
        for k in 0..200 {
            let t = k as f64 * 0.37;
            let m = Complex64::new(3.0 * t.sin(), 2.0 * (1.3 * t).cos());
            let v = 10f64.powf(-3.0 + 5.0 * (k as f64 / 200.0));
            let post = dd_demap(&one(m, v), &c);
            assert!(post.var[0] >= 0.0 && post.var[0] <= 1.0 + 1e-12);
        }
    }
}
