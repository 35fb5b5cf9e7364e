//! State (MSE) evolution of the cross-domain detector and its interference
//! bounds.
//!
//! The evolution tracks four scalars per iteration: the a priori and a
//! posteriori average variances of the time-domain estimator (`v_aT`,
//! `v_pT`) and of the delay-Doppler demapper (`v_aDD`, `v_pDD`). The
//! time-domain step evaluates the block LMMSE trace formula on the actual
//! channel; the demapper step integrates the symbol-wise posterior variance
//! over a scalar Gaussian surrogate channel.
//!
//! The two bounds change only the covariance of the residual inter-block
//! interference: at full symbol energy for TIN (SIC removes nothing) and zero
//! for the genie (SIC removes everything).

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::channel::BlockChannel;
use crate::detector::{accumulate_covariance, dd_demap, factor_hermitian, GaussianMessage, VAR_CEIL, VAR_FLOOR};
use crate::error::{Error, Result};
use crate::modem::Constellation;

/// Gauss–Hermite order per dimension for [`se_demapper`].
pub const DEFAULT_QUAD_POINTS: usize = 32;
/// Half-width, in units of the Gaussian exponent variable, of the composite
/// rule. The neglected tail mass is below `e^{-49}`.
const COMPOSITE_HALF_WIDTH: f64 = 7.0;

/// Integration rule for the demapper MSE function.
///
/// Gauss–Hermite is exact for polynomial integrands but mis-resolves the
/// narrow posterior-variance peaks at the decision boundaries once `v_aDD`
/// is small, and its error there is not monotone in `v_aDD`. The composite
/// Gauss–Legendre rule places nodes uniformly over the bulk of the Gaussian
/// and resolves those peaks, so it is the default for state evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemapperRule {
    /// `points²` tensor Gauss–Hermite nodes.
    GaussHermite { points: usize },
    /// `panels` Gauss–Legendre panels of `order` nodes per dimension.
    CompositeLegendre { panels: usize, order: usize },
}

impl Default for DemapperRule {
    fn default() -> Self {
        DemapperRule::CompositeLegendre { panels: 40, order: 8 }
    }
}

impl DemapperRule {
    /// Nodes and weights for `∫ e^{-t²} f(t) dt`.
    fn nodes(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DemapperRule::GaussHermite { points } => gauss_hermite(points.max(1)),
            DemapperRule::CompositeLegendre { panels, order } => {
                let (x, w) = gauss_legendre(order.max(1));
                let panels = panels.max(1);
                let h = 2.0 * COMPOSITE_HALF_WIDTH / panels as f64;
                let mut nodes = Vec::with_capacity(panels * x.len());
                let mut weights = Vec::with_capacity(nodes.capacity());
                for p in 0..panels {
                    let left = -COMPOSITE_HALF_WIDTH + p as f64 * h;
                    for (xk, wk) in x.iter().zip(&w) {
                        let t = left + 0.5 * h * (xk + 1.0);
                        nodes.push(t);
                        weights.push(0.5 * h * wk * (-t * t).exp());
                    }
                }
                (nodes, weights)
            }
        }
    }
}

/// Which interference covariance the time-domain step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `v_aT H_B H_B^H`: residual interference after SIC at the current
    /// prior variance.
    Exact,
    /// `H_B H_B^H`: interference treated as full-power noise.
    Tin,
    /// No residual interference.
    Genie,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Exact, Variant::Tin, Variant::Genie];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Exact => "exact",
            Variant::Tin => "tin",
            Variant::Genie => "genie",
        }
    }

    fn interference_weight(self, v_at: f64) -> f64 {
        match self {
            Variant::Exact => v_at,
            Variant::Tin => 1.0,
            Variant::Genie => 0.0,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// States of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRecord {
    pub iter: usize,
    pub v_at: f64,
    pub v_pt: f64,
    pub v_add: f64,
    pub v_pdd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub variant: Variant,
    pub records: Vec<StateRecord>,
}

impl StateTrajectory {
    /// `v_pT` per iteration.
    pub fn posterior_time(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.v_pt).collect()
    }
}

/// Average time-domain posterior variance for a common prior variance
/// `v_at`:
///
/// `v_pT = v_aT - v_aT²/(MN) Σ_i Tr{A_i^H (v_aT A_i A_i^H + T_i + N0 I)^{-1} A_i}`
pub fn se_posterior_time(v_at: f64, blocks: &BlockChannel, n0: f64, variant: Variant) -> Result<f64> {
    if !(v_at > 0.0 && v_at <= 1.0) {
        return Err(Error::Domain(format!("prior variance {v_at} outside (0, 1]")));
    }
    if !(n0 > 0.0) {
        return Err(Error::Domain(format!("N0 must be positive, got {n0}")));
    }
    let w_int = variant.interference_weight(v_at);
    let mut trace = 0.0;
    for w in blocks.windows() {
        let rows = w.rows.len();
        let mut sigma = DMatrix::from_diagonal_element(rows, rows, Complex64::new(n0, 0.0));
        accumulate_covariance(&mut sigma, &w.own_columns, |_| v_at);
        accumulate_covariance(&mut sigma, &w.interference, |_| w_int);
        let chol = factor_hermitian(sigma, w.block)?;
        let z = chol
            .l_dirty()
            .solve_lower_triangular(&w.own)
            .ok_or(Error::NotPositiveDefinite { block: w.block })?;
        trace += z.norm_squared();
    }
    let mn = blocks.geometry().len() as f64;
    Ok((v_at - v_at * v_at * trace / mn).max(VAR_FLOOR))
}

/// Gauss–Hermite nodes and weights for `∫ e^{-t²} f(t) dt` (Golub–Welsch).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Average posterior variance of [`dd_demap`] when the prior mean is
/// `x + CN(0, v_add)` with `x` uniform on the alphabet, by 2-D Gauss–Hermite
/// quadrature with `quad_points²` nodes per constellation point.
pub fn se_demapper(v_add: f64, constellation: &Constellation, quad_points: usize) -> f64 {
    se_demapper_with(v_add, constellation, DemapperRule::GaussHermite { points: quad_points })
}

/// [`se_demapper`] under an explicit integration rule.
pub fn se_demapper_with(v_add: f64, constellation: &Constellation, rule: DemapperRule) -> f64 {
    if !(v_add > 0.0) {
        return 0.0;
    }
    let (nodes, weights) = rule.nodes();
    let scale = v_add.sqrt();
    let points = constellation.points();
    let mut means = Vec::with_capacity(points.len() * nodes.len() * nodes.len());
    let mut coef = Vec::with_capacity(means.capacity());
    for &x in points {
        for (a, wa) in nodes.iter().zip(&weights) {
            for (b, wb) in nodes.iter().zip(&weights) {
                means.push(x + Complex64::new(a * scale, b * scale));
                coef.push(wa * wb);
            }
        }
    }
    let len = means.len();
    let prior = GaussianMessage { mean: means, var: vec![v_add; len] };
    let post = dd_demap(&prior, constellation);
    let total: f64 = post.var.iter().zip(&coef).map(|(v, c)| v * c).sum();
    total / (std::f64::consts::PI * points.len() as f64)
}

fn scalar_extrinsic(post: f64, prior: f64) -> f64 {
    if !(post < prior) || !(post > 0.0) {
        return VAR_CEIL;
    }
    (1.0 / (1.0 / post - 1.0 / prior)).clamp(VAR_FLOOR, VAR_CEIL)
}

/// Iterate the evolution `iters` times from `v_aT(1) = 1`.
pub fn run_state_evolution(
    blocks: &BlockChannel,
    n0: f64,
    constellation: &Constellation,
    iters: usize,
    variant: Variant,
) -> Result<StateTrajectory> {
    run_state_evolution_with(blocks, n0, constellation, iters, variant, DemapperRule::default())
}

pub fn run_state_evolution_with(
    blocks: &BlockChannel,
    n0: f64,
    constellation: &Constellation,
    iters: usize,
    variant: Variant,
    rule: DemapperRule,
) -> Result<StateTrajectory> {
    if iters == 0 {
        return Err(Error::Config("state evolution needs at least one iteration".into()));
    }
    let mut records: Vec<StateRecord> = Vec::with_capacity(iters);
    let mut v_at = VAR_CEIL;
    for iter in 1..=iters {
        if let [.., prev, last] = records.as_slice() {
            if (last.v_at - prev.v_at).abs() < 1e-12 {
                records.push(StateRecord { iter, ..*last });
                continue;
            }
        }
        let v_pt = se_posterior_time(v_at, blocks, n0, variant)
            .map_err(|e| Error::Iteration { iteration: iter, source: Box::new(e) })?;
        let v_add = scalar_extrinsic(v_pt, v_at);
        let v_pdd = se_demapper_with(v_add, constellation, rule).max(VAR_FLOOR);
        records.push(StateRecord { iter, v_at, v_pt, v_add, v_pdd });
        v_at = scalar_extrinsic(v_pdd, v_add);
    }
    Ok(StateTrajectory { variant, records })
}

/// CSV with header `variant,iter,v_aT,v_pT,v_aDD,v_pDD`.
pub fn trajectories_csv(trajectories: &[StateTrajectory]) -> String {
    let mut out = String::from("variant,iter,v_aT,v_pT,v_aDD,v_pDD\n");
    for t in trajectories {
        for r in &t.records {
            out.push_str(&format!("{},{},{},{},{},{}\n", t.variant, r.iter, r.v_at, r.v_pt, r.v_add, r.v_pdd));
        }
    }
    out
}
