//! Asymptotic inference: Fisher information, plug-in covariance of the
//! constrained MLE, Wald confidence intervals, and rank-agreement statistics.
//!
//! The information matrix of the model is singular along the two gauge
//! directions (a global score shift and the joint score/discrimination
//! rescaling). The estimator is pinned down by the linear constraints
//! `sum(s) = 0`, `sum(alpha) = 0`, so the covariance is obtained by
//! restricting the information to the constraint plane and pseudo-inverting
//! there: exactly the two constraint-normal directions fall below the
//! eigenvalue cutoff.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::model::{sigmoid, Design, Params};

/// Relative eigenvalue cutoff for the pseudo-inverse.
const PINV_CUTOFF: f64 = 1e-10;

/// Relative threshold below which a non-gauge eigenvalue signals an
/// unidentifiable configuration.
const RANK_TOL: f64 = 1e-8;

/// Plug-in asymptotic covariance of the normalized estimator.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    /// Symmetric PSD matrix over the estimator's coordinates
    /// (`(s, alpha)` for the weighted model, `s` only for the baseline).
    pub matrix: DMatrix<f64>,
    /// Rank of the matrix (dimension minus the number of constraints).
    pub rank: usize,
    /// Design the information was evaluated under.
    pub design: Design,
}

/// Two-sided Wald confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub se: f64,
}

/// Per-observation Fisher information of the judge-aware model in
/// `(s, alpha)` coordinates: `sum over triples of pi * p(1-p) * g g^T` with
/// `g[s_i] = gamma_k`, `g[s_j] = -gamma_k`, `g[alpha_k] = z_ijk`.
pub fn fisher_information(params: &Params, design: &Design) -> Result<DMatrix<f64>> {
    let n = params.n_candidates();
    let k_total = params.n_judges();
    let dim = n + k_total;
    let gamma = params.gamma();
    let probs = design.triple_probs();
    if probs.iter().all(|&(_, _, _, pi)| pi == 0.0) {
        return Err(Error::DegenerateDesign);
    }
    let mut info = DMatrix::zeros(dim, dim);
    for (i, j, k, pi) in probs {
        let g = gamma[k];
        let z = g * (params.s[i] - params.s[j]);
        let p = sigmoid(z);
        let w = pi * p * (1.0 - p);
        let ak = n + k;
        info[(i, i)] += w * g * g;
        info[(j, j)] += w * g * g;
        info[(i, j)] -= w * g * g;
        info[(j, i)] -= w * g * g;
        info[(i, ak)] += w * g * z;
        info[(ak, i)] += w * g * z;
        info[(j, ak)] -= w * g * z;
        info[(ak, j)] -= w * g * z;
        info[(ak, ak)] += w * z * z;
    }
    Ok(info)
}

/// Score-only Fisher information of the unweighted BTL baseline
/// (`gamma_k` identically 1); judge probabilities pool over `k`.
pub fn fisher_information_scores(params: &Params, design: &Design) -> Result<DMatrix<f64>> {
    let n = params.n_candidates();
    let probs = design.triple_probs();
    if probs.iter().all(|&(_, _, _, pi)| pi == 0.0) {
        return Err(Error::DegenerateDesign);
    }
    let mut info = DMatrix::zeros(n, n);
    for (i, j, _k, pi) in probs {
        let z = params.s[i] - params.s[j];
        let p = sigmoid(z);
        let w = pi * p * (1.0 - p);
        info[(i, i)] += w;
        info[(j, j)] += w;
        info[(i, j)] -= w;
        info[(j, i)] -= w;
    }
    Ok(info)
}

/// Orthogonal projector onto the plane orthogonal to the given unit-normal
/// block directions.
fn constraint_projector(dim: usize, blocks: &[(usize, usize)]) -> DMatrix<f64> {
    let mut p = DMatrix::identity(dim, dim);
    for &(start, len) in blocks {
        let mut v = DVector::zeros(dim);
        for d in start..start + len {
            v[d] = 1.0 / (len as f64).sqrt();
        }
        p -= &v * v.transpose();
    }
    p
}

/// Pseudo-invert a symmetric PSD matrix, zeroing eigenvalues below
/// `PINV_CUTOFF * lambda_max` and checking that exactly `n_null` directions
/// fall below the identifiability threshold.
fn pinv_checked(mat: &DMatrix<f64>, n_null: usize) -> Result<DMatrix<f64>> {
    let dim = mat.nrows();
    let eigen = mat.clone().symmetric_eigen();
    let lambda_max = eigen.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let mut sorted: Vec<f64> = eigen.eigenvalues.iter().cloned().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // The (n_null + 1)-th smallest eigenvalue must be solidly positive.
    if sorted[n_null] <= RANK_TOL * lambda_max {
        return Err(Error::RankDeficient {
            expected: dim - n_null,
            eigenvalue: sorted[n_null],
            cutoff: RANK_TOL * lambda_max,
        });
    }
    let cutoff = PINV_CUTOFF * lambda_max;
    let mut out = DMatrix::zeros(dim, dim);
    for (idx, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let u = eigen.eigenvectors.column(idx);
            out += u * u.transpose() / lambda;
        }
    }
    // Symmetrize against accumulation round-off.
    Ok((&out + out.transpose()) * 0.5)
}

/// Plug-in covariance of the constrained judge-aware MLE.
///
/// Restricts the information to the constraint plane
/// `{sum(ds) = 0, sum(dalpha) = 0}` and pseudo-inverts there. The result
/// annihilates both constraint normals and has rank `N + K - 2`.
pub fn covariance(params: &Params, design: &Design) -> Result<CovarianceEstimate> {
    let n = params.n_candidates();
    let k = params.n_judges();
    let info = fisher_information(params, design)?;
    let proj = constraint_projector(n + k, &[(0, n), (n, k)]);
    let restricted = &proj * &info * &proj;
    let matrix = pinv_checked(&restricted, 2)?;
    Ok(CovarianceEstimate {
        matrix,
        rank: n + k - 2,
        design: design.clone(),
    })
}

/// Plug-in covariance of the unweighted baseline over the scores only
/// (single constraint `sum(ds) = 0`).
pub fn covariance_unweighted(params: &Params, design: &Design) -> Result<CovarianceEstimate> {
    let n = params.n_candidates();
    let info = fisher_information_scores(params, design)?;
    let proj = constraint_projector(n, &[(0, n)]);
    let restricted = &proj * &info * &proj;
    let matrix = pinv_checked(&restricted, 1)?;
    Ok(CovarianceEstimate {
        matrix,
        rank: n - 1,
        design: design.clone(),
    })
}

/// Standard normal quantile, Wichura's AS 241 (PPND16), absolute error
/// below 1e-9 over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// Published coefficients, kept verbatim even where they exceed f64
// precision.
#[allow(clippy::excessive_precision)]
const A: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
#[allow(clippy::excessive_precision)]
const B: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
#[allow(clippy::excessive_precision)]
const C: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
#[allow(clippy::excessive_precision)]
const D: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
#[allow(clippy::excessive_precision)]
const E: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
#[allow(clippy::excessive_precision)]
const F: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

fn check_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    Ok(normal_quantile(0.5 + level / 2.0))
}

fn interval(estimate: f64, var_per_obs: f64, t: u64, level: f64) -> Result<ConfidenceInterval> {
    let z = check_level(level)?;
    let se = (var_per_obs.max(0.0) / t as f64).sqrt();
    Ok(ConfidenceInterval {
        estimate,
        lower: estimate - z * se,
        upper: estimate + z * se,
        level,
        se,
    })
}

/// Wald interval for one component of the estimator.
///
/// `index` addresses the covariance coordinates: `(s, alpha)` for the
/// weighted model, `s` only for the baseline.
pub fn wald_ci_component(
    fit: &FitResult,
    cov: &CovarianceEstimate,
    t: u64,
    index: usize,
    level: f64,
) -> Result<ConfidenceInterval> {
    let dim = cov.matrix.nrows();
    if index >= dim {
        return Err(Error::IndexOutOfBounds {
            what: "covariance",
            index,
            size: dim,
        });
    }
    let flat = fit.params.to_flat();
    interval(flat[index], cov.matrix[(index, index)], t, level)
}

/// Wald interval for a linear functional `c^T theta`.
///
/// Warns when `c` has a component along a gauge/constraint-normal direction,
/// where the covariance carries no information.
pub fn wald_ci_linear(
    fit: &FitResult,
    cov: &CovarianceEstimate,
    t: u64,
    c: &[f64],
    level: f64,
) -> Result<ConfidenceInterval> {
    let dim = cov.matrix.nrows();
    if c.len() != dim {
        return Err(Error::LengthMismatch(c.len(), dim));
    }
    let n = fit.params.n_candidates();
    let norm_c = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_c > 0.0 {
        let shift: f64 = c[..n.min(dim)].iter().sum();
        let scale: f64 = c[n.min(dim)..].iter().sum();
        if shift.abs() / norm_c > 1e-8 || scale.abs() / norm_c > 1e-8 {
            log::warn!(
                "linear functional has a gauge-direction component \
                 (shift {shift:.3e}, scale {scale:.3e}); its variance is not identified"
            );
        }
    }
    let flat = fit.params.to_flat();
    let estimate: f64 = c.iter().zip(flat.iter()).map(|(a, b)| a * b).sum();
    let cv = DVector::from_column_slice(c);
    let var = (cv.transpose() * &cov.matrix * &cv)[(0, 0)];
    interval(estimate, var, t, level)
}

/// Agreement statistics between two score vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankAgreement {
    pub spearman: f64,
    pub pearson: f64,
    pub kendall: f64,
}

/// Average ranks (1-based), ties receiving the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos;
        while end + 1 < n && x[order[end + 1]] == x[order[pos]] {
            end += 1;
        }
        let avg = (pos + end) as f64 / 2.0 + 1.0;
        for &idx in &order[pos..=end] {
            ranks[idx] = avg;
        }
        pos = end + 1;
    }
    ranks
}

/// Pearson correlation between two vectors of equal length >= 2.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::LengthMismatch(x.len(), 2));
    }
    pearson_raw(x, y)
}

fn pearson_raw(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantVector);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman (average ranks), Pearson, and Kendall tau-b between two score
/// vectors of equal length >= 2.
pub fn rank_agreement(x: &[f64], y: &[f64]) -> Result<RankAgreement> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::LengthMismatch(x.len(), 2));
    }
    let pearson = pearson_raw(x, y)?;
    let spearman = pearson_raw(&average_ranks(x), &average_ranks(y))?;

    // Kendall tau-b with tie corrections; O(n^2) is fine at leaderboard sizes.
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for a in 0..n {
        for b in (a + 1)..n {
            let dx = x[a] - x[b];
            let dy = y[a] - y[b];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - ties_x as f64) * (n0 - ties_y as f64)).sqrt();
    let kendall = if denom == 0.0 {
        return Err(Error::ConstantVector);
    } else {
        (concordant - discordant) as f64 / denom
    };
    Ok(RankAgreement {
        spearman,
        pearson,
        kendall,
    })
}

/// Write a CI table as CSV `name,estimate,lower,upper,se,level`.
pub fn write_ci_table<W: std::io::Write>(
    mut sink: W,
    rows: &[(String, ConfidenceInterval)],
) -> Result<()> {
    writeln!(sink, "name,estimate,lower,upper,se,level")?;
    for (name, ci) in rows {
        writeln!(
            sink,
            "{},{},{},{},{},{}",
            name, ci.estimate, ci.lower, ci.upper, ci.se, ci.level
        )?;
    }
    Ok(())
}
