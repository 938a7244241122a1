//! The judge-aware comparison model.
//!
//! Judge `k` prefers candidate `i` over `j` with probability
//! `sigma(gamma_k * (s_i - s_j))`, where `s` are latent quality scores and
//! `gamma_k > 0` is the judge's discrimination. Internally judges are
//! parameterized by `alpha_k = log(gamma_k)`, which makes positivity
//! automatic and the identifiability constraints linear:
//! `sum(s) = 0` and `sum(alpha) = 0`.

use serde::{Deserialize, Serialize};

use crate::data::TripleStats;
use crate::error::{Error, Result};

/// Tolerance on the normalization constraints after projection.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Clamp on `|z|` inside exponentials during gradient evaluation.
const GRAD_Z_CLAMP: f64 = 50.0;

/// Normalized model parameters: scores `s` (sum 0) and log-discriminations
/// `alpha` (sum 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub s: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Params {
    pub fn zeros(n_candidates: usize, n_judges: usize) -> Self {
        Params {
            s: vec![0.0; n_candidates],
            alpha: vec![0.0; n_judges],
        }
    }

    pub fn n_candidates(&self) -> usize {
        self.s.len()
    }

    pub fn n_judges(&self) -> usize {
        self.alpha.len()
    }

    /// Discriminations `gamma_k = exp(alpha_k)`.
    pub fn gamma(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a.exp()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.s
            .iter()
            .chain(self.alpha.iter())
            .all(|v| v.is_finite())
    }

    /// Flat view `(s_0..s_{N-1}, alpha_0..alpha_{K-1})`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.s.clone();
        flat.extend_from_slice(&self.alpha);
        flat
    }

    pub fn from_flat(flat: &[f64], n_candidates: usize) -> Self {
        Params {
            s: flat[..n_candidates].to_vec(),
            alpha: flat[n_candidates..].to_vec(),
        }
    }

    /// Max-norm violation of the normalization constraints.
    pub fn constraint_violation(&self) -> f64 {
        let sum_s: f64 = self.s.iter().sum();
        let sum_a: f64 = self.alpha.iter().sum();
        sum_s.abs().max(sum_a.abs())
    }
}

/// JSON form of [`Params`]: `gamma` is emitted for convenience; on read,
/// `alpha` wins when both are present.
#[derive(Serialize, Deserialize)]
struct ParamsJson {
    s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<Vec<f64>>,
}

impl Serialize for Params {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        ParamsJson {
            s: self.s.clone(),
            alpha: Some(self.alpha.clone()),
            gamma: Some(self.gamma()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Params {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = ParamsJson::deserialize(deserializer)?;
        let alpha = match (raw.alpha, raw.gamma) {
            (Some(alpha), _) => alpha,
            (None, Some(gamma)) => {
                if gamma.iter().any(|&g| g <= 0.0) {
                    return Err(serde::de::Error::custom("gamma entries must be positive"));
                }
                gamma.iter().map(|g| g.ln()).collect()
            }
            (None, None) => return Err(serde::de::Error::custom("missing alpha/gamma")),
        };
        Ok(Params { s: raw.s, alpha })
    }
}

/// Triple-sampling design: the probability `pi_ijk` that one observation
/// lands on pair `(i, j)` judged by `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Design {
    /// `pi_ijk = 2 / (K * N * (N - 1))` over every pair and judge.
    Uniform {
        n_candidates: usize,
        n_judges: usize,
    },
    /// `pi_ijk = n_ijk / T` over the observed triples.
    Empirical {
        triples: Vec<TripleStats>,
        total: u64,
    },
}

impl Design {
    pub fn empirical(triples: &[TripleStats]) -> Self {
        let total = triples.iter().map(|t| t.n).sum();
        Design::Empirical {
            triples: triples.to_vec(),
            total,
        }
    }

    /// Iterate `(i, j, k, pi_ijk)` over the supported triples.
    pub fn triple_probs(&self) -> Vec<(usize, usize, usize, f64)> {
        match self {
            Design::Uniform {
                n_candidates,
                n_judges,
            } => {
                let n = *n_candidates;
                let k_total = *n_judges;
                let pi = 2.0 / (k_total as f64 * n as f64 * (n as f64 - 1.0));
                let mut out = Vec::with_capacity(k_total * n * (n - 1) / 2);
                for i in 0..n {
                    for j in (i + 1)..n {
                        for k in 0..k_total {
                            out.push((i, j, k, pi));
                        }
                    }
                }
                out
            }
            Design::Empirical { triples, total } => triples
                .iter()
                .map(|t| (t.i, t.j, t.k, t.n as f64 / *total as f64))
                .collect(),
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(sigma(z))` via the softplus of the appropriate sign.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Probability that judge `k` prefers candidate `i` over `j`.
pub fn predict_prob(params: &Params, i: usize, j: usize, k: usize) -> Result<f64> {
    let n = params.n_candidates();
    if i >= n || j >= n {
        return Err(Error::IndexOutOfBounds {
            what: "candidates",
            index: i.max(j),
            size: n,
        });
    }
    if k >= params.n_judges() {
        return Err(Error::IndexOutOfBounds {
            what: "judges",
            index: k,
            size: params.n_judges(),
        });
    }
    let z = params.alpha[k].exp() * (params.s[i] - params.s[j]);
    Ok(sigmoid(z))
}

/// Aggregated log-likelihood over the observed triples.
///
/// The sampling-design constant is omitted: it does not depend on the
/// parameters.
pub fn log_likelihood(params: &Params, triples: &[TripleStats]) -> Result<f64> {
    if !params.is_finite() {
        return Err(Error::NonFinite);
    }
    let gamma = params.gamma();
    let mut total = 0.0;
    for t in triples {
        let z = gamma[t.k] * (params.s[t.i] - params.s[t.j]);
        total += t.n as f64 * (t.y_bar * log_sigmoid(z) + (1.0 - t.y_bar) * log_sigmoid(-z));
    }
    Ok(total)
}

/// Unconstrained gradient of [`log_likelihood`] in `(s, alpha)` coordinates.
///
/// Per triple, with residual `r = n * (y_bar - sigma(z))`:
/// `d/ds_i += gamma_k * r`, `d/ds_j -= gamma_k * r`, `d/dalpha_k += z * r`.
pub fn grad_log_likelihood(params: &Params, triples: &[TripleStats]) -> Result<Vec<f64>> {
    if !params.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = params.n_candidates();
    let gamma = params.gamma();
    let mut grad = vec![0.0; n + params.n_judges()];
    for t in triples {
        let z = gamma[t.k] * (params.s[t.i] - params.s[t.j]);
        let p = sigmoid(z.clamp(-GRAD_Z_CLAMP, GRAD_Z_CLAMP));
        let r = t.n as f64 * (t.y_bar - p);
        grad[t.i] += gamma[t.k] * r;
        grad[t.j] -= gamma[t.k] * r;
        grad[n + t.k] += z * r;
    }
    Ok(grad)
}

/// Largest `|z_ijk|` over the triples; used for separation detection.
pub fn max_abs_z(params: &Params, triples: &[TripleStats]) -> f64 {
    let gamma = params.gamma();
    triples
        .iter()
        .map(|t| (gamma[t.k] * (params.s[t.i] - params.s[t.j])).abs())
        .fold(0.0, f64::max)
}

/// Euclidean projection onto the constraint set `{sum(s) = 0, sum(alpha) = 0}`:
/// subtracts the mean of each block.
pub fn project_to_constraints(params: &Params) -> Params {
    let mut out = params.clone();
    center(&mut out.s);
    center(&mut out.alpha);
    out
}

pub(crate) fn center(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Apply the identifiability transform `s ~> a*s + b*1`, `gamma ~> gamma / a`.
///
/// Returns the raw `(s, gamma)` pair, which induces identical comparison
/// probabilities. Requires `a > 0` to keep the positive-gamma convention.
pub fn gauge_transform(params: &Params, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if a == 0.0 {
        return Err(Error::ZeroGaugeScale);
    }
    let s = params.s.iter().map(|&si| a * si + b).collect();
    let gamma = params.gamma().iter().map(|&g| g / a).collect();
    Ok((s, gamma))
}

/// Rebuild normalized [`Params`] from a raw `(s, gamma)` pair.
pub fn normalize_raw(s: &[f64], gamma: &[f64]) -> Result<Params> {
    if gamma.iter().any(|&g| g <= 0.0) {
        return Err(Error::InvalidRecord(
            "gamma entries must be positive".into(),
        ));
    }
    let params = Params {
        s: s.to_vec(),
        alpha: gamma.iter().map(|g| g.ln()).collect(),
    };
    Ok(project_to_constraints(&params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triple(i: usize, j: usize, k: usize, n: u64, y_bar: f64) -> TripleStats {
        TripleStats { i, j, k, n, y_bar }
    }

    #[test]
    fn predict_prob_equal_scores() {
        let params = Params {
            s: vec![0.3, 0.3, -0.6],
            alpha: vec![1.5],
        };
        assert_abs_diff_eq!(predict_prob(&params, 0, 1, 0).unwrap(), 0.5);
    }

    #[test]
    fn predict_prob_recovers_btl() {
        let params = Params {
            s: vec![0.5, -0.5],
            alpha: vec![0.0],
        };
        assert_abs_diff_eq!(
            predict_prob(&params, 0, 1, 0).unwrap(),
            sigmoid(1.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn predict_prob_worked_example() {
        // gamma = 2, s_i - s_j = 1 -> sigma(2)
        let params = Params {
            s: vec![0.5, -0.5],
            alpha: vec![2.0f64.ln()],
        };
        assert_abs_diff_eq!(
            predict_prob(&params, 0, 1, 0).unwrap(),
            0.8807970779778823,
            epsilon = 1e-9
        );
    }

    #[test]
    fn predict_prob_no_overflow_for_huge_z() {
        let params = Params {
            s: vec![5e3, -5e3],
            alpha: vec![0.0],
        };
        let p = predict_prob(&params, 0, 1, 0).unwrap();
        assert!(p > 0.0 && p <= 1.0 && p.is_finite());
        let q = predict_prob(&params, 1, 0, 0).unwrap();
        assert!(q >= 0.0 && q.is_finite());
    }

    #[test]
    fn predict_prob_out_of_bounds() {
        let params = Params::zeros(2, 1);
        assert!(predict_prob(&params, 0, 2, 0).is_err());
        assert!(predict_prob(&params, 0, 1, 1).is_err());
    }

    #[test]
    fn loglik_single_even_triple() {
        let params = Params::zeros(2, 1);
        let ll = log_likelihood(&params, &[triple(0, 1, 0, 1, 1.0)]).unwrap();
        assert_abs_diff_eq!(ll, 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn loglik_worked_example() {
        let params = Params {
            s: vec![0.5, -0.5],
            alpha: vec![0.0],
        };
        let ll = log_likelihood(&params, &[triple(0, 1, 0, 4, 0.75)]).unwrap();
        let p = sigmoid(1.0);
        let expected = 4.0 * (0.75 * p.ln() + 0.25 * (1.0 - p).ln());
        assert_abs_diff_eq!(ll, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(ll, -2.2530468, epsilon = 1e-6);
    }

    #[test]
    fn loglik_empty_is_zero() {
        let params = Params::zeros(3, 2);
        assert_eq!(log_likelihood(&params, &[]).unwrap(), 0.0);
    }

    #[test]
    fn loglik_rejects_non_finite() {
        let params = Params {
            s: vec![f64::NAN, 0.0],
            alpha: vec![0.0],
        };
        assert!(log_likelihood(&params, &[]).is_err());
    }

    #[test]
    fn grad_zero_at_balanced_triple() {
        let params = Params::zeros(2, 1);
        let g = grad_log_likelihood(&params, &[triple(0, 1, 0, 3, 0.5)]).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn grad_worked_example() {
        let params = Params::zeros(2, 1);
        let g = grad_log_likelihood(&params, &[triple(0, 1, 0, 1, 1.0)]).unwrap();
        assert_abs_diff_eq!(g[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let params = Params {
            s: vec![0.8, -0.3, -0.5],
            alpha: vec![0.4, -0.4],
        };
        let triples = vec![
            triple(0, 1, 0, 5, 0.8),
            triple(0, 2, 1, 3, 1.0 / 3.0),
            triple(1, 2, 0, 7, 0.5),
        ];
        let g = grad_log_likelihood(&params, &triples).unwrap();
        let flat = params.to_flat();
        let h = 1e-5;
        for d in 0..flat.len() {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[d] += h;
            minus[d] -= h;
            let lp = log_likelihood(&Params::from_flat(&plus, 3), &triples).unwrap();
            let lm = log_likelihood(&Params::from_flat(&minus, 3), &triples).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert_abs_diff_eq!(g[d], fd, epsilon = 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn projection_centers_blocks() {
        let params = Params {
            s: vec![1.0, 2.0, 3.0],
            alpha: vec![3.0, 3.0],
        };
        let p = project_to_constraints(&params);
        assert_eq!(p.s, vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.alpha, vec![0.0, 0.0]);
        let centered = Params {
            s: vec![0.0, 0.0],
            alpha: vec![0.5, -0.5],
        };
        assert_eq!(project_to_constraints(&centered), centered);
    }

    #[test]
    fn gauge_transform_preserves_probabilities() {
        let params = Params {
            s: vec![0.7, -0.2, -0.5],
            alpha: vec![0.3, -0.3],
        };
        let (s, gamma) = gauge_transform(&params, 2.0, 5.0).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                for (k, g) in gamma.iter().enumerate() {
                    let z = g * (s[i] - s[j]);
                    assert_abs_diff_eq!(
                        sigmoid(z),
                        predict_prob(&params, i, j, k).unwrap(),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn gauge_transform_rejects_zero_scale() {
        let params = Params::zeros(2, 1);
        assert!(gauge_transform(&params, 0.0, 1.0).is_err());
    }

    #[test]
    fn gauge_shift_absorbed_by_projection() {
        let params = project_to_constraints(&Params {
            s: vec![0.9, -0.1, -0.8],
            alpha: vec![0.2, -0.2],
        });
        let (s, gamma) = gauge_transform(&params, 1.0, 7.0).unwrap();
        let back = normalize_raw(&s, &gamma).unwrap();
        for (a, b) in back.s.iter().zip(&params.s) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in back.alpha.iter().zip(&params.alpha) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_scores_freeze_alpha_gradient() {
        let params = Params {
            s: vec![0.0; 4],
            alpha: vec![0.6, -0.1, -0.5],
        };
        let triples = vec![
            triple(0, 1, 0, 10, 0.7),
            triple(1, 2, 1, 10, 0.4),
            triple(2, 3, 2, 10, 0.6),
        ];
        let g = grad_log_likelihood(&params, &triples).unwrap();
        for gd in &g[4..7] {
            assert_abs_diff_eq!(gd, &0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn params_json_alpha_wins() {
        let json = r#"{"s":[0.5,-0.5],"alpha":[0.1,-0.1],"gamma":[9.0,9.0]}"#;
        let p: Params = serde_json::from_str(json).unwrap();
        assert_eq!(p.alpha, vec![0.1, -0.1]);
        let gamma_only = r#"{"s":[0.0,0.0],"gamma":[2.0,0.5]}"#;
        let p: Params = serde_json::from_str(gamma_only).unwrap();
        assert_abs_diff_eq!(p.alpha[0], 2.0f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn uniform_design_probs_sum_to_one() {
        let design = Design::Uniform {
            n_candidates: 5,
            n_judges: 3,
        };
        let total: f64 = design.triple_probs().iter().map(|t| t.3).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empirical_design_probs_sum_to_one() {
        let design = Design::empirical(&[triple(0, 1, 0, 3, 1.0), triple(0, 2, 1, 7, 0.0)]);
        let total: f64 = design.triple_probs().iter().map(|t| t.3).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}
