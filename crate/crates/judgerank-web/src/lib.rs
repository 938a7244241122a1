//! Browser demo bindings: a thin wasm-bindgen layer over the `judgerank`
//! crate. Each export takes plain strings/numbers and returns a JSON string
//! so the page needs no generated TypeScript glue.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use judgerank::data::{aggregate, check_connectivity, load_records, RecordFormat};
use judgerank::estimator::{fit_unweighted, fit_weighted, FitConfig};
use judgerank::inference::{covariance, wald_ci_component};
use judgerank::model::{sigmoid, Design};
use judgerank::simulator::{gen_truth, simulate_comparisons, TruthSpec};

#[derive(Serialize)]
struct CurvePoint {
    delta: f64,
    p: f64,
}

/// Preference-probability curve `p = sigma(gamma * delta)` over a symmetric
/// score-gap range, for the interactive discrimination explorer.
#[wasm_bindgen]
pub fn prob_curve(gamma: f64, half_range: f64, points: usize) -> String {
    let points = points.max(2);
    let curve: Vec<CurvePoint> = (0..points)
        .map(|idx| {
            let delta = -half_range + 2.0 * half_range * idx as f64 / (points - 1) as f64;
            CurvePoint {
                delta,
                p: sigmoid(gamma * delta),
            }
        })
        .collect();
    serde_json::to_string(&curve).unwrap()
}

#[derive(Serialize)]
struct LeaderboardRow {
    name: String,
    s_weighted: f64,
    s_unweighted: f64,
    ci_lower: f64,
    ci_upper: f64,
}

#[derive(Serialize)]
struct JudgeRow {
    name: String,
    gamma: f64,
}

#[derive(Serialize)]
struct FitResponse {
    candidates: Vec<LeaderboardRow>,
    judges: Vec<JudgeRow>,
    total: u64,
    converged: bool,
}

fn fit_csv_inner(csv_text: &str, level: f64) -> judgerank::Result<FitResponse> {
    let dataset = load_records(csv_text.as_bytes(), RecordFormat::Csv, None)?;
    let report = check_connectivity(&dataset);
    if !report.connected {
        return Err(judgerank::Error::Disconnected {
            n_components: report.components.len(),
        });
    }
    let triples = aggregate(&dataset);
    let total: u64 = triples.iter().map(|t| t.n).sum();
    let config = FitConfig::default();
    let weighted = fit_weighted(&triples, dataset.n_candidates, dataset.n_judges, &config)?;
    let unweighted = fit_unweighted(&triples, dataset.n_candidates, dataset.n_judges, &config)?;

    let design = Design::empirical(&triples);
    let cov = covariance(&weighted.params, &design)?;
    let mut candidates = Vec::new();
    for i in 0..dataset.n_candidates {
        let ci = wald_ci_component(&weighted, &cov, total, i, level)?;
        candidates.push(LeaderboardRow {
            name: dataset.candidate_name(i),
            s_weighted: weighted.params.s[i],
            s_unweighted: unweighted.params.s[i],
            ci_lower: ci.lower,
            ci_upper: ci.upper,
        });
    }
    candidates.sort_by(|a, b| b.s_weighted.partial_cmp(&a.s_weighted).unwrap());
    let gamma = weighted.params.gamma();
    let judges = (0..dataset.n_judges)
        .map(|k| JudgeRow {
            name: dataset.judge_name(k),
            gamma: gamma[k],
        })
        .collect();
    Ok(FitResponse {
        candidates,
        judges,
        total,
        converged: weighted.converged && unweighted.converged,
    })
}

/// Fit both models to a pasted comparison CSV
/// (`model_a,model_b,judge,outcome`) and return leaderboard, judge
/// reliabilities, and Wald intervals as JSON.
#[wasm_bindgen]
pub fn fit_csv(csv_text: &str, level: f64) -> Result<String, JsValue> {
    let response = fit_csv_inner(csv_text, level).map_err(|e| JsValue::from_str(&e.to_string()))?;
    Ok(serde_json::to_string(&response).unwrap())
}

#[derive(Serialize)]
struct RecoveryPoint {
    truth: f64,
    weighted: f64,
    unweighted: f64,
}

#[derive(Serialize)]
struct RecoveryResponse {
    scores: Vec<RecoveryPoint>,
    gammas_truth: Vec<f64>,
    gammas_fitted: Vec<f64>,
    pearson_weighted: f64,
    pearson_unweighted: f64,
}

fn simulate_recovery_inner(
    n: usize,
    k: usize,
    t: u64,
    seed: u64,
) -> judgerank::Result<RecoveryResponse> {
    let truth = gen_truth(&TruthSpec::new(n, k, seed))?;
    let dataset = simulate_comparisons(&truth, t, seed.wrapping_add(1));
    let triples = aggregate(&dataset);
    let config = FitConfig::default();
    let weighted = fit_weighted(&triples, n, k, &config)?;
    let unweighted = fit_unweighted(&triples, n, k, &config)?;
    let scores = (0..n)
        .map(|i| RecoveryPoint {
            truth: truth.s[i],
            weighted: weighted.params.s[i],
            unweighted: unweighted.params.s[i],
        })
        .collect();
    Ok(RecoveryResponse {
        scores,
        gammas_truth: truth.gamma(),
        gammas_fitted: weighted.params.gamma(),
        pearson_weighted: judgerank::inference::pearson(&weighted.params.s, &truth.s)?,
        pearson_unweighted: judgerank::inference::pearson(&unweighted.params.s, &truth.s)?,
    })
}

/// Simulate comparisons from random heterogeneous-judge truth, refit both
/// models, and return truth-versus-estimate scatters as JSON.
#[wasm_bindgen]
pub fn simulate_recovery(n: usize, k: usize, t: u64, seed: u64) -> Result<String, JsValue> {
    let response =
        simulate_recovery_inner(n, k, t, seed).map_err(|e| JsValue::from_str(&e.to_string()))?;
    Ok(serde_json::to_string(&response).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prob_curve_is_monotone() {
        let json = prob_curve(2.0, 4.0, 41);
        let curve: Vec<serde_json::Value> = serde_json::from_str(&json).unwrap();
        assert_eq!(curve.len(), 41);
        let ps: Vec<f64> = curve.iter().map(|p| p["p"].as_f64().unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fit_csv_roundtrip() {
        let csv = "model_a,model_b,judge,outcome\n\
                   A,B,J1,win_a\nA,B,J1,win_a\nA,B,J1,win_a\nA,B,J1,win_b\n";
        let response = fit_csv_inner(csv, 0.95).unwrap();
        assert_eq!(response.total, 4);
        assert_eq!(response.candidates[0].name, "A");
        assert!((response.candidates[0].s_weighted - 0.5493).abs() < 1e-3);
    }

    #[test]
    fn fit_csv_reports_disconnection() {
        let csv = "model_a,model_b,judge,outcome\nA,B,J1,win_a\nC,D,J1,win_a\n";
        assert!(fit_csv_inner(csv, 0.95).is_err());
    }

    #[test]
    fn simulate_recovery_correlates() {
        let response = simulate_recovery_inner(8, 4, 20_000, 3).unwrap();
        assert!(response.pearson_weighted > 0.95);
        assert_eq!(response.scores.len(), 8);
    }
}
