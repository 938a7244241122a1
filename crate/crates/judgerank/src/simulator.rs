//! Synthetic data generation and the simulation studies: MSE convergence
//! rate, confidence-interval coverage/width, and judge/comparison
//! subsampling efficiency.
//!
//! Every study output is a pure function of its configuration, including the
//! master seed. Replications run in parallel with per-task seeds derived
//! from `(master seed, config index, grid index, replicate)`, so results do
//! not depend on scheduling order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{aggregate, ComparisonRecord, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{fit_unweighted, fit_weighted, FitConfig, FitResult};
use crate::inference::{covariance, covariance_unweighted, pearson, wald_ci_component};
use crate::model::{predict_prob, project_to_constraints, Design, Params};

/// Distribution for one block of truth parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum DistSpec {
    /// I.i.d. normal with the given standard deviation.
    Normal { sd: f64 },
    /// I.i.d. uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
}

/// Ground-truth generator specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub n_candidates: usize,
    pub n_judges: usize,
    /// Law for the raw scores before centering.
    pub score_law: DistSpec,
    /// Law for the raw log-discriminations before centering.
    pub gamma_law: DistSpec,
    pub seed: u64,
}

impl TruthSpec {
    /// Defaults: standard-normal scores; log-discriminations uniform on
    /// `[-log 3, log 3]`, so judges range about 3x above/below the median.
    pub fn new(n_candidates: usize, n_judges: usize, seed: u64) -> Self {
        TruthSpec {
            n_candidates,
            n_judges,
            score_law: DistSpec::Normal { sd: 1.0 },
            gamma_law: DistSpec::Uniform {
                half_width: 3.0f64.ln(),
            },
            seed,
        }
    }
}

fn draw(law: DistSpec, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        DistSpec::Normal { sd } => {
            // Box-Muller; two uniforms per draw keeps the stream simple.
            let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        }
        DistSpec::Uniform { half_width } => rng.random_range(-half_width..half_width),
    }
}

fn law_degenerate(law: DistSpec) -> bool {
    match law {
        DistSpec::Normal { sd } => sd <= 0.0,
        DistSpec::Uniform { half_width } => half_width < 0.0,
    }
}

/// Draw normalized ground-truth parameters, deterministic given the seed.
pub fn gen_truth(spec: &TruthSpec) -> Result<Params> {
    if spec.n_candidates < 2 {
        return Err(Error::DegenerateSpec("need at least 2 candidates".into()));
    }
    if spec.n_judges < 1 {
        return Err(Error::DegenerateSpec("need at least 1 judge".into()));
    }
    if law_degenerate(spec.score_law) {
        return Err(Error::DegenerateSpec(
            "score law has zero variance; quality scores would be constant".into(),
        ));
    }
    if law_degenerate(spec.gamma_law) {
        return Err(Error::DegenerateSpec("invalid gamma law".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    loop {
        let params = project_to_constraints(&Params {
            s: (0..spec.n_candidates)
                .map(|_| draw(spec.score_law, &mut rng))
                .collect(),
            alpha: (0..spec.n_judges)
                .map(|_| draw(spec.gamma_law, &mut rng))
                .collect(),
        });
        // Constant scores have probability zero but would violate
        // identifiability; redraw just in case.
        let spread = params.s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if spread > 1e-12 {
            return Ok(params);
        }
    }
}

/// Simulate `t` i.i.d. comparisons: triples uniform over pairs and judges,
/// binary outcomes from the judge-aware model. Ties are never generated.
pub fn simulate_comparisons(truth: &Params, t: u64, seed: u64) -> Dataset {
    let n = truth.n_candidates();
    let k_total = truth.n_judges();
    let n_pairs = n * (n - 1) / 2;
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(t as usize);
    for _ in 0..t {
        let (i, j) = pairs[rng.random_range(0..n_pairs)];
        let k = rng.random_range(0..k_total);
        let p = predict_prob(truth, i, j, k).expect("indices in bounds");
        let y = if rng.random_range(0.0..1.0) < p {
            1.0
        } else {
            0.0
        };
        records.push(ComparisonRecord { i, j, k, y });
    }
    Dataset::new(n, k_total, records).expect("indices in bounds")
}

/// Mix a task index into a master seed (splitmix64 finalizer).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut x = master;
    for &p in parts {
        x = x
            .wrapping_add(0x9e3779b97f4a7c15)
            .wrapping_add(p.wrapping_mul(0xbf58476d1ce4e5b9));
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        x ^= x >> 31;
    }
    x
}

/// Configuration shared by the MSE and coverage studies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    /// `(N, K)` pairs to study.
    pub configs: Vec<(usize, usize)>,
    /// Sample sizes, strictly increasing.
    pub t_grid: Vec<u64>,
    /// Replications per grid point (R for the MSE study, B for coverage).
    pub replications: usize,
    /// Confidence level for the coverage study.
    pub level: f64,
    pub seed: u64,
    #[serde(default = "default_score_law")]
    pub score_law: DistSpec,
    #[serde(default = "default_gamma_law")]
    pub gamma_law: DistSpec,
}

fn default_score_law() -> DistSpec {
    DistSpec::Normal { sd: 1.0 }
}

fn default_gamma_law() -> DistSpec {
    DistSpec::Uniform {
        half_width: 3.0f64.ln(),
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() || self.t_grid.is_empty() {
            return Err(Error::DegenerateSpec("empty study grid".into()));
        }
        if !self.t_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::DegenerateSpec(
                "t_grid must be strictly increasing".into(),
            ));
        }
        if self.replications < 1 {
            return Err(Error::DegenerateSpec("replications must be >= 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidLevel(self.level));
        }
        Ok(())
    }

    fn truth_for(&self, cfg_idx: usize) -> Result<Params> {
        let (n, k) = self.configs[cfg_idx];
        gen_truth(&TruthSpec {
            score_law: self.score_law,
            gamma_law: self.gamma_law,
            ..TruthSpec::new(n, k, derive_seed(self.seed, &[TRUTH_TAG, cfg_idx as u64]))
        })
    }
}

const TRUTH_TAG: u64 = 0x7281;

/// One replicate of the MSE study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseRow {
    pub n_candidates: usize,
    pub n_judges: usize,
    pub t: u64,
    pub replicate: usize,
    pub mse_s: f64,
    pub mse_gamma_log: f64,
    pub converged: bool,
}

/// Fitted log-log slope per configuration (last five grid points).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeRow {
    pub n_candidates: usize,
    pub n_judges: usize,
    pub slope_mse_s: f64,
    pub slope_mse_gamma_log: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseStudy {
    pub rows: Vec<MseRow>,
    pub slopes: Vec<SlopeRow>,
    /// Non-convergent fits excluded from the slope regression.
    pub excluded: usize,
}

fn mse(estimate: &[f64], truth: &[f64]) -> f64 {
    estimate
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / truth.len() as f64
}

fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Run the convergence-rate study: per configuration, one fixed truth;
/// fresh data per `(T, replicate)`; slope of log mean MSE versus log T over
/// the last five grid points.
pub fn run_mse_study(config: &StudyConfig) -> Result<MseStudy> {
    config.validate()?;
    if config.t_grid.len() < 5 {
        return Err(Error::DegenerateSpec(
            "slope fitting needs at least 5 grid points".into(),
        ));
    }
    let truths: Vec<Params> = (0..config.configs.len())
        .map(|c| config.truth_for(c))
        .collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for (cfg_idx, _) in config.configs.iter().enumerate() {
        for (t_idx, &t) in config.t_grid.iter().enumerate() {
            for rep in 0..config.replications {
                tasks.push((cfg_idx, t_idx, t, rep));
            }
        }
    }

    let rows: Vec<MseRow> = tasks
        .par_iter()
        .map(|&(cfg_idx, t_idx, t, rep)| {
            let (n, k) = config.configs[cfg_idx];
            let truth = &truths[cfg_idx];
            let data_seed =
                derive_seed(config.seed, &[1, cfg_idx as u64, t_idx as u64, rep as u64]);
            let dataset = simulate_comparisons(truth, t, data_seed);
            let triples = aggregate(&dataset);
            let fit_config = FitConfig {
                seed: derive_seed(data_seed, &[2]),
                ..FitConfig::default()
            };
            let fit = fit_weighted(&triples, n, k, &fit_config);
            match fit {
                Ok(fit) => MseRow {
                    n_candidates: n,
                    n_judges: k,
                    t,
                    replicate: rep,
                    mse_s: mse(&fit.params.s, &truth.s),
                    mse_gamma_log: mse(&fit.params.alpha, &truth.alpha),
                    converged: fit.converged,
                },
                Err(_) => MseRow {
                    n_candidates: n,
                    n_judges: k,
                    t,
                    replicate: rep,
                    mse_s: f64::NAN,
                    mse_gamma_log: f64::NAN,
                    converged: false,
                },
            }
        })
        .collect();

    let excluded = rows.iter().filter(|r| !r.converged).count();
    let mut slopes = Vec::new();
    for (cfg_idx, &(n, k)) in config.configs.iter().enumerate() {
        let last_five = &config.t_grid[config.t_grid.len() - 5..];
        let mut pts_s = Vec::new();
        let mut pts_g = Vec::new();
        for &t in last_five {
            let cell: Vec<&MseRow> = rows
                .iter()
                .filter(|r| {
                    r.n_candidates == config.configs[cfg_idx].0
                        && r.n_judges == config.configs[cfg_idx].1
                        && r.t == t
                        && r.converged
                })
                .collect();
            if cell.is_empty() {
                continue;
            }
            let mean_s = cell.iter().map(|r| r.mse_s).sum::<f64>() / cell.len() as f64;
            let mean_g = cell.iter().map(|r| r.mse_gamma_log).sum::<f64>() / cell.len() as f64;
            pts_s.push(((t as f64).ln(), mean_s.ln()));
            pts_g.push(((t as f64).ln(), mean_g.ln()));
        }
        slopes.push(SlopeRow {
            n_candidates: n,
            n_judges: k,
            slope_mse_s: ols_slope(&pts_s),
            slope_mse_gamma_log: ols_slope(&pts_g),
        });
    }
    Ok(MseStudy {
        rows,
        slopes,
        excluded,
    })
}

/// Which model a coverage/subsampling measurement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    Weighted,
    Unweighted,
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelTag::Weighted => write!(f, "weighted"),
            ModelTag::Unweighted => write!(f, "unweighted"),
        }
    }
}

/// Pooled coverage and width for one `(N, K, T, model)` cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n_candidates: usize,
    pub n_judges: usize,
    pub t: u64,
    pub model: ModelTag,
    /// Fraction of `(replicate, i)` score intervals covering the truth.
    pub coverage: f64,
    pub avg_width: f64,
    /// Replicates excluded (non-convergent fit or singular information).
    pub excluded: usize,
}

/// Per-score coverage breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerScoreCoverageRow {
    pub n_candidates: usize,
    pub n_judges: usize,
    pub t: u64,
    pub model: ModelTag,
    pub score_index: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageStudy {
    pub rows: Vec<CoverageRow>,
    pub per_score: Vec<PerScoreCoverageRow>,
}

struct CoverageRep {
    /// Per-score (covered, width) for each model, or None if excluded.
    weighted: Option<Vec<(bool, f64)>>,
    unweighted: Option<Vec<(bool, f64)>>,
}

/// Run the coverage/width study: per `(N, K, T)`, fit both models on B
/// replications, build per-score Wald intervals at the configured level
/// under the uniform design, and pool coverage over `(replicate, i)`.
pub fn run_coverage_study(config: &StudyConfig) -> Result<CoverageStudy> {
    config.validate()?;
    let truths: Vec<Params> = (0..config.configs.len())
        .map(|c| config.truth_for(c))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut per_score = Vec::new();
    for (cfg_idx, &(n, k)) in config.configs.iter().enumerate() {
        let truth = &truths[cfg_idx];
        let design = Design::Uniform {
            n_candidates: n,
            n_judges: k,
        };
        for (t_idx, &t) in config.t_grid.iter().enumerate() {
            let reps: Vec<CoverageRep> = (0..config.replications)
                .into_par_iter()
                .map(|rep| {
                    let data_seed =
                        derive_seed(config.seed, &[3, cfg_idx as u64, t_idx as u64, rep as u64]);
                    let dataset = simulate_comparisons(truth, t, data_seed);
                    let triples = aggregate(&dataset);
                    let fit_config = FitConfig {
                        seed: derive_seed(data_seed, &[4]),
                        ..FitConfig::default()
                    };
                    let weighted = coverage_one_fit(
                        fit_weighted(&triples, n, k, &fit_config),
                        truth,
                        &design,
                        t,
                        config.level,
                        ModelTag::Weighted,
                    );
                    let unweighted = coverage_one_fit(
                        fit_unweighted(&triples, n, k, &fit_config),
                        truth,
                        &design,
                        t,
                        config.level,
                        ModelTag::Unweighted,
                    );
                    CoverageRep {
                        weighted,
                        unweighted,
                    }
                })
                .collect();

            for model in [ModelTag::Weighted, ModelTag::Unweighted] {
                let cells: Vec<&Vec<(bool, f64)>> = reps
                    .iter()
                    .filter_map(|r| match model {
                        ModelTag::Weighted => r.weighted.as_ref(),
                        ModelTag::Unweighted => r.unweighted.as_ref(),
                    })
                    .collect();
                let excluded = config.replications - cells.len();
                let total = (cells.len() * n).max(1) as f64;
                let covered: usize = cells
                    .iter()
                    .flat_map(|c| c.iter())
                    .filter(|(hit, _)| *hit)
                    .count();
                let width_sum: f64 = cells.iter().flat_map(|c| c.iter()).map(|(_, w)| w).sum();
                rows.push(CoverageRow {
                    n_candidates: n,
                    n_judges: k,
                    t,
                    model,
                    coverage: covered as f64 / total,
                    avg_width: width_sum / total,
                    excluded,
                });
                for i in 0..n {
                    let hits = cells.iter().filter(|c| c[i].0).count();
                    per_score.push(PerScoreCoverageRow {
                        n_candidates: n,
                        n_judges: k,
                        t,
                        model,
                        score_index: i,
                        coverage: hits as f64 / cells.len().max(1) as f64,
                    });
                }
            }
        }
    }
    Ok(CoverageStudy { rows, per_score })
}

fn coverage_one_fit(
    fit: Result<FitResult>,
    truth: &Params,
    design: &Design,
    t: u64,
    level: f64,
    model: ModelTag,
) -> Option<Vec<(bool, f64)>> {
    let fit = fit.ok().filter(|f| f.converged)?;
    let cov = match model {
        ModelTag::Weighted => covariance(&fit.params, design).ok()?,
        ModelTag::Unweighted => covariance_unweighted(&fit.params, design).ok()?,
    };
    let n = truth.n_candidates();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ci = wald_ci_component(&fit, &cov, t, i, level).ok()?;
        let hit = ci.lower <= truth.s[i] && truth.s[i] <= ci.upper;
        out.push((hit, ci.upper - ci.lower));
    }
    Some(out)
}

/// Configuration for the subsampling efficiency study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsampleConfig {
    /// Judge budgets to try.
    pub k_grid: Vec<usize>,
    /// Comparison budgets to try.
    pub t_grid: Vec<u64>,
    /// Random judge draws averaged per cell.
    pub reps: usize,
    pub seed: u64,
}

/// One `(K, T, model)` cell of the subsampling study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsampleRow {
    pub k_budget: usize,
    pub t_budget: u64,
    pub model: ModelTag,
    /// Mean Pearson correlation to the same model's full-data reference.
    pub mean_correlation: f64,
    /// Draws skipped after 20 failed connectivity redraws.
    pub skipped: usize,
    pub infeasible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsampleStudy {
    pub rows: Vec<SubsampleRow>,
}

/// Run the subsampling study on a (connected) dataset.
///
/// Each model's subsampled scores are compared against its own full-data
/// reference. Judge draws are uniform without replacement; comparison
/// subsets are uniform without replacement from the selected judges'
/// records. Disconnected subsamples are redrawn up to 20 times.
pub fn run_subsample_study(dataset: &Dataset, config: &SubsampleConfig) -> Result<SubsampleStudy> {
    if dataset.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = dataset.n_candidates;
    let k_total = dataset.n_judges;
    if config.k_grid.iter().any(|&k| k == 0 || k > k_total) {
        return Err(Error::Infeasible(format!(
            "judge budgets must lie in 1..={k_total}"
        )));
    }
    let report = crate::data::check_connectivity(dataset);
    if !report.connected {
        return Err(Error::Disconnected {
            n_components: report.components.len(),
        });
    }

    let full_triples = aggregate(dataset);
    let ref_config = FitConfig {
        seed: derive_seed(config.seed, &[5]),
        ..FitConfig::default()
    };
    let ref_weighted = fit_weighted(&full_triples, n, k_total, &ref_config)?;
    let ref_unweighted = fit_unweighted(&full_triples, n, k_total, &ref_config)?;

    let mut records_by_judge: Vec<Vec<ComparisonRecord>> = vec![Vec::new(); k_total];
    for r in &dataset.records {
        records_by_judge[r.k].push(*r);
    }

    let mut cells = Vec::new();
    for &kb in &config.k_grid {
        for &tb in &config.t_grid {
            cells.push((kb, tb));
        }
    }

    let results: Vec<Vec<SubsampleRow>> = cells
        .par_iter()
        .map(|&(kb, tb)| {
            let mut corr_w = Vec::new();
            let mut corr_u = Vec::new();
            let mut skipped = 0;
            let mut infeasible = false;
            for rep in 0..config.reps {
                let cell_seed = derive_seed(config.seed, &[6, kb as u64, tb, rep as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
                let mut done = false;
                for _attempt in 0..20 {
                    // Draw kb judges without replacement.
                    let mut judges: Vec<usize> = (0..k_total).collect();
                    partial_shuffle(&mut judges, kb, &mut rng);
                    judges.truncate(kb);
                    let mut pool: Vec<ComparisonRecord> = judges
                        .iter()
                        .flat_map(|&k| records_by_judge[k].iter().copied())
                        .collect();
                    if (pool.len() as u64) < tb {
                        infeasible = true;
                        done = true;
                        break;
                    }
                    partial_shuffle(&mut pool, tb as usize, &mut rng);
                    pool.truncate(tb as usize);
                    let sub = Dataset::new(n, k_total, pool).expect("indices in bounds");
                    if !crate::data::check_connectivity(&sub).connected {
                        continue;
                    }
                    let triples = aggregate(&sub);
                    let fit_config = FitConfig {
                        seed: derive_seed(cell_seed, &[7]),
                        ..FitConfig::default()
                    };
                    if let (Ok(fw), Ok(fu)) = (
                        fit_weighted(&triples, n, k_total, &fit_config),
                        fit_unweighted(&triples, n, k_total, &fit_config),
                    ) {
                        if let (Ok(cw), Ok(cu)) = (
                            pearson(&fw.params.s, &ref_weighted.params.s),
                            pearson(&fu.params.s, &ref_unweighted.params.s),
                        ) {
                            corr_w.push(cw);
                            corr_u.push(cu);
                        }
                    }
                    done = true;
                    break;
                }
                if !done {
                    skipped += 1;
                }
                if infeasible {
                    break;
                }
            }
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            vec![
                SubsampleRow {
                    k_budget: kb,
                    t_budget: tb,
                    model: ModelTag::Weighted,
                    mean_correlation: mean(&corr_w),
                    skipped,
                    infeasible,
                },
                SubsampleRow {
                    k_budget: kb,
                    t_budget: tb,
                    model: ModelTag::Unweighted,
                    mean_correlation: mean(&corr_u),
                    skipped,
                    infeasible,
                },
            ]
        })
        .collect();

    Ok(SubsampleStudy {
        rows: results.into_iter().flatten().collect(),
    })
}

/// Fisher-Yates for the first `take` positions.
fn partial_shuffle<T>(v: &mut [T], take: usize, rng: &mut ChaCha8Rng) {
    let n = v.len();
    for idx in 0..take.min(n.saturating_sub(1)) {
        let swap_with = rng.random_range(idx..n);
        v.swap(idx, swap_with);
    }
}

/// CSV writers for the study tables (long format, one row per measurement).
pub mod tables {
    use super::*;
    use std::io::Write;

    pub fn write_mse_rows<W: Write>(mut sink: W, study: &MseStudy) -> Result<()> {
        writeln!(
            sink,
            "n_candidates,n_judges,t,replicate,mse_s,mse_gamma_log,converged"
        )?;
        for r in &study.rows {
            writeln!(
                sink,
                "{},{},{},{},{},{},{}",
                r.n_candidates, r.n_judges, r.t, r.replicate, r.mse_s, r.mse_gamma_log, r.converged
            )?;
        }
        Ok(())
    }

    pub fn write_mse_slopes<W: Write>(mut sink: W, study: &MseStudy) -> Result<()> {
        writeln!(
            sink,
            "n_candidates,n_judges,slope_mse_s,slope_mse_gamma_log"
        )?;
        for r in &study.slopes {
            writeln!(
                sink,
                "{},{},{},{}",
                r.n_candidates, r.n_judges, r.slope_mse_s, r.slope_mse_gamma_log
            )?;
        }
        Ok(())
    }

    pub fn write_coverage_rows<W: Write>(mut sink: W, study: &CoverageStudy) -> Result<()> {
        writeln!(
            sink,
            "n_candidates,n_judges,t,model,coverage,avg_width,excluded"
        )?;
        for r in &study.rows {
            writeln!(
                sink,
                "{},{},{},{},{},{},{}",
                r.n_candidates, r.n_judges, r.t, r.model, r.coverage, r.avg_width, r.excluded
            )?;
        }
        Ok(())
    }

    pub fn write_coverage_per_score<W: Write>(mut sink: W, study: &CoverageStudy) -> Result<()> {
        writeln!(sink, "n_candidates,n_judges,t,model,score_index,coverage")?;
        for r in &study.per_score {
            writeln!(
                sink,
                "{},{},{},{},{},{}",
                r.n_candidates, r.n_judges, r.t, r.model, r.score_index, r.coverage
            )?;
        }
        Ok(())
    }

    pub fn write_subsample_rows<W: Write>(mut sink: W, study: &SubsampleStudy) -> Result<()> {
        writeln!(
            sink,
            "k_budget,t_budget,model,mean_correlation,skipped,infeasible"
        )?;
        for r in &study.rows {
            writeln!(
                sink,
                "{},{},{},{},{},{}",
                r.k_budget, r.t_budget, r.model, r.mean_correlation, r.skipped, r.infeasible
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gen_truth_is_deterministic_and_centered() {
        let spec = TruthSpec::new(10, 5, 42);
        let a = gen_truth(&spec).unwrap();
        let b = gen_truth(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.constraint_violation() < 1e-10);
    }

    #[test]
    fn gen_truth_rejects_degenerate_law() {
        let spec = TruthSpec {
            score_law: DistSpec::Normal { sd: 0.0 },
            ..TruthSpec::new(5, 2, 0)
        };
        assert!(matches!(gen_truth(&spec), Err(Error::DegenerateSpec(_))));
    }

    #[test]
    fn gen_truth_score_spread_is_realistic() {
        // Sample SD of centered standard normals; loose desk check.
        let mut in_range = 0;
        for seed in 0..100 {
            let truth = gen_truth(&TruthSpec::new(10, 5, seed)).unwrap();
            let var = truth.s.iter().map(|v| v * v).sum::<f64>() / 9.0;
            let sd = var.sqrt();
            if (0.4..=1.8).contains(&sd) {
                in_range += 1;
            }
        }
        assert!(in_range >= 97, "only {in_range}/100 seeds in range");
    }

    #[test]
    fn simulate_zero_is_empty() {
        let truth = gen_truth(&TruthSpec::new(3, 2, 1)).unwrap();
        assert!(simulate_comparisons(&truth, 0, 9).is_empty());
    }

    #[test]
    fn simulate_constant_scores_is_fair_coin() {
        let truth = Params {
            s: vec![0.0; 4],
            alpha: vec![0.3, -0.3],
        };
        let t = 40_000;
        let ds = simulate_comparisons(&truth, t, 7);
        let wins: f64 = ds.records.iter().map(|r| r.y).sum();
        let rate = wins / t as f64;
        assert!((rate - 0.5).abs() < 3.0 / (t as f64).sqrt());
    }

    #[test]
    fn simulate_matches_model_rate() {
        // N = 2, K = 1, score gap log 3: win rate sigma(log 3) = 0.75.
        let truth = Params {
            s: vec![3.0f64.ln() / 2.0, -(3.0f64).ln() / 2.0],
            alpha: vec![0.0],
        };
        let t = 100_000;
        let ds = simulate_comparisons(&truth, t, 11);
        let rate = ds.records.iter().map(|r| r.y).sum::<f64>() / t as f64;
        assert_abs_diff_eq!(rate, 0.75, epsilon = 0.005);
    }

    #[test]
    fn simulate_is_deterministic() {
        let truth = gen_truth(&TruthSpec::new(4, 2, 3)).unwrap();
        let a = simulate_comparisons(&truth, 500, 21);
        let b = simulate_comparisons(&truth, 500, 21);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn ols_slope_recovers_line() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|x| (x as f64, 3.0 - 2.0 * x as f64)).collect();
        assert_abs_diff_eq!(ols_slope(&pts), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn derive_seed_separates_streams() {
        let a = derive_seed(1, &[0, 1]);
        let b = derive_seed(1, &[1, 0]);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(1, &[0, 1]));
    }

    #[test]
    fn small_mse_study_runs_and_is_deterministic() {
        let config = StudyConfig {
            configs: vec![(5, 3)],
            t_grid: vec![200, 400, 800, 1600, 3200],
            replications: 3,
            level: 0.95,
            seed: 77,
            score_law: default_score_law(),
            gamma_law: default_gamma_law(),
        };
        let a = run_mse_study(&config).unwrap();
        let b = run_mse_study(&config).unwrap();
        assert_eq!(a.rows.len(), 15);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        tables::write_mse_rows(&mut buf_a, &a).unwrap();
        tables::write_mse_rows(&mut buf_b, &b).unwrap();
        assert_eq!(buf_a, buf_b);
        // Error shrinks with T (median over reps).
        let median = |t: u64, study: &MseStudy| {
            let mut v: Vec<f64> = study
                .rows
                .iter()
                .filter(|r| r.t == t && r.converged)
                .map(|r| r.mse_s)
                .collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        assert!(median(3200, &a) < median(200, &a));
    }

    #[test]
    fn subsample_full_budget_recovers_reference() {
        let truth = gen_truth(&TruthSpec::new(6, 3, 5)).unwrap();
        let ds = simulate_comparisons(&truth, 4000, 13);
        let study = run_subsample_study(
            &ds,
            &SubsampleConfig {
                k_grid: vec![3],
                t_grid: vec![4000],
                reps: 2,
                seed: 99,
            },
        )
        .unwrap();
        for row in &study.rows {
            assert!(!row.infeasible);
            assert_abs_diff_eq!(row.mean_correlation, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn subsample_flags_infeasible_budget() {
        let truth = gen_truth(&TruthSpec::new(4, 2, 5)).unwrap();
        let ds = simulate_comparisons(&truth, 100, 13);
        let study = run_subsample_study(
            &ds,
            &SubsampleConfig {
                k_grid: vec![1],
                t_grid: vec![10_000],
                reps: 1,
                seed: 1,
            },
        )
        .unwrap();
        assert!(study.rows.iter().all(|r| r.infeasible));
    }
}
