//! `judgerank`: fit judge-aware rankings from pairwise comparison files,
//! compute Wald confidence intervals, and run the simulation studies.
//!
//! Exit codes: 0 success, 1 I/O or parse error, 2 disconnected comparison
//! graph, 3 fit flagged as non-convergent.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use judgerank::data::{self, RecordFormat};
use judgerank::estimator::{fit_unweighted, fit_weighted, FitConfig, FitResult};
use judgerank::inference::{
    self, covariance, covariance_unweighted, wald_ci_component, wald_ci_linear,
};
use judgerank::model::Design;
use judgerank::simulator::{
    self, gen_truth, run_coverage_study, run_mse_study, run_subsample_study, simulate_comparisons,
    StudyConfig, SubsampleConfig, TruthSpec,
};
use judgerank::{Dataset, Error, TripleStats};

#[derive(Parser)]
#[command(
    name = "judgerank",
    version,
    about = "Judge-aware ranking from pairwise comparisons"
)]
struct Cli {
    /// Cap the worker thread count (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit model scores and judge reliabilities from a comparison file.
    Fit(FitArgs),
    /// Confidence intervals from a previous `fit` run.
    Ci(CiArgs),
    /// Generate a synthetic comparison dataset from random ground truth.
    Simulate(SimulateArgs),
    /// Convergence-rate study: MSE versus sample size with log-log slopes.
    MseStudy(StudyArgs),
    /// Coverage and width study for weighted vs unweighted intervals.
    CoverageStudy(StudyArgs),
    /// Judge/comparison subsampling efficiency study on a dataset.
    SubsampleStudy(SubsampleArgs),
    /// Rank agreement between two score files.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for RecordFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => RecordFormat::Csv,
            FormatArg::Jsonl => RecordFormat::Jsonl,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Comparison records file.
    #[arg(long)]
    input: PathBuf,
    /// Input format.
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Fit only the unweighted baseline.
    #[arg(long, conflicts_with = "both")]
    unweighted: bool,
    /// Fit both the weighted and unweighted models.
    #[arg(long)]
    both: bool,
    /// Optimizer initialization seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a per-iteration `iter,loglik` trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct CiArgs {
    /// Directory written by `judgerank fit`.
    #[arg(long)]
    fit: PathBuf,
    /// Confidence level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Also emit intervals for the judge log-discriminations.
    #[arg(long)]
    judges: bool,
    /// Score-difference intervals, by candidate name (repeatable).
    #[arg(long, num_args = 2, value_names = ["A", "B"], action = clap::ArgAction::Append)]
    diff: Vec<String>,
    /// Design for the plug-in covariance.
    #[arg(long, value_enum, default_value = "empirical")]
    design: DesignArg,
    /// Output directory (defaults to the fit directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DesignArg {
    Empirical,
    Uniform,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of candidates.
    #[arg(long)]
    n: usize,
    /// Number of judges.
    #[arg(long)]
    k: usize,
    /// Number of comparisons.
    #[arg(long)]
    t: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed (reproducibility is the product; no silent entropy).
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SubsampleArgs {
    /// Comparison records file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Subsample configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// First score file (leaderboard CSV or `name,score`).
    scores_a: PathBuf,
    /// Second score file.
    scores_b: PathBuf,
}

/// Everything `ci` needs from a fit run, stored as `fit.json`.
#[derive(Serialize, Deserialize)]
struct FitArtifact {
    candidates: Vec<String>,
    judges: Vec<String>,
    total_records: u64,
    weighted: Option<FitResult>,
    unweighted: Option<FitResult>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    seed: Option<u64>,
    args: serde_json::Value,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("JUDGERANK_LOG")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Ci(args) => cmd_ci(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::MseStudy(args) => cmd_mse_study(args),
        Command::CoverageStudy(args) => cmd_coverage_study(args),
        Command::SubsampleStudy(args) => cmd_subsample_study(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Disconnected { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn write_manifest(
    dir: &Path,
    command: &str,
    seed: Option<u64>,
    args: serde_json::Value,
) -> judgerank::Result<()> {
    let manifest = Manifest {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        seed,
        args,
    };
    fs::write(
        dir.join("metadata.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

fn load_dataset(path: &Path, format: FormatArg) -> judgerank::Result<Dataset> {
    let file = fs::File::open(path)?;
    data::load_records(std::io::BufReader::new(file), format.into(), None)
}

fn write_leaderboard(path: &Path, dataset: &Dataset, fit: &FitResult) -> judgerank::Result<()> {
    let mut order: Vec<usize> = (0..dataset.n_candidates).collect();
    order.sort_by(|&a, &b| fit.params.s[b].partial_cmp(&fit.params.s[a]).unwrap());
    let mut out = String::from("rank,name,s_hat\n");
    for (rank, &i) in order.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            rank + 1,
            dataset.candidate_name(i),
            fit.params.s[i]
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_judge_table(path: &Path, dataset: &Dataset, fit: &FitResult) -> judgerank::Result<()> {
    let gamma = fit.params.gamma();
    let mut out = String::from("judge,gamma_hat,alpha_hat\n");
    for (k, g) in gamma.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            dataset.judge_name(k),
            g,
            fit.params.alpha[k]
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_trace(path: &Path, fit: &FitResult) -> judgerank::Result<()> {
    if let Some(trace) = &fit.per_iteration_loglik {
        let mut out = String::from("iter,loglik\n");
        for (iter, ll) in trace.iter().enumerate() {
            out.push_str(&format!("{},{}\n", iter + 1, ll));
        }
        fs::write(path, out)?;
    }
    Ok(())
}

fn cmd_fit(args: FitArgs) -> judgerank::Result<ExitCode> {
    let dataset = load_dataset(&args.input, args.format)?;
    let report = data::check_connectivity(&dataset);
    if !report.connected {
        eprintln!("comparison graph is disconnected; components:");
        for (id, members) in report.components.iter().enumerate() {
            let names: Vec<String> = members.iter().map(|&i| dataset.candidate_name(i)).collect();
            eprintln!("  component {id}: {}", names.join(", "));
        }
        return Err(Error::Disconnected {
            n_components: report.components.len(),
        });
    }

    let triples = data::aggregate(&dataset);
    let total: u64 = triples.iter().map(|t| t.n).sum();
    fs::create_dir_all(&args.out)?;
    {
        let file = fs::File::create(args.out.join("aggregated.csv"))?;
        data::write_aggregated(file, &triples)?;
    }

    let config = FitConfig {
        seed: args.seed,
        track_loglik: args.trace,
        ..FitConfig::default()
    };
    let fit_w = if args.unweighted {
        None
    } else {
        Some(fit_weighted(
            &triples,
            dataset.n_candidates,
            dataset.n_judges,
            &config,
        )?)
    };
    let fit_u = if args.unweighted || args.both {
        Some(fit_unweighted(
            &triples,
            dataset.n_candidates,
            dataset.n_judges,
            &config,
        )?)
    } else {
        None
    };

    let mut all_converged = true;
    if let Some(fit) = &fit_w {
        write_leaderboard(&args.out.join("leaderboard_weighted.csv"), &dataset, fit)?;
        write_judge_table(&args.out.join("judges_weighted.csv"), &dataset, fit)?;
        write_trace(&args.out.join("trace_weighted.csv"), fit)?;
        all_converged &= fit.converged;
        println!(
            "weighted fit: loglik {:.6}, {} iterations, {}",
            fit.final_loglik,
            fit.iterations,
            if fit.converged {
                "converged"
            } else {
                "NOT converged"
            }
        );
    }
    if let Some(fit) = &fit_u {
        write_leaderboard(&args.out.join("leaderboard_unweighted.csv"), &dataset, fit)?;
        write_trace(&args.out.join("trace_unweighted.csv"), fit)?;
        all_converged &= fit.converged;
        println!(
            "unweighted fit: loglik {:.6}, {} iterations, {}",
            fit.final_loglik,
            fit.iterations,
            if fit.converged {
                "converged"
            } else {
                "NOT converged"
            }
        );
    }

    let artifact = FitArtifact {
        candidates: (0..dataset.n_candidates)
            .map(|i| dataset.candidate_name(i))
            .collect(),
        judges: (0..dataset.n_judges)
            .map(|k| dataset.judge_name(k))
            .collect(),
        total_records: total,
        weighted: fit_w,
        unweighted: fit_u,
    };
    fs::write(
        args.out.join("fit.json"),
        serde_json::to_string_pretty(&artifact)? + "\n",
    )?;
    write_manifest(
        &args.out,
        "fit",
        Some(args.seed),
        serde_json::json!({
            "input": args.input,
            "format": format_name(args.format),
            "unweighted": args.unweighted,
            "both": args.both,
        }),
    )?;
    Ok(if all_converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn format_name(f: FormatArg) -> &'static str {
    match f {
        FormatArg::Csv => "csv",
        FormatArg::Jsonl => "jsonl",
    }
}

fn cmd_ci(args: CiArgs) -> judgerank::Result<ExitCode> {
    let artifact: FitArtifact =
        serde_json::from_str(&fs::read_to_string(args.fit.join("fit.json"))?)?;
    let triples: Vec<TripleStats> = {
        let file = fs::File::open(args.fit.join("aggregated.csv"))?;
        data::read_aggregated(file)?
    };
    let out_dir = args.out.clone().unwrap_or_else(|| args.fit.clone());
    fs::create_dir_all(&out_dir)?;
    let n = artifact.candidates.len();
    let k = artifact.judges.len();
    let t = artifact.total_records;

    let fit = artifact
        .weighted
        .as_ref()
        .or(artifact.unweighted.as_ref())
        .ok_or_else(|| Error::InvalidRecord("fit artifact holds no fitted model".into()))?;
    let weighted = artifact.weighted.is_some();

    let design = match args.design {
        DesignArg::Empirical => Design::empirical(&triples),
        DesignArg::Uniform => Design::Uniform {
            n_candidates: n,
            n_judges: k,
        },
    };
    let cov = if weighted {
        covariance(&fit.params, &design)?
    } else {
        covariance_unweighted(&fit.params, &design)?
    };

    let mut score_rows = Vec::new();
    for i in 0..n {
        let ci = wald_ci_component(fit, &cov, t, i, args.level)?;
        score_rows.push((artifact.candidates[i].clone(), ci));
    }
    inference::write_ci_table(
        fs::File::create(out_dir.join("cis_scores.csv"))?,
        &score_rows,
    )?;

    if args.judges {
        if !weighted {
            return Err(Error::InvalidRecord(
                "judge intervals require a weighted fit".into(),
            ));
        }
        let mut judge_rows = Vec::new();
        for idx in 0..k {
            let ci = wald_ci_component(fit, &cov, t, n + idx, args.level)?;
            judge_rows.push((artifact.judges[idx].clone(), ci));
        }
        inference::write_ci_table(
            fs::File::create(out_dir.join("cis_judges.csv"))?,
            &judge_rows,
        )?;
    }

    if !args.diff.is_empty() {
        let dim = cov.matrix.nrows();
        let mut diff_rows = Vec::new();
        for pair in args.diff.chunks(2) {
            let find = |name: &str| -> judgerank::Result<usize> {
                artifact
                    .candidates
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::InvalidRecord(format!("unknown candidate {name:?}")))
            };
            let (a, b) = (find(&pair[0])?, find(&pair[1])?);
            let mut c = vec![0.0; dim];
            c[a] += 1.0;
            c[b] -= 1.0;
            let ci = wald_ci_linear(fit, &cov, t, &c, args.level)?;
            diff_rows.push((format!("{}-{}", pair[0], pair[1]), ci));
        }
        inference::write_ci_table(fs::File::create(out_dir.join("cis_diffs.csv"))?, &diff_rows)?;
    }

    write_manifest(
        &out_dir,
        "ci",
        None,
        serde_json::json!({
            "fit": args.fit,
            "level": args.level,
            "judges": args.judges,
            "diff": args.diff,
            "design": match args.design { DesignArg::Empirical => "empirical", DesignArg::Uniform => "uniform" },
        }),
    )?;
    println!(
        "wrote {} score intervals at level {}",
        score_rows.len(),
        args.level
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> judgerank::Result<ExitCode> {
    let truth = gen_truth(&TruthSpec::new(args.n, args.k, args.seed))?;
    let dataset = simulate_comparisons(&truth, args.t, simulator::derive_seed(args.seed, &[1]));
    fs::create_dir_all(&args.out)?;

    let mut csv = String::from("model_a,model_b,judge,outcome\n");
    for r in &dataset.records {
        let outcome = if r.y == 1.0 {
            "win_a"
        } else if r.y == 0.0 {
            "win_b"
        } else {
            "tie"
        };
        csv.push_str(&format!(
            "candidate_{},candidate_{},judge_{},{}\n",
            r.i, r.j, r.k, outcome
        ));
    }
    fs::write(args.out.join("records.csv"), csv)?;
    fs::write(
        args.out.join("truth.json"),
        serde_json::to_string_pretty(&truth)? + "\n",
    )?;
    write_manifest(
        &args.out,
        "simulate",
        Some(args.seed),
        serde_json::json!({ "n": args.n, "k": args.k, "t": args.t }),
    )?;
    println!(
        "simulated {} comparisons over {} candidates and {} judges",
        args.t, args.n, args.k
    );
    Ok(ExitCode::SUCCESS)
}

fn load_study_config(path: &Path, seed: u64) -> judgerank::Result<StudyConfig> {
    let mut config: StudyConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
    config.seed = seed;
    config.validate()?;
    Ok(config)
}

fn cmd_mse_study(args: StudyArgs) -> judgerank::Result<ExitCode> {
    let config = load_study_config(&args.config, args.seed)?;
    let study = run_mse_study(&config)?;
    fs::create_dir_all(&args.out)?;
    simulator::tables::write_mse_rows(fs::File::create(args.out.join("mse_rows.csv"))?, &study)?;
    simulator::tables::write_mse_slopes(
        fs::File::create(args.out.join("mse_slopes.csv"))?,
        &study,
    )?;
    write_manifest(
        &args.out,
        "mse-study",
        Some(args.seed),
        serde_json::json!({ "config": serde_json::to_value(&config)?, "excluded": study.excluded }),
    )?;
    for slope in &study.slopes {
        println!(
            "(N={},K={}) slope_mse_s={:.4} slope_mse_gamma_log={:.4} (excluded {})",
            slope.n_candidates,
            slope.n_judges,
            slope.slope_mse_s,
            slope.slope_mse_gamma_log,
            study.excluded
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_coverage_study(args: StudyArgs) -> judgerank::Result<ExitCode> {
    let config = load_study_config(&args.config, args.seed)?;
    let study = run_coverage_study(&config)?;
    fs::create_dir_all(&args.out)?;
    simulator::tables::write_coverage_rows(
        fs::File::create(args.out.join("coverage.csv"))?,
        &study,
    )?;
    simulator::tables::write_coverage_per_score(
        fs::File::create(args.out.join("coverage_per_score.csv"))?,
        &study,
    )?;
    write_manifest(
        &args.out,
        "coverage-study",
        Some(args.seed),
        serde_json::json!({ "config": serde_json::to_value(&config)? }),
    )?;
    for row in &study.rows {
        println!(
            "(N={},K={}) T={} {}: coverage {:.4}, avg width {:.4} (excluded {})",
            row.n_candidates,
            row.n_judges,
            row.t,
            row.model,
            row.coverage,
            row.avg_width,
            row.excluded
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_subsample_study(args: SubsampleArgs) -> judgerank::Result<ExitCode> {
    let dataset = load_dataset(&args.input, args.format)?;
    let mut config: SubsampleConfig = serde_json::from_str(&fs::read_to_string(&args.config)?)?;
    config.seed = args.seed;
    let study = run_subsample_study(&dataset, &config)?;
    fs::create_dir_all(&args.out)?;
    simulator::tables::write_subsample_rows(
        fs::File::create(args.out.join("subsample.csv"))?,
        &study,
    )?;
    write_manifest(
        &args.out,
        "subsample-study",
        Some(args.seed),
        serde_json::json!({ "input": args.input, "config": serde_json::to_value(&config)? }),
    )?;
    println!("subsample study: {} cells written", study.rows.len());
    Ok(ExitCode::SUCCESS)
}

/// Read `name -> score` pairs from a leaderboard or generic score CSV.
fn read_scores(path: &Path) -> judgerank::Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(fs::File::open(path)?);
    let headers = reader.headers()?.clone();
    let name_col = headers
        .iter()
        .position(|h| h == "name" || h == "model")
        .unwrap_or(0);
    let score_col = headers
        .iter()
        .position(|h| h == "s_hat" || h == "score" || h == "estimate")
        .unwrap_or(headers.len().saturating_sub(1));
    let mut scores = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row?;
        let name = row.get(name_col).unwrap_or_default().to_string();
        let value: f64 = row
            .get(score_col)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::Parse {
                line: row_idx + 2,
                message: format!("bad score: {e}"),
            })?;
        scores.push((name, value));
    }
    Ok(scores)
}

fn cmd_compare(args: CompareArgs) -> judgerank::Result<ExitCode> {
    let a = read_scores(&args.scores_a)?;
    let b = read_scores(&args.scores_b)?;
    let b_map: std::collections::HashMap<&str, f64> =
        b.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let mut names = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (name, x) in &a {
        if let Some(&y) = b_map.get(name.as_str()) {
            names.push(name.clone());
            xs.push(*x);
            ys.push(y);
        }
    }
    if names.len() < 2 {
        return Err(Error::LengthMismatch(names.len(), 2));
    }
    let agreement = judgerank::rank_agreement(&xs, &ys)?;
    println!("compared {} overlapping models", names.len());
    println!(
        "spearman {:.4}  pearson {:.4}  kendall {:.4}",
        agreement.spearman, agreement.pearson, agreement.kendall
    );

    // Rank movement table (rank 1 = highest score within the overlap).
    let rank_of = |v: &[f64]| {
        let ranks = inference::average_ranks(v);
        let n = v.len() as f64;
        ranks.iter().map(|r| n - r + 1.0).collect::<Vec<f64>>()
    };
    let ra = rank_of(&xs);
    let rb = rank_of(&ys);
    println!("model,rank_a,rank_b,delta");
    for i in 0..names.len() {
        println!("{},{},{},{}", names[i], ra[i], rb[i], rb[i] - ra[i]);
    }
    Ok(ExitCode::SUCCESS)
}
