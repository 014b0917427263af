//! Command-line front end: detection runs, method comparisons, enumeration
//! and counterexample reports, the variance table and the complexity probe.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 compute error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use irf::bench::{
    diff_table, run_experiment, FpNormalization, LabelSource, Method, RunConfig, TrialBudget,
};
use irf::dataset::{load_csv, CsvConfig, OutlierParams, SampleSet};
use irf::dirf::{dirf_complexity_probe, dirf_estimate, fitted_exponent};
use irf::error::Error;
use irf::forest::{
    flag_anomalies, irf_estimate, trials_from_confidence, ConfidenceLevel, HeightEstimate,
    ThresholdCriterion,
};
use irf::monotone::{variance_regression, MonotonePartition, VarianceSource};
use irf::oracle::{
    build_counterexample, cardinality_formula, counterexample_mc_check, enumerate_irf,
    enumerate_mrf,
};

#[derive(Parser)]
#[command(name = "irf", about = "Isolation random forest anomaly detection and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Irf,
    Dirf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfidenceArg {
    #[value(name = "90")]
    C90,
    #[value(name = "95")]
    C95,
}

impl From<ConfidenceArg> for ConfidenceLevel {
    fn from(c: ConfidenceArg) -> Self {
        match c {
            ConfidenceArg::C90 => ConfidenceLevel::P90,
            ConfidenceArg::C95 => ConfidenceLevel::P95,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Feature columns (default: every column not used as label or id).
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Column holding record identifiers.
    #[arg(long)]
    id_col: Option<String>,
    /// Column holding ground-truth labels.
    #[arg(long)]
    label_col: Option<String>,
    /// Label value marking an anomaly (default "1").
    #[arg(long, requires = "label_col")]
    positive_class: Option<String>,
    /// Radius of the distance-based outlier rule.
    #[arg(long, conflicts_with = "label_col")]
    outlier_r: Option<f64>,
    /// Fraction of the distance-based outlier rule.
    #[arg(long, requires = "outlier_r")]
    outlier_p: Option<f64>,
}

impl DataArgs {
    fn csv_config(&self) -> CsvConfig {
        CsvConfig {
            feature_columns: self.features.clone(),
            label_column: self.label_col.clone(),
            positive_class: self
                .label_col
                .as_ref()
                .map(|_| self.positive_class.clone().unwrap_or_else(|| "1".into())),
            id_column: self.id_col.clone(),
        }
    }

    fn label_source(&self) -> Result<LabelSource, Error> {
        if let Some(name) = &self.label_col {
            Ok(LabelSource::Column {
                name: name.clone(),
                positive: self.positive_class.clone().unwrap_or_else(|| "1".into()),
            })
        } else if let Some(r) = self.outlier_r {
            let p = self.outlier_p.ok_or_else(|| {
                Error::InvalidParameter("--outlier-r requires --outlier-p".into())
            })?;
            Ok(LabelSource::Distance(OutlierParams::new(r, p)?))
        } else {
            Ok(LabelSource::None)
        }
    }
}

#[derive(Args)]
struct BudgetArgs {
    /// Explicit number of trees per estimate.
    #[arg(long, conflicts_with = "confidence")]
    trees: Option<u64>,
    /// Derive the tree count from a confidence level.
    #[arg(long)]
    confidence: Option<ConfidenceArg>,
}

impl BudgetArgs {
    fn budget(&self) -> TrialBudget {
        match (self.trees, self.confidence) {
            (Some(k), _) => TrialBudget::Explicit(k),
            (None, Some(c)) => TrialBudget::Confidence(c.into()),
            (None, None) => TrialBudget::Confidence(ConfidenceLevel::P90),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score a dataset with one method and list the flagged points.
    Detect {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Threshold quantile in percent.
        #[arg(long, default_value = "5")]
        quantiles: f64,
        /// 1-based PCA components (DIRF only; default: all).
        #[arg(long, value_delimiter = ',')]
        components: Option<Vec<usize>>,
        #[arg(long, default_value = "0")]
        seed: u64,
        /// Score file (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Run both methods over a (component, quantile) grid and emit the
    /// difference table.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,3,4,5,6,7")]
        quantiles: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        components: Option<Vec<usize>>,
        #[arg(long, default_value = "0")]
        seed: u64,
        /// Normalize false positives by the dataset size instead of the
        /// flagged count.
        #[arg(long)]
        fp_over_dataset: bool,
        /// Difference-table file (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Exact enumeration and counterexample reports (JSON).
    Oracle {
        /// Enumerate the isolation trees of this CSV (small sets only).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Feature columns for --input.
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        /// Enumerate the monotone trees of these interval lengths.
        #[arg(long, value_delimiter = ',', conflicts_with = "input")]
        intervals: Option<Vec<f64>>,
        /// Run the two-configuration counterexample comparison.
        #[arg(long, conflicts_with_all = ["input", "intervals"])]
        counterexample: bool,
        /// Trials for the counterexample Monte Carlo check.
        #[arg(long, default_value = "100000")]
        trees: u64,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Maximum per-interval depth variance on equidistant partitions.
    VarianceTable {
        #[arg(long, value_delimiter = ',', default_value = "3,9,27")]
        sizes: Vec<usize>,
        /// Trials for sizes beyond the enumeration limit.
        #[arg(long, default_value = "200000")]
        trees: u64,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time DIRF end to end over growing synthetic datasets.
    ProbeComplexity {
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve_trials(s: &SampleSet, budget: &BudgetArgs) -> Result<u64, Error> {
    match budget.budget() {
        TrialBudget::Explicit(k) => Ok(k),
        TrialBudget::Confidence(level) => trials_from_confidence(s, level),
    }
}

fn scores_json(s: &SampleSet, est: &HeightEstimate, flags: &[usize]) -> serde_json::Value {
    json!({
        "trials": est.trials,
        "seed": est.seed,
        "scores": (0..est.len()).map(|i| json!({
            "id": s.id_of(i),
            "mean_depth": est.mean_depth[i],
            "sample_variance": est.sample_variance[i],
        })).collect::<Vec<_>>(),
        "flagged": flags.iter().map(|&i| s.id_of(i)).collect::<Vec<_>>(),
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Detect {
            data,
            method,
            budget,
            quantiles,
            components,
            seed,
            output,
            format,
        } => {
            let s = load_csv(&data.input, &data.csv_config())?;
            let trials = resolve_trials(&s, &budget)?;
            let est = match method {
                MethodArg::Irf => irf_estimate(&s, trials, seed)?,
                MethodArg::Dirf => {
                    let comps =
                        components.unwrap_or_else(|| (1..=s.dim()).collect());
                    dirf_estimate(&s, &comps, trials, seed)?
                }
            };
            let flags = flag_anomalies(&est, &ThresholdCriterion::new(quantiles)?);
            match format {
                FormatArg::Csv => {
                    let mut buf = Vec::new();
                    est.write_csv(&s, &mut buf)?;
                    emit(&output, &String::from_utf8(buf).expect("ascii csv"))?;
                    let ids: Vec<String> = flags.iter().map(|&i| s.id_of(i)).collect();
                    eprintln!("flagged: {}", ids.join(","));
                }
                FormatArg::Json => {
                    let doc = scores_json(&s, &est, &flags);
                    emit(&output, &format!("{:#}\n", doc))?;
                }
            }
            Ok(())
        }
        Command::Compare {
            data,
            budget,
            quantiles,
            components,
            seed,
            fp_over_dataset,
            output,
            format,
        } => {
            let label_source = data.label_source()?;
            let probe = load_csv(&data.input, &data.csv_config())?;
            let components = components.unwrap_or_else(|| (1..=probe.dim()).collect());
            let base = RunConfig {
                input: data.input.clone(),
                feature_columns: data.features.clone(),
                id_column: data.id_col.clone(),
                method: Method::Irf,
                quantiles,
                components,
                trials: budget.budget(),
                seed,
                label_source,
                fp_normalization: if fp_over_dataset {
                    FpNormalization::Dataset
                } else {
                    FpNormalization::Flagged
                },
            };
            let irf_report = run_experiment(&base)?;
            let dirf_report = run_experiment(&RunConfig {
                method: Method::Dirf,
                ..base
            })?;
            let diff = diff_table(&irf_report, &dirf_report)?;
            match format {
                FormatArg::Csv => emit(&output, &diff.render())?,
                FormatArg::Json => {
                    let doc = json!({
                        "irf": irf_report,
                        "dirf": dirf_report,
                        "diff_irf_minus_dirf": diff,
                    });
                    emit(&output, &format!("{:#}\n", doc))?;
                }
            }
            Ok(())
        }
        Command::Oracle {
            input,
            features,
            intervals,
            counterexample,
            trees,
            seed,
            output,
        } => {
            let doc = if let Some(path) = input {
                let cfg = CsvConfig {
                    feature_columns: features,
                    label_column: None,
                    positive_class: None,
                    id_column: None,
                };
                let s = load_csv(&path, &cfg)?;
                let forest = enumerate_irf(&s)?;
                json!({
                    "kind": "isolation_tree_enumeration",
                    "points": s.len(),
                    "dim": s.dim(),
                    "count": forest.count(),
                    "cardinality_formula": cardinality_formula(s.len(), s.dim())?.to_string(),
                    "total_probability": forest.total_probability,
                    "trees": forest.entries,
                })
            } else if let Some(lengths) = intervals {
                let p = MonotonePartition::from_lengths(&lengths)?;
                let forest = enumerate_mrf(&p)?;
                json!({
                    "kind": "monotone_tree_enumeration",
                    "intervals": p.len(),
                    "count": forest.count(),
                    "total_probability": forest.total_probability,
                    "trees": forest.entries,
                })
            } else if counterexample {
                // Near-degenerate first corner with a geometric tail: the
                // two distances differ by orders of magnitude while the
                // expected origin depths stay close.
                let mut grid = vec![1e-4, 1.0];
                for i in 0..8 {
                    grid.push(2f64.powi(i + 1));
                }
                let pair = build_counterexample(&grid, &grid)?;
                let report = counterexample_mc_check(&pair, trees, seed)?;
                json!({
                    "kind": "counterexample",
                    "grid": grid,
                    "distance_ratio": report.d2 / report.d1,
                    "report": report,
                })
            } else {
                return Err(Error::InvalidParameter(
                    "oracle needs --input, --intervals or --counterexample".into(),
                ));
            };
            emit(&output, &format!("{:#}\n", doc))
        }
        Command::VarianceTable {
            sizes,
            trees,
            seed,
            output,
        } => {
            let mut text = String::from("n,max_variance,argmax,source,ci_half_width,regression\n");
            for n in sizes {
                let (mv, source) = if n <= irf::oracle::MRF_ENUMERATION_LIMIT {
                    (
                        max_variance(n, VarianceSource::Oracle)?,
                        "enumeration",
                    )
                } else {
                    (
                        max_variance(n, VarianceSource::MonteCarlo { trials: trees, seed })?,
                        "monte_carlo",
                    )
                };
                let regression = variance_regression(n)
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                text.push_str(&format!(
                    "{n},{},{},{source},{},{regression}\n",
                    mv.value,
                    mv.argmax,
                    mv.ci_half_width.map(|c| c.to_string()).unwrap_or_default(),
                ));
            }
            emit(&output, &text)
        }
        Command::ProbeComplexity { sizes, seed, output } => {
            let rows = dirf_complexity_probe(&sizes, seed)?;
            let mut text = String::from("n,trials,wall_seconds,tree_nodes\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    r.n, r.trials, r.wall_seconds, r.tree_nodes
                ));
            }
            if rows.len() >= 2 {
                text.push_str(&format!(
                    "# fitted exponent vs n*log(n): {:.4}\n",
                    fitted_exponent(&rows)?
                ));
            }
            emit(&output, &text)
        }
    }
}

fn max_variance(n: usize, source: VarianceSource) -> Result<irf::monotone::MaxVariance, Error> {
    irf::monotone::max_variance_equidistant(n, source)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. }
        | Error::Csv(_)
        | Error::MissingColumn(_)
        | Error::NonNumericCell { .. }
        | Error::InconsistentRow { .. }
        | Error::EmptyDataset => 3,
        Error::InvalidParameter(_) => 2,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
