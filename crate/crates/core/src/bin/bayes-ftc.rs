use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bayes_ftc::detection::{LogisticSettings, ResidualKind};
use bayes_ftc::faults::FaultType;
use bayes_ftc::harness::corpus::{score_residual, split_records};
use bayes_ftc::harness::output::{
    read_residuals, write_beliefs, write_json, write_mae_series, write_metrics, write_residuals, write_roc,
    write_timeseries, LabelledMetrics,
};
use bayes_ftc::harness::{
    generate_corpus, run_ensemble, run_merit, run_scenario, CorpusInfo, FaultSpec, FtTechnique, PlantKind,
    ScenarioConfig, TrajectoryKind, MERIT_TECHNIQUES,
};
use bayes_ftc::{Error, Result};

#[derive(Parser)]
#[command(name = "bayes-ftc", version, about = "Bayesian fault-tolerant control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One closed-loop run with full traces.
    Simulate(Common),
    /// Independent runs of one scenario.
    Ensemble(Common),
    /// Pairwise significance table over fault × trajectory scenarios.
    Merit(Common),
    /// Residual corpus from a long run under Poisson faults.
    Corpus(Common),
    /// Fit a logistic fault classifier on the training block of a corpus.
    TrainResidual {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        residual: ResidualArgs,
    },
    /// ROC of a trained classifier on the test block of a corpus.
    Roc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        residual: ResidualArgs,
        /// Model JSON (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// cruise | manipulator
    #[arg(long)]
    plant: Option<PlantKind>,
    /// NoFT | EF-FDI | SER-FT | PL-implicit | PL-explicit
    #[arg(long)]
    ft: Option<FtTechnique>,
    /// freeze | drift | injection | none | poisson
    #[arg(long)]
    fault: Option<String>,
    /// constant | ramp | sinusoid
    #[arg(long)]
    trajectory: Option<TrajectoryKind>,
    #[arg(long)]
    runs: Option<usize>,
    /// Simulated time (s).
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct ResidualArgs {
    /// Residual corpus CSV (default: <out>/residuals.csv).
    #[arg(long)]
    input: Option<PathBuf>,
    /// beta | ser | ef
    #[arg(long, default_value = "beta")]
    residual: ResidualKind,
    /// Train/test boundary (s); read from corpus.json next to the input by default.
    #[arg(long)]
    split: Option<f64>,
}

enum Fault {
    None,
    Poisson,
    Type(FaultType),
}

fn parse_fault(s: &str) -> Result<Fault> {
    match s.to_ascii_lowercase().as_str() {
        "none" => Ok(Fault::None),
        "poisson" => Ok(Fault::Poisson),
        other => other
            .parse::<FaultType>()
            .map(Fault::Type)
            .map_err(|_| Error::Config(format!("unknown fault '{s}' (freeze, drift, injection, none, poisson)"))),
    }
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(p) = self.plant {
            cfg.plant = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(ft) = self.ft {
            cfg.ft = ft;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = Some(h);
        }
        if let Some(t) = self.trajectory {
            if cfg.plant != PlantKind::Cruise {
                return Err(Error::Config("--trajectory applies to the cruise plant".into()));
            }
            cfg.goal = Some(t.cruise_goal());
        }
        if let Some(f) = &self.fault {
            cfg.faults = Some(match parse_fault(f)? {
                Fault::None => FaultSpec::None,
                Fault::Poisson => FaultSpec::Poisson {
                    mttf: cfg.corpus.mttf,
                    mttr: cfg.corpus.mttr,
                },
                Fault::Type(ty) => cfg.default_fault(ty),
            });
        }
        cfg.validate()?;
        std::fs::create_dir_all(&self.out)?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct EnsembleSummary<'a> {
    technique: &'a str,
    runs: usize,
    mean_rmse: f64,
    std_rmse: f64,
    mean_mse_belief: &'a [f64],
    std_mse_belief: &'a [f64],
    diverged_runs: usize,
}

/// Completed with some diverged runs.
struct Diverged(usize);

fn simulate(c: &Common) -> Result<Option<Diverged>> {
    let cfg = c.load()?;
    let out = run_scenario(&cfg)?;
    let label = cfg.ft.label();
    write_metrics(
        &c.out.join("metrics.csv"),
        &[LabelledMetrics {
            scenario: "single",
            technique: label,
            metrics: &out.metrics,
        }],
    )?;
    write_timeseries(&c.out.join("timeseries.csv"), &out.trace.timeseries)?;
    write_residuals(&c.out.join("residuals.csv"), &out.trace.residuals)?;
    write_beliefs(&c.out.join("beliefs.csv"), &out.trace.beliefs)?;
    write_json(&c.out.join("schedule.json"), &out.schedule)?;
    println!(
        "{label}: rmse_tracking {:.6} mse_belief {:?}{}",
        out.metrics.rmse_tracking,
        out.metrics.mse_belief,
        if out.metrics.diverged { " (diverged)" } else { "" }
    );
    Ok(out.metrics.diverged.then_some(Diverged(1)))
}

fn ensemble(c: &Common) -> Result<Option<Diverged>> {
    let cfg = c.load()?;
    let e = run_ensemble(&cfg, cfg.runs)?;
    let label = cfg.ft.label();
    let rows: Vec<_> = e
        .runs
        .iter()
        .map(|m| LabelledMetrics {
            scenario: "ensemble",
            technique: label,
            metrics: m,
        })
        .collect();
    write_metrics(&c.out.join("metrics.csv"), &rows)?;
    write_mae_series(&c.out.join("ensemble_mae.csv"), &e.mae_series, cfg.dt())?;
    write_json(
        &c.out.join("summary.json"),
        &EnsembleSummary {
            technique: label,
            runs: e.runs.len(),
            mean_rmse: e.mean_rmse,
            std_rmse: e.std_rmse,
            mean_mse_belief: &e.mean_mse_belief,
            std_mse_belief: &e.std_mse_belief,
            diverged_runs: e.diverged_runs,
        },
    )?;
    println!(
        "{label}: {} runs, rmse_tracking {:.6} ± {:.6}, mse_belief {:?}",
        e.runs.len(),
        e.mean_rmse,
        e.std_rmse,
        e.mean_mse_belief
    );
    Ok((e.diverged_runs > 0).then_some(Diverged(e.diverged_runs)))
}

fn merit(c: &Common) -> Result<Option<Diverged>> {
    if c.ft.is_some() {
        return Err(Error::Config("merit compares all techniques; --ft does not apply".into()));
    }
    let cfg = c.load()?;
    if cfg.plant != PlantKind::Cruise {
        return Err(Error::Config("merit runs on the cruise plant".into()));
    }
    let faults = match c.fault.as_deref().map(parse_fault).transpose()? {
        None => FaultType::ALL.to_vec(),
        Some(Fault::Type(ty)) => vec![ty],
        Some(_) => return Err(Error::Config("merit needs a fault type".into())),
    };
    let trajectories = c.trajectory.map_or(TrajectoryKind::ALL.to_vec(), |t| vec![t]);
    let report = run_merit(&cfg, &faults, &trajectories, &MERIT_TECHNIQUES)?;
    let rows: Vec<_> = report
        .ensembles
        .iter()
        .flat_map(|((name, ft), e)| {
            e.runs.iter().map(move |m| LabelledMetrics {
                scenario: name,
                technique: ft.label(),
                metrics: m,
            })
        })
        .collect();
    write_metrics(&c.out.join("metrics.csv"), &rows)?;
    write_json(&c.out.join("merit.json"), &report.table)?;
    let t = &report.table;
    println!("{:>12} {}", "", t.techniques.iter().map(|s| format!("{s:>12}")).collect::<String>());
    for (name, row) in t.techniques.iter().zip(&t.pairwise) {
        println!("{name:>12} {}", row.iter().map(|v| format!("{v:>12}")).collect::<String>());
    }
    println!("{:>12} {}", "total", t.total_merit.iter().map(|v| format!("{v:>12}")).collect::<String>());
    let diverged: usize = report.ensembles.values().map(|e| e.diverged_runs).sum();
    Ok((diverged > 0).then_some(Diverged(diverged)))
}

fn corpus(c: &Common) -> Result<Option<Diverged>> {
    let cfg = c.load()?;
    let corpus = generate_corpus(&cfg)?;
    write_residuals(&c.out.join("residuals.csv"), &corpus.records)?;
    write_json(&c.out.join("schedule.json"), &corpus.schedule)?;
    let info = corpus.info();
    write_json(&c.out.join("corpus.json"), &info)?;
    println!(
        "{} steps, {} faults, fault fraction {:.4}, train/test split at t = {}",
        info.steps, info.n_faults, info.fault_fraction, info.split_time
    );
    Ok(None)
}

fn load_split(r: &ResidualArgs, out: &Path) -> Result<(Vec<bayes_ftc::detection::ResidualRecord>, f64)> {
    let input = r.input.clone().unwrap_or_else(|| out.join("residuals.csv"));
    let records = read_residuals(&input)?;
    let split = match r.split {
        Some(s) => s,
        None => {
            let info_path = input.with_file_name("corpus.json");
            let text = std::fs::read_to_string(&info_path).map_err(|_| {
                Error::Config(format!("no --split given and {} not readable", info_path.display()))
            })?;
            serde_json::from_str::<CorpusInfo>(&text)?.split_time
        }
    };
    Ok((records, split))
}

fn train_residual(c: &Common, r: &ResidualArgs) -> Result<Option<Diverged>> {
    std::fs::create_dir_all(&c.out)?;
    let (records, split) = load_split(r, &c.out)?;
    let (train, test) = split_records(&records, split);
    let score = score_residual(r.residual, &train, &test, &LogisticSettings::default())?;
    write_json(&c.out.join("model.json"), &score.model)?;
    println!(
        "{}: slope {} intercept {} (train {} rows)",
        r.residual.name(),
        score.model.slope,
        score.model.intercept,
        train.len()
    );
    Ok(None)
}

fn roc(c: &Common, r: &ResidualArgs, model: &Option<PathBuf>) -> Result<Option<Diverged>> {
    std::fs::create_dir_all(&c.out)?;
    let (records, split) = load_split(r, &c.out)?;
    let model_path = model.clone().unwrap_or_else(|| c.out.join("model.json"));
    let text = std::fs::read_to_string(&model_path)
        .map_err(|_| Error::Config(format!("cannot read model {}", model_path.display())))?;
    let model: bayes_ftc::detection::LogisticModel = serde_json::from_str(&text)?;
    let (_, test) = split_records(&records, split);
    let scores: Vec<f64> = test.iter().map(|x| model.slope * r.residual.of(x) + model.intercept).collect();
    let labels: Vec<u8> = test.iter().map(|x| x.fault_truth).collect();
    let mut curve = bayes_ftc::detection::roc_auc(&scores, &labels)?;
    for p in &mut curve.points {
        if p.threshold.is_finite() {
            p.threshold = 1.0 / (1.0 + (-p.threshold).exp());
        }
    }
    write_roc(&c.out.join("roc.csv"), &curve)?;
    println!("{}: test AUC {:.4} ({} rows)", r.residual.name(), curve.auc, test.len());
    Ok(None)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Ensemble(c) => ensemble(c),
        Command::Merit(c) => merit(c),
        Command::Corpus(c) => corpus(c),
        Command::TrainResidual { common, residual } => train_residual(common, residual),
        Command::Roc {
            common,
            residual,
            model,
        } => roc(common, residual, model),
    };
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Diverged(n))) => {
            eprintln!("warning: {n} run(s) diverged");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_)
                | Error::UnknownSensor { .. }
                | Error::Json(_)
                | Error::Dimension(_)
                | Error::SingleClass { .. }
                | Error::EmptySample(_) => 2,
                Error::Unstable(_) => 3,
                _ => 1,
            })
        }
    }
}
