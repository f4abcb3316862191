mod evaluate;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anonaudit_core::anonymizer::Anonymizer;
use anonaudit_core::attack::attack_all;
use anonaudit_core::data_io::{
    generate_synthetic, load_csv, read_anonymized, save_csv, write_anonymized, DataIoError, DatasetConfig, Metadata,
};
use anonaudit_core::domain::SegmentGrid;
use anonaudit_core::enumerator::{Assignment, EnumerationLimits};
use anonaudit_core::fpso::{find_valid, single_out, FpsoError};
use anonaudit_core::Execution;
use clap::{Parser, Subcommand};

use report::{attack_report, fpso_class_report, AttackReport, CategoryCounts, FpsoClassReport, FpsoReport, Status};

#[derive(Parser)]
#[command(name = "anonaudit", version, about = "k-anonymize numeric microdata and audit the result")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset described by a config file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the record count in the config.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Anonymize a CSV; writes <out>.csv and <out>.meta.json.
    Anonymize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Move repeated values to the nearest unused value instead of failing.
        #[arg(long)]
        jitter: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attack an anonymized CSV using only its intervals, k, and the hierarchies.
    Attack {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Metadata to cross-check against the data file; never used by the attack.
        #[arg(long)]
        metadata: Option<PathBuf>,
        #[arg(long, default_value_t = EnumerationLimits::default().max_solutions)]
        max_solutions: usize,
        /// Seconds per target.
        #[arg(long, default_value_t = EnumerationLimits::default().time_budget.as_secs_f64())]
        time_budget: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check attack solutions against the original data and single out records.
    Fpso {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        jitter: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sweep over seeds, k values, and attribute subsets.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        max_solutions: Option<usize>,
        #[arg(long)]
        time_budget: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Alarm(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Alarm(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Data(m) => write!(f, "{m}"),
            Failure::Alarm(m) => write!(f, "soundness alarm: {m}"),
        }
    }
}

impl From<DataIoError> for Failure {
    fn from(e: DataIoError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn data_err(e: impl fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

pub fn load_config(path: &Path) -> Result<DatasetConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("config file {} not found", path.display())));
    }
    DatasetConfig::load(path).map_err(data_err)
}

fn grid_of(config: &DatasetConfig) -> Result<SegmentGrid, Failure> {
    config.grid().map_err(data_err)
}

fn resolve_k(flag: Option<usize>, config: &DatasetConfig) -> Result<usize, Failure> {
    flag.or(config.k)
        .ok_or_else(|| Failure::Usage("--k is required when the config has no k".into()))
}

pub fn limits(max_solutions: usize, time_budget: f64) -> Result<EnumerationLimits, Failure> {
    if max_solutions == 0 || !time_budget.is_finite() || time_budget <= 0.0 {
        return Err(Failure::Usage("limits must be positive".into()));
    }
    Ok(EnumerationLimits {
        max_solutions,
        time_budget: Duration::from_secs_f64(time_budget),
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let file = std::fs::File::create(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    serde_json::to_writer_pretty(file, value).map_err(data_err)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn generate(config: &Path, seed: Option<u64>, n: Option<usize>, out: &Path) -> Result<(), Failure> {
    let mut config = load_config(config)?;
    if let Some(n) = n {
        config.n = n;
    }
    if config.n == 0 {
        return Err(Failure::Usage("the record count must be positive".into()));
    }
    let data = generate_synthetic(&config, seed.or(config.seed).unwrap_or(0))?;
    save_csv(&data, out)?;
    Ok(())
}

fn anonymize(data: &Path, config: &Path, k: Option<usize>, jitter: bool, out: &Path) -> Result<(), Failure> {
    let config = load_config(config)?;
    let k = resolve_k(k, &config)?;
    let grid = grid_of(&config)?;
    let data = load_csv(data, &grid, jitter)?;
    let anon = Anonymizer::new(grid).local_recode(&data, k).map_err(data_err)?;
    write_anonymized(&anon, &with_suffix(out, ".csv"), &with_suffix(out, ".meta.json"))?;
    eprintln!(
        "{} classes, {} suppressed records",
        anon.classes.len(),
        anon.outliers.len()
    );
    Ok(())
}

fn attack(
    data: &Path,
    config: &Path,
    k: Option<usize>,
    metadata: Option<&Path>,
    limits: EnumerationLimits,
    out: &Path,
) -> Result<(), Failure> {
    let config = load_config(config)?;
    let k = resolve_k(k, &config)?;
    let grid = grid_of(&config)?;
    let release = read_anonymized(data, &grid, k)?;
    if let Some(meta) = metadata {
        Metadata::load(meta)?.check(&release)?;
    }
    let started = Instant::now();
    let outcomes = attack_all(&release, &limits, Execution::Parallel).map_err(data_err)?;
    let (report, alarm) = attack_report(&release, &outcomes, started.elapsed().as_secs_f64());
    write_json(out, &report)?;
    let partial = report.targets.iter().filter(|t| t.status != Status::Exhausted).count();
    eprintln!("{} targets attacked, {partial} cut short", report.targets.len());
    if alarm {
        return Err(Failure::Alarm("an exhausted target has no plausible placement".into()));
    }
    Ok(())
}

fn fpso(report_path: &Path, original: &Path, jitter: bool, out: &Path) -> Result<(), Failure> {
    let file = std::fs::File::open(report_path).map_err(|e| data_err(format!("{}: {e}", report_path.display())))?;
    let report: AttackReport = serde_json::from_reader(file).map_err(data_err)?;
    let grid = SegmentGrid::from_specs(&report.hierarchies).map_err(data_err)?;
    let data = load_csv(original, &grid, jitter)?;
    if data.len() != report.row_count {
        return Err(Failure::Data(format!(
            "original has {} records, the attacked release has {}",
            data.len(),
            report.row_count
        )));
    }
    let mut classes = Vec::new();
    let mut categories = CategoryCounts::default();
    let mut alarms = Vec::new();
    for t in report.targets.iter().filter(|t| t.kind == "class") {
        let class = t.class_index.unwrap_or_default();
        if t.status != Status::Exhausted {
            categories.skipped += 1;
            classes.push(FpsoClassReport {
                class_index: class,
                status: "skipped".into(),
                valid_assignment: None,
                category: None,
                singled_out: Vec::new(),
            });
            continue;
        }
        let solutions: Vec<Assignment> = t.solutions.iter().cloned().map(Assignment).collect();
        match find_valid(&solutions, &data, &t.row_indices, &grid) {
            Ok(valid) => {
                let result = single_out(class, &valid, &data, &t.row_indices, &grid);
                categories.add(result.category);
                classes.push(fpso_class_report(&result));
            }
            Err(e) => {
                if let FpsoError::MultipleValid(all) = &e {
                    eprintln!("class {class}: valid assignments {:?}", all.iter().map(|a| &a.0).collect::<Vec<_>>());
                }
                alarms.push(format!("class {class}: {e}"));
                classes.push(FpsoClassReport {
                    class_index: class,
                    status: e.to_string(),
                    valid_assignment: None,
                    category: None,
                    singled_out: Vec::new(),
                });
            }
        }
    }
    write_json(
        out,
        &FpsoReport {
            version: report::REPORT_VERSION,
            classes,
            categories: categories.clone(),
        },
    )?;
    eprintln!(
        "failed {}, single_1 {}, single_many {}, skipped {}",
        categories.failed, categories.single_1, categories.single_many, categories.skipped
    );
    if !alarms.is_empty() {
        return Err(Failure::Alarm(alarms.join("; ")));
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("ANONAUDIT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Usage(format!("ANONAUDIT_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() -> Result<(), Failure> {
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Generate { config, seed, n, out } => generate(&config, seed, n, &out),
        Command::Anonymize {
            data,
            config,
            k,
            jitter,
            out,
        } => anonymize(&data, &config, k, jitter, &out),
        Command::Attack {
            data,
            config,
            k,
            metadata,
            max_solutions,
            time_budget,
            out,
        } => attack(&data, &config, k, metadata.as_deref(), limits(max_solutions, time_budget)?, &out),
        Command::Fpso {
            report,
            original,
            jitter,
            out,
        } => fpso(&report, &original, jitter, &out),
        Command::Evaluate {
            manifest,
            max_solutions,
            time_budget,
            out,
        } => evaluate::run(&manifest, max_solutions, time_budget, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
