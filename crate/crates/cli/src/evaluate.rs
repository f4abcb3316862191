//! Sweeps over seeds, k values, record counts, and attribute subsets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anonaudit_core::anonymizer::Dataset;
use anonaudit_core::audit::run_cell;
use anonaudit_core::data_io::{generate_synthetic, DatasetConfig};
use anonaudit_core::domain::{HierarchySpec, SegmentGrid};
use anonaudit_core::fpso::Category;
use anonaudit_core::metrics::{aggregate_report, RunMetrics};
use anonaudit_core::Execution;
use serde::{Deserialize, Serialize};

use crate::report::CategoryCounts;
use crate::{limits, load_config, write_json, Failure};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: Option<String>,
    /// Relative paths resolve against the manifest's directory.
    pub config: PathBuf,
    pub seeds: Vec<u64>,
    pub k: Vec<usize>,
    /// Attribute names per subset; all configured attributes if empty.
    #[serde(default)]
    pub attribute_subsets: Vec<Vec<String>>,
    /// Record counts; the config's `n` if empty.
    #[serde(default)]
    pub n: Vec<usize>,
    pub max_solutions: Option<usize>,
    pub time_budget: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Cell {
    dataset: String,
    n: usize,
    attributes: Vec<usize>,
    seed: u64,
    k: usize,
}

#[derive(Debug, Clone, Serialize)]
struct RunRecord {
    n: usize,
    attributes: Vec<String>,
    metrics: RunMetrics,
    fpso: CategoryCounts,
}

struct CellResult {
    record: RunRecord,
    anonymize_seconds: f64,
    attack_seconds: f64,
    slowest_target_seconds: f64,
}

fn relative_to(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("manifest {} not found", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn subsets(manifest: &Manifest, config: &DatasetConfig) -> Result<Vec<Vec<usize>>, Failure> {
    let names = config.names();
    if manifest.attribute_subsets.is_empty() {
        return Ok(vec![(0..names.len()).collect()]);
    }
    manifest
        .attribute_subsets
        .iter()
        .map(|subset| {
            if subset.is_empty() {
                return Err(Failure::Usage("empty attribute subset".into()));
            }
            subset
                .iter()
                .map(|a| {
                    names
                        .iter()
                        .position(|n| n == a)
                        .ok_or_else(|| Failure::Usage(format!("attribute {a} is not in the config")))
                })
                .collect()
        })
        .collect()
}

fn project(data: &Dataset, columns: &[usize]) -> Dataset {
    let names = columns.iter().map(|&c| data.names()[c].clone()).collect();
    let records = data
        .records()
        .iter()
        .map(|r| columns.iter().map(|&c| r[c]).collect())
        .collect();
    Dataset::new(names, records).expect("projected arity matches")
}

fn fpso_counts(run: &anonaudit_core::audit::RunOutcome) -> CategoryCounts {
    let mut counts = CategoryCounts::default();
    for f in &run.fpso {
        match f {
            Some(Ok(r)) => counts.add(r.category),
            Some(Err(_)) => counts.add(Category::Failed),
            None => {}
        }
    }
    counts.skipped = run
        .outcomes
        .iter()
        .zip(&run.fpso)
        .filter(|(o, f)| matches!(o.target, anonaudit_core::Target::Class(_)) && f.is_none())
        .count();
    counts
}

pub fn run(manifest_path: &Path, max_solutions: Option<usize>, time_budget: Option<f64>, out: Option<&Path>) -> Result<(), Failure> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let config = load_config(&relative_to(base, &manifest.config))?;
    let defaults = anonaudit_core::EnumerationLimits::default();
    let limits = limits(
        max_solutions.or(manifest.max_solutions).unwrap_or(defaults.max_solutions),
        time_budget.or(manifest.time_budget).unwrap_or(defaults.time_budget.as_secs_f64()),
    )?;
    let out_dir = match (out, &manifest.out) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => relative_to(base, o),
        (None, None) => return Err(Failure::Usage("no output directory given".into())),
    };
    if manifest.seeds.is_empty() || manifest.k.is_empty() || manifest.k.contains(&0) {
        return Err(Failure::Usage("the manifest needs seeds and positive k values".into()));
    }
    let subsets = subsets(&manifest, &config)?;
    let ns = if manifest.n.is_empty() { vec![config.n] } else { manifest.n.clone() };
    let name = manifest.name.clone().or_else(|| config.name.clone()).unwrap_or_else(|| "synthetic".into());
    let names = config.names();

    let mut cells = Vec::new();
    for &n in &ns {
        for subset in &subsets {
            let mut dataset = name.clone();
            if ns.len() > 1 {
                dataset.push_str(&format!("_n{n}"));
            }
            if subsets.len() > 1 {
                let attrs: Vec<&str> = subset.iter().map(|&c| names[c].as_str()).collect();
                dataset.push_str(&format!("_{}", attrs.join("+")));
            }
            for &seed in &manifest.seeds {
                for &k in &manifest.k {
                    cells.push(Cell {
                        dataset: dataset.clone(),
                        n,
                        attributes: subset.clone(),
                        seed,
                        k,
                    });
                }
            }
        }
    }

    let results: Vec<Result<CellResult, String>> = Execution::Parallel.map(&cells, |cell| {
        let mut cfg = config.clone();
        cfg.n = cell.n;
        let full = generate_synthetic(&cfg, cell.seed).map_err(|e| e.to_string())?;
        let data = project(&full, &cell.attributes);
        let specs: Vec<HierarchySpec> = cell.attributes.iter().map(|&c| config.attributes[c].clone()).collect();
        let grid = SegmentGrid::from_specs(&specs).map_err(|e| e.to_string())?;
        let run = run_cell(&data, &grid, cell.k, &limits, Execution::Parallel).map_err(|e| e.to_string())?;
        Ok(CellResult {
            record: RunRecord {
                n: cell.n,
                attributes: data.names().to_vec(),
                metrics: run.metrics(&cell.dataset, cell.seed),
                fpso: fpso_counts(&run),
            },
            anonymize_seconds: run.anonymize_time.as_secs_f64(),
            attack_seconds: run.attack_time.as_secs_f64(),
            slowest_target_seconds: run.outcomes.iter().map(|o| o.runtime.as_secs_f64()).fold(0.0, f64::max),
        })
    });

    std::fs::create_dir_all(&out_dir).map_err(|e| Failure::Data(format!("{}: {e}", out_dir.display())))?;
    let mut records = Vec::new();
    let mut runtime = Table::new(&["dataset", "num_qis", "k", "seed", "anonymize_seconds", "attack_seconds", "slowest_target_seconds"]);
    let mut failures = Table::new(&["dataset", "num_qis", "k", "seed", "n", "error"]);
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(r) => {
                runtime.row(vec![
                    cell.dataset.clone(),
                    cell.attributes.len().to_string(),
                    cell.k.to_string(),
                    cell.seed.to_string(),
                    format!("{:.6}", r.anonymize_seconds),
                    format!("{:.6}", r.attack_seconds),
                    format!("{:.6}", r.slowest_target_seconds),
                ]);
                records.push(r.record);
            }
            Err(e) => failures.row(vec![
                cell.dataset.clone(),
                cell.attributes.len().to_string(),
                cell.k.to_string(),
                cell.seed.to_string(),
                cell.n.to_string(),
                e,
            ]),
        }
    }

    let metrics: Vec<RunMetrics> = records.iter().map(|r| r.metrics.clone()).collect();
    let aggregate = aggregate_report(&metrics);
    let mut cra = Table::new(&["dataset", "num_qis", "k", "lr_solutions_mean", "cra_solutions_mean", "cra_ratio_mean"]);
    let mut combos = Table::new(&["dataset", "num_qis", "k", "runs", "solution_count_mean", "classes_mean", "partial_classes"]);
    let mut shares = Table::new(&["dataset", "num_qis", "k", "basic_share", "compound_share"]);
    for row in &aggregate {
        let key = || vec![row.dataset.clone(), row.num_qis.to_string(), row.k.to_string()];
        cra.row([key(), vec![num(row.lr_solutions_mean), num(row.cra_solutions_mean), num(row.cra_ratio_mean)]].concat());
        combos.row(
            [
                key(),
                vec![
                    row.runs.to_string(),
                    num(row.solution_count_mean),
                    num(row.classes_mean),
                    row.partial_classes.to_string(),
                ],
            ]
            .concat(),
        );
        shares.row([key(), vec![num(row.basic_share), num(1.0 - row.basic_share)]].concat());
    }

    let mut outliers = Table::new(&[
        "dataset",
        "num_qis",
        "k",
        "outlier_count_mean",
        "attacked_runs",
        "lr_solutions_mean",
        "cra_solutions_mean",
        "cra_ratio_mean",
    ]);
    let mut fpso = Table::new(&["dataset", "num_qis", "k", "failed", "single_1", "single_many", "skipped"]);
    let mut by_cell: BTreeMap<(String, usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in &records {
        by_cell
            .entry((r.metrics.dataset.clone(), r.metrics.num_qis, r.metrics.k))
            .or_default()
            .push(r);
    }
    for ((dataset, num_qis, k), runs) in &by_cell {
        let key = vec![dataset.clone(), num_qis.to_string(), k.to_string()];
        let attacked: Vec<_> = runs.iter().filter_map(|r| r.metrics.outliers.as_ref()).collect();
        let mean = |f: &dyn Fn(&&anonaudit_core::metrics::ClassMetrics) -> f64| {
            if attacked.is_empty() {
                f64::NAN
            } else {
                attacked.iter().map(f).sum::<f64>() / attacked.len() as f64
            }
        };
        let count_mean = runs.iter().map(|r| r.metrics.outlier_count as f64).sum::<f64>() / runs.len() as f64;
        outliers.row(
            [
                key.clone(),
                vec![
                    num(count_mean),
                    attacked.len().to_string(),
                    num(mean(&|c| c.lr_solutions)),
                    num(mean(&|c| c.cra_solutions)),
                    num(mean(&|c| c.cra_ratio)),
                ],
            ]
            .concat(),
        );
        let mut total = CategoryCounts::default();
        for r in runs {
            total.failed += r.fpso.failed;
            total.single_1 += r.fpso.single_1;
            total.single_many += r.fpso.single_many;
            total.skipped += r.fpso.skipped;
        }
        fpso.row(
            [
                key,
                vec![
                    total.failed.to_string(),
                    total.single_1.to_string(),
                    total.single_many.to_string(),
                    total.skipped.to_string(),
                ],
            ]
            .concat(),
        );
    }

    for (file, table) in [
        ("cra_ratio.csv", &cra),
        ("combinations.csv", &combos),
        ("outliers.csv", &outliers),
        ("segment_shares.csv", &shares),
        ("fpso.csv", &fpso),
        ("runtime.csv", &runtime),
        ("failures.csv", &failures),
    ] {
        table.save(&out_dir.join(file))?;
    }
    write_json(&out_dir.join("runs.json"), &records)?;
    eprintln!(
        "{} runs, {} failed cells, tables in {}",
        records.len(),
        failures.rows.len(),
        out_dir.display()
    );
    Ok(())
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6e}")
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn save(&self, path: &Path) -> Result<(), Failure> {
        let io = |e: csv::Error| Failure::Data(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
    }
}
