//! End-to-end runs: anonymize, attack every target, count, and single out.

use std::time::{Duration, Instant};

use num_bigint::BigUint;

use crate::anonymizer::{AnonymizeError, AnonymizedDataset, Anonymizer, Dataset};
use crate::attack::{attack_all, AttackError, AttackOutcome, Target};
use crate::domain::SegmentGrid;
use crate::enumerator::EnumerationLimits;
use crate::exec::Execution;
use crate::fpso::{find_valid, single_out, FpsoClassResult, FpsoError};
use crate::metrics::{
    big_to_f64, cra_ratio, cra_solutions_of, lr_solutions, volume, ClassMetrics, CraRatio, MetricsError, RunMetrics,
};
use crate::release::Release;

/// Counts for one attacked target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetScore {
    pub size: usize,
    pub volume: BigUint,
    pub lr: Result<BigUint, MetricsError>,
    /// Missing when the enumeration was cut short.
    pub cra: Option<BigUint>,
    pub ratio: Option<Result<CraRatio, MetricsError>>,
}

/// Rows of the release that belong to `target`.
pub fn target_rows(release: &Release, target: Target) -> &[usize] {
    match target {
        Target::Class(c) => &release.classes[c].rows,
        Target::Outliers => &release.outlier_rows,
    }
}

pub fn score(release: &Release, outcome: &AttackOutcome) -> TargetScore {
    let grid = &release.grid;
    let seg = match outcome.target {
        Target::Class(c) => release.classes[c].segment.clone(),
        Target::Outliers => grid.top(),
    };
    let size = target_rows(release, outcome.target).len();
    let volume = volume(grid, &seg);
    let lr = lr_solutions(&volume, size as u64);
    let cra = outcome.exhausted().then(|| cra_solutions_of(outcome.solutions(), grid));
    let ratio = match (&lr, &cra) {
        (Ok(lr), Some(cra)) => Some(cra_ratio(lr, cra)),
        _ => None,
    };
    TargetScore {
        size,
        volume,
        lr,
        cra,
        ratio,
    }
}

/// FPSO on one class outcome. Members are the class's release rows, which
/// are also indices into the original dataset.
pub fn fpso_for(
    release: &Release,
    outcome: &AttackOutcome,
    original: &Dataset,
) -> Option<Result<FpsoClassResult, FpsoError>> {
    let Target::Class(c) = outcome.target else {
        return None;
    };
    if !outcome.exhausted() {
        return None;
    }
    let members = &release.classes[c].rows;
    Some(
        find_valid(outcome.solutions(), original, members, &release.grid)
            .map(|valid| single_out(c, &valid, original, members, &release.grid)),
    )
}

#[derive(Debug)]
pub struct RunOutcome {
    pub anon: AnonymizedDataset,
    pub release: Release,
    pub outcomes: Vec<AttackOutcome>,
    pub scores: Vec<TargetScore>,
    pub fpso: Vec<Option<Result<FpsoClassResult, FpsoError>>>,
    pub anonymize_time: Duration,
    pub attack_time: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Anonymize(#[from] AnonymizeError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

/// Anonymizes `data`, attacks the release, and runs FPSO against `data`.
pub fn run_cell(
    data: &Dataset,
    grid: &SegmentGrid,
    k: usize,
    limits: &EnumerationLimits,
    exec: Execution,
) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let anon = Anonymizer::new(grid.clone()).with_execution(exec).local_recode(data, k)?;
    let anonymize_time = started.elapsed();
    let release = anon.release();
    let started = Instant::now();
    let outcomes = attack_all(&release, limits, exec)?;
    let attack_time = started.elapsed();
    let scores = outcomes.iter().map(|o| score(&release, o)).collect();
    let fpso = outcomes.iter().map(|o| fpso_for(&release, o, data)).collect();
    Ok(RunOutcome {
        anon,
        release,
        outcomes,
        scores,
        fpso,
        anonymize_time,
        attack_time,
    })
}

fn class_metrics(outcome: &AttackOutcome, score: &TargetScore, basic: bool) -> Option<ClassMetrics> {
    let (Ok(lr), Some(cra), Some(Ok(ratio))) = (&score.lr, &score.cra, &score.ratio) else {
        return None;
    };
    Some(ClassMetrics {
        lr_solutions: big_to_f64(lr),
        cra_solutions: big_to_f64(cra),
        cra_ratio: ratio.approx,
        solution_count: outcome.solutions().len(),
        basic,
    })
}

impl RunOutcome {
    pub fn metrics(&self, dataset: &str, seed: u64) -> RunMetrics {
        let mut classes = Vec::new();
        let mut partial_classes = 0;
        let mut outliers = None;
        for (o, s) in self.outcomes.iter().zip(&self.scores) {
            match o.target {
                Target::Class(c) => {
                    let basic = self.release.classes[c].segment.is_basic();
                    match class_metrics(o, s, basic) {
                        Some(m) => classes.push(m),
                        None => partial_classes += 1,
                    }
                }
                Target::Outliers => outliers = class_metrics(o, s, false),
            }
        }
        RunMetrics {
            dataset: dataset.to_string(),
            num_qis: self.release.grid.dims(),
            k: self.release.k,
            seed,
            classes,
            partial_classes,
            outlier_count: self.release.outlier_count(),
            outliers,
        }
    }
}
