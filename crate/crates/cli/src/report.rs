//! JSON documents written by `attack` and `fpso`.

use anonaudit_core::attack::{order_classes, AttackOutcome, Target};
use anonaudit_core::audit::{score, target_rows};
use anonaudit_core::domain::HierarchySpec;
use anonaudit_core::enumerator::{EnumerationError, Limit};
use anonaudit_core::fpso::{Category, FpsoClassResult};
use anonaudit_core::metrics::{big_to_f64, MetricsError};
use anonaudit_core::Release;
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Exhausted,
    LimitExceeded,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSize {
    pub ub_rows: usize,
    pub lb_rows: usize,
    pub eq_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    /// `class` or `outliers`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_index: Option<usize>,
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_group: Option<usize>,
    pub intervals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<u32>>,
    pub size: usize,
    pub row_indices: Vec<usize>,
    pub constraints: SystemSize,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<Limit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub solution_count: usize,
    pub solutions: Vec<Vec<u32>>,
    pub volume: String,
    pub lr_solutions: Option<String>,
    pub cra_solutions: Option<String>,
    pub cra_ratio: Option<String>,
    pub lr_solutions_approx: Option<f64>,
    pub cra_solutions_approx: Option<f64>,
    pub cra_ratio_approx: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtimes {
    pub total_seconds: f64,
    pub target_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub version: u32,
    pub k: usize,
    pub hierarchies: Vec<HierarchySpec>,
    pub row_count: usize,
    pub lambda: usize,
    pub targets: Vec<TargetReport>,
    pub runtimes: Runtimes,
}

/// Builds the report; also returns whether any exhausted target had no
/// plausible placement, which can only happen if the attack is unsound.
pub fn attack_report(release: &Release, outcomes: &[AttackOutcome], total_seconds: f64) -> (AttackReport, bool) {
    let grid = &release.grid;
    let ordering = order_classes(release).ok();
    let mut alarm = false;
    let targets = outcomes
        .iter()
        .map(|o| {
            let s = score(release, o);
            let (kind, class_index, tie_group, seg) = match o.target {
                Target::Class(c) => (
                    "class",
                    Some(c),
                    ordering.as_ref().map(|ord| ord.group[c]),
                    release.classes[c].segment.clone(),
                ),
                Target::Outliers => ("outliers", None, None, grid.top()),
            };
            let (status, limit, error) = match &o.result {
                Ok(_) => (Status::Exhausted, None, None),
                Err(EnumerationError::LimitExceeded { limit, .. }) => (Status::LimitExceeded, Some(*limit), None),
                Err(e) => (Status::Error, None, Some(e.to_string())),
            };
            let ratio = match &s.ratio {
                Some(Ok(r)) => Some(r),
                Some(Err(MetricsError::ZeroCra)) => {
                    alarm = true;
                    None
                }
                _ => None,
            };
            TargetReport {
                kind: kind.to_string(),
                class_index,
                rank: o.rank,
                tie_group,
                intervals: grid.intervals(&seg).iter().map(|iv| iv.to_string()).collect(),
                state: class_index.map(|_| seg.state().layers().to_vec()),
                size: s.size,
                row_indices: target_rows(release, o.target).to_vec(),
                constraints: SystemSize {
                    ub_rows: o.system.ub.len(),
                    lb_rows: o.system.lb.len(),
                    eq_rows: o.system.eq.len(),
                },
                status,
                limit,
                error,
                solution_count: o.solutions().len(),
                solutions: o.solutions().iter().map(|z| z.0.clone()).collect(),
                volume: s.volume.to_string(),
                lr_solutions: s.lr.as_ref().ok().map(|v| v.to_string()),
                cra_solutions: s.cra.as_ref().map(|v| v.to_string()),
                cra_ratio: ratio.map(|r| r.exact.to_string()),
                lr_solutions_approx: s.lr.as_ref().ok().map(big_to_f64),
                cra_solutions_approx: s.cra.as_ref().map(big_to_f64),
                cra_ratio_approx: ratio.map(|r| r.approx),
            }
        })
        .collect();
    let report = AttackReport {
        version: REPORT_VERSION,
        k: release.k,
        hierarchies: grid.hierarchies().iter().map(|h| h.spec()).collect(),
        row_count: release.row_count(),
        lambda: grid.lambda(),
        targets,
        runtimes: Runtimes {
            total_seconds,
            target_seconds: outcomes.iter().map(|o| o.runtime.as_secs_f64()).collect(),
        },
    };
    (report, alarm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateReport {
    /// 1-based basic segment number.
    pub basic_segment: usize,
    pub predicate: String,
    pub intervals: Vec<String>,
    pub record: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsoClassReport {
    pub class_index: usize,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_assignment: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    pub singled_out: Vec<PredicateReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub failed: usize,
    pub single_1: usize,
    pub single_many: usize,
    pub skipped: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, c: Category) {
        match c {
            Category::Failed => self.failed += 1,
            Category::Single1 => self.single_1 += 1,
            Category::SingleMany => self.single_many += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsoReport {
    pub version: u32,
    pub classes: Vec<FpsoClassReport>,
    pub categories: CategoryCounts,
}

pub fn fpso_class_report(result: &FpsoClassResult) -> FpsoClassReport {
    FpsoClassReport {
        class_index: result.class,
        status: "ok".into(),
        valid_assignment: Some(result.valid.0.clone()),
        category: Some(result.category),
        singled_out: result
            .singled_out
            .iter()
            .map(|s| PredicateReport {
                basic_segment: s.basic_index + 1,
                predicate: s.predicate.to_string(),
                intervals: s.predicate.intervals.iter().map(|iv| iv.to_string()).collect(),
                record: s.record,
            })
            .collect(),
    }
}
