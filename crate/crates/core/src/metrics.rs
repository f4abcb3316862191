//! Exact counting of plausible raw datasets behind a release.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Segment, SegmentGrid};
use crate::enumerator::{Assignment, EnumerationResult};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("class of {size} records does not fit in a segment of volume {volume}")]
    SizeExceedsVolume { size: u64, volume: BigUint },
    #[error("the solution list is partial")]
    NotExhausted,
    #[error("no plausible assignment: the true placement must always be feasible")]
    ZeroCra,
}

/// Integer points in a segment.
pub fn volume(grid: &SegmentGrid, seg: &Segment) -> BigUint {
    grid.intervals(seg)
        .iter()
        .fold(BigUint::one(), |acc, iv| acc * BigUint::from(iv.len()))
}

/// `C(n, r)`, exact.
pub fn binomial(n: &BigUint, r: u64) -> BigUint {
    let r_big = BigUint::from(r);
    if &r_big > n {
        return BigUint::zero();
    }
    let r = if BigUint::from(2u8) * &r_big > *n {
        (n - &r_big).to_u64().unwrap_or(r)
    } else {
        r
    };
    let mut acc = BigUint::one();
    for i in 0..r {
        acc = acc * (n - BigUint::from(i)) / BigUint::from(i + 1);
    }
    acc
}

/// Ways to place `class_size` distinct records in a segment of `seg_volume` points.
pub fn lr_solutions(seg_volume: &BigUint, class_size: u64) -> Result<BigUint, MetricsError> {
    if BigUint::from(class_size) > *seg_volume {
        return Err(MetricsError::SizeExceedsVolume {
            size: class_size,
            volume: seg_volume.clone(),
        });
    }
    Ok(binomial(seg_volume, class_size))
}

/// `Σ_z ∏_i C(volume(B_i), z_i)` over the given assignments.
pub fn cra_solutions_of(solutions: &[Assignment], grid: &SegmentGrid) -> BigUint {
    let volumes: Vec<BigUint> = (0..grid.lambda())
        .map(|i| volume(grid, &grid.basic_segment(i)))
        .collect();
    let mut cache: HashMap<(&BigUint, u32), BigUint> = HashMap::new();
    let mut total = BigUint::zero();
    for z in solutions {
        let mut term = BigUint::one();
        for (vol, &c) in volumes.iter().zip(z.counts()) {
            if c > 0 {
                term *= &*cache.entry((vol, c)).or_insert_with(|| binomial(vol, c as u64));
            }
        }
        total += term;
    }
    total
}

pub fn cra_solutions(result: &EnumerationResult, grid: &SegmentGrid) -> Result<BigUint, MetricsError> {
    if !result.exhausted {
        return Err(MetricsError::NotExhausted);
    }
    Ok(cra_solutions_of(&result.solutions, grid))
}

/// `lr / cra`, exact and approximate.
#[derive(Debug, Clone, PartialEq)]
pub struct CraRatio {
    pub exact: BigRational,
    pub approx: f64,
}

pub fn cra_ratio(lr: &BigUint, cra: &BigUint) -> Result<CraRatio, MetricsError> {
    if cra.is_zero() {
        return Err(MetricsError::ZeroCra);
    }
    let exact = BigRational::new(BigInt::from(lr.clone()), BigInt::from(cra.clone()));
    Ok(CraRatio {
        approx: ratio_to_f64(&exact),
        exact,
    })
}

/// Handles magnitudes beyond `f64` numerator/denominator range.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64().filter(|v| v.is_finite()) {
        return v;
    }
    let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
    let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

pub fn big_to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}

/// Metrics of one attacked class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub lr_solutions: f64,
    pub cra_solutions: f64,
    pub cra_ratio: f64,
    pub solution_count: usize,
    pub basic: bool,
}

/// One anonymize-and-attack run of one dataset at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub dataset: String,
    pub num_qis: usize,
    pub k: usize,
    pub seed: u64,
    /// Exhausted classes only.
    pub classes: Vec<ClassMetrics>,
    /// Classes whose enumeration hit a limit.
    pub partial_classes: usize,
    pub outlier_count: usize,
    pub outliers: Option<ClassMetrics>,
}

/// Means over runs of per-run class means, keyed by `(dataset, num_qis, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub num_qis: usize,
    pub k: usize,
    pub runs: usize,
    pub lr_solutions_mean: f64,
    pub cra_solutions_mean: f64,
    pub cra_ratio_mean: f64,
    pub solution_count_mean: f64,
    pub classes_mean: f64,
    pub basic_share: f64,
    pub outlier_count_mean: f64,
    pub partial_classes: usize,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate_report(runs: &[RunMetrics]) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<(String, usize, usize), Vec<&RunMetrics>> = BTreeMap::new();
    for run in runs {
        cells
            .entry((run.dataset.clone(), run.num_qis, run.k))
            .or_default()
            .push(run);
    }
    cells
        .into_iter()
        .map(|((dataset, num_qis, k), runs)| {
            let per_run = |f: &dyn Fn(&ClassMetrics) -> f64| {
                mean(runs.iter().filter_map(|r| mean(r.classes.iter().map(f)))).unwrap_or(f64::NAN)
            };
            AggregateRow {
                dataset,
                num_qis,
                k,
                runs: runs.len(),
                lr_solutions_mean: per_run(&|c| c.lr_solutions),
                cra_solutions_mean: per_run(&|c| c.cra_solutions),
                cra_ratio_mean: per_run(&|c| c.cra_ratio),
                solution_count_mean: per_run(&|c| c.solution_count as f64),
                classes_mean: mean(runs.iter().map(|r| r.classes.len() as f64)).unwrap_or(0.0),
                basic_share: per_run(&|c| if c.basic { 1.0 } else { 0.0 }),
                outlier_count_mean: mean(runs.iter().map(|r| r.outlier_count as f64)).unwrap_or(0.0),
                partial_classes: runs.iter().map(|r| r.partial_classes).sum(),
            }
        })
        .collect()
}
