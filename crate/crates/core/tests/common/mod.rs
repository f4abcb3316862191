#![allow(dead_code)]

use anonaudit_core::anonymizer::{AnonymizedDataset, Anonymizer, Dataset};
use anonaudit_core::attack::Target;
use anonaudit_core::audit::{run_cell, RunOutcome};
use anonaudit_core::data_io::{generate_synthetic, DatasetConfig, Distribution};
use anonaudit_core::domain::{GeneralizationState, HierarchySpec, SegmentGrid};
use anonaudit_core::enumerator::{Assignment, EnumerationLimits};
use anonaudit_core::exec::Execution;
use anonaudit_core::fpso::FpsoError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Case {
    pub seed: u64,
    pub n: usize,
    pub heights: [u32; 2],
    pub k: usize,
    pub distribution: Distribution,
}

impl Case {
    pub fn config(&self) -> DatasetConfig {
        let attributes = self
            .heights
            .iter()
            .enumerate()
            .map(|(i, &h)| HierarchySpec {
                name: format!("A{}", i + 1),
                lo: 0,
                hi: 255,
                height: h,
            })
            .collect();
        let mut c = DatasetConfig::new(attributes, self.n);
        c.distribution = self.distribution;
        c
    }

    pub fn data(&self) -> (Dataset, SegmentGrid) {
        let config = self.config();
        let data = generate_synthetic(&config, self.seed).expect("domain is large enough");
        (data, config.grid().expect("valid config"))
    }
}

/// Deterministic mix of sizes, heights, k, and generators.
pub fn suite_cases(count: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..count)
        .map(|i| Case {
            seed: rng.gen(),
            n: rng.gen_range(50..=200),
            heights: [rng.gen_range(3..=4), rng.gen_range(3..=4)],
            k: rng.gen_range(3..=5),
            distribution: if i % 2 == 0 {
                Distribution::Uniform
            } else {
                Distribution::Skewed
            },
        })
        .collect()
}

/// Leaf counts of the records `rows`.
pub fn truth(data: &Dataset, grid: &SegmentGrid, rows: &[usize]) -> Assignment {
    let mut z = vec![0u32; grid.lambda()];
    for &r in rows {
        z[grid.locate_record(data.record(r)).expect("record in domain")] += 1;
    }
    Assignment(z)
}

#[derive(Debug, Default)]
pub struct CaseReport {
    pub targets: usize,
    pub exhausted: usize,
    pub soundness: Vec<String>,
    pub ratio_below_one: Vec<String>,
    pub k_anonymity: Vec<String>,
    pub partition: Vec<String>,
    pub replay: Vec<String>,
    pub fpso_valid: usize,
    pub fpso: Vec<String>,
    pub predicates: usize,
    pub predicate_errors: Vec<String>,
}

pub fn run(case: &Case, limits: &EnumerationLimits) -> (Dataset, SegmentGrid, RunOutcome) {
    let (data, grid) = case.data();
    let out = run_cell(&data, &grid, case.k, limits, Execution::Parallel).expect("pipeline runs");
    (data, grid, out)
}

pub fn replay(anon: &AnonymizedDataset, data: &Dataset, grid: &SegmentGrid) -> Vec<String> {
    let anonymizer = Anonymizer::new(grid.clone()).with_execution(Execution::Sequential);
    let mut errors = Vec::new();
    for t in 0..anon.iterations() {
        let remaining = anon.remainder_before(t);
        let recorded: Vec<&GeneralizationState> =
            anon.classes.iter().filter(|c| c.iteration == t).map(|c| &c.state).collect();
        match anonymizer.find_optimal_state(data, &remaining, anon.k) {
            Ok(s) if recorded.iter().all(|r| **r == s) && !recorded.is_empty() => {}
            other => errors.push(format!("iteration {t}: replay gave {other:?}, recorded {recorded:?}")),
        }
    }
    if anon.outliers.len() >= anon.k {
        match anonymizer.find_optimal_state(data, &anon.outliers, anon.k) {
            Ok(s) if s.is_top(grid.hierarchies()) => {}
            other => errors.push(format!("final remainder: replay gave {other:?}, expected top")),
        }
    }
    errors
}

pub fn check(case: &Case, limits: &EnumerationLimits) -> CaseReport {
    let (data, grid, out) = run(case, limits);
    let mut report = CaseReport::default();
    let tag = format!("seed {} n {} h {:?} k {}", case.seed, case.n, case.heights, case.k);

    for c in &out.anon.classes {
        if c.size() < case.k {
            report.k_anonymity.push(format!("{tag}: class of {} records", c.size()));
        }
    }
    let mut seen = vec![0usize; data.len()];
    for &m in out.anon.classes.iter().flat_map(|c| &c.members).chain(&out.anon.outliers) {
        seen[m] += 1;
    }
    if seen.iter().any(|&s| s != 1) {
        report.partition.push(format!("{tag}: records are not partitioned"));
    }
    report.replay = replay(&out.anon, &data, &grid).into_iter().map(|e| format!("{tag}: {e}")).collect();

    for ((o, s), f) in out.outcomes.iter().zip(&out.scores).zip(&out.fpso) {
        report.targets += 1;
        let rows = match o.target {
            Target::Class(c) => out.release.classes[c].rows.clone(),
            Target::Outliers => out.release.outlier_rows.clone(),
        };
        let z = truth(&data, &grid, &rows);
        if !o.system.is_satisfied(&z.0) {
            report
                .soundness
                .push(format!("{tag}: {:?} violates {:?}", o.target, o.system.violations(&z.0)));
        }
        if o.exhausted() {
            report.exhausted += 1;
            if !o.solutions().contains(&z) {
                report.soundness.push(format!("{tag}: {:?} truth not enumerated", o.target));
            }
            match &s.ratio {
                Some(Ok(r)) if r.exact >= num_rational::BigRational::from_integer(1.into()) => {}
                other => report.ratio_below_one.push(format!("{tag}: {:?} ratio {other:?}", o.target)),
            }
        }
        match f {
            Some(Ok(result)) => {
                report.fpso_valid += 1;
                if result.valid != z {
                    report.fpso.push(format!("{tag}: {:?} valid assignment is not the truth", o.target));
                }
                for p in &result.singled_out {
                    report.predicates += 1;
                    let hits = data.records().iter().filter(|r| p.predicate.matches(r)).count();
                    if hits != 1 {
                        report
                            .predicate_errors
                            .push(format!("{tag}: predicate {} matches {hits} records", p.predicate));
                    }
                }
            }
            Some(Err(FpsoError::MultipleValid(v))) => {
                report.fpso.push(format!("{tag}: {:?} has {} valid assignments", o.target, v.len()))
            }
            Some(Err(e)) => report.fpso.push(format!("{tag}: {:?} {e}", o.target)),
            None => {}
        }
    }
    report
}
