//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Exits non-zero on failure only when ANONAUDIT_ACCEPTANCE_STRICT is set,
//! so the regular test run keeps going and the report stays visible.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use anonaudit_core::anonymizer::{local_recode, Dataset};
use anonaudit_core::attack::{attack_all, Target};
use anonaudit_core::audit::{run_cell, score};
use anonaudit_core::constraints::ConstraintSystem;
use anonaudit_core::data_io::{generate_synthetic, DatasetConfig};
use anonaudit_core::domain::{GeneralizationState, HierarchySpec, SegmentGrid};
use anonaudit_core::enumerator::{brute_force_solutions, enumerate_solutions, Assignment, EnumerationLimits};
use anonaudit_core::exec::Execution;
use anonaudit_core::fixtures::{d6, d7, grid8};
use num_bigint::BigUint;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn choose(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Optimal state by scanning all 16 states of the 2 x [1,8] grid directly.
fn brute_force_state(data: &Dataset, ids: &[usize], k: usize, grid: &SegmentGrid) -> Option<(Vec<u32>, BigRational)> {
    let hs = grid.hierarchies();
    let mut best: Option<(BigRational, u32, Vec<u32>)> = None;
    for a in 0..=3u32 {
        for b in 0..=3u32 {
            let state = [a, b];
            let mut groups = std::collections::HashMap::<Vec<(i64, i64)>, usize>::new();
            for &i in ids {
                let key = data
                    .record(i)
                    .iter()
                    .zip(&state)
                    .zip(hs)
                    .map(|((&v, &l), h)| {
                        let iv = h.generalize(v, l);
                        (iv.lo, iv.hi)
                    })
                    .collect();
                *groups.entry(key).or_default() += 1;
            }
            if !groups.values().any(|&c| c >= k) || state == [3, 3] {
                continue;
            }
            let product = state.iter().fold(rat(1, 1), |acc, &l| {
                let width = if l == 0 { 1 } else { 2i64 << (l - 1) };
                acc * (rat(width - 1, 7) + rat(1, 1))
            });
            let cand = (product, a + b, state.to_vec());
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best.map(|(p, _, s)| (s, p))
}

/// Solutions of `cs` found by scanning `[0, bound]` on `free` with all other counters 0.
fn scan(cs: &ConstraintSystem, free: &[usize], bound: u32) -> BTreeSet<Assignment> {
    let mut out = BTreeSet::new();
    let mut vals = vec![0u32; free.len()];
    loop {
        let mut z = vec![0u32; cs.num_vars];
        for (&f, &v) in free.iter().zip(&vals) {
            z[f] = v;
        }
        if cs.is_satisfied(&z) {
            out.insert(Assignment(z));
        }
        let mut i = 0;
        loop {
            if i == vals.len() {
                return out;
            }
            if vals[i] < bound {
                vals[i] += 1;
                break;
            }
            vals[i] = 0;
            i += 1;
        }
    }
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let grid = grid8();
    let data = d6();
    let anon = local_recode(&data, 3, grid.hierarchies()).expect("anonymizes");
    let mut problems = Vec::new();

    let all: Vec<usize> = (0..data.len()).collect();
    match brute_force_state(&data, &all, 3, &grid) {
        Some((s, p)) if s == vec![2, 2] && p == rat(100, 49) => {}
        other => problems.push(format!("brute-force state {other:?}")),
    }
    if anon.classes.len() != 2 || anon.classes.iter().any(|c| c.state != GeneralizationState(vec![2, 2])) {
        problems.push(format!("classes {:?}", anon.classes.iter().map(|c| &c.state).collect::<Vec<_>>()));
    }
    if anon.classes.iter().any(|c| c.loss.exact() != Some(rat(3, 7))) {
        problems.push("loss is not exactly 3/7".into());
    }

    let release = anon.release();
    let outcomes = attack_all(&release, &EnumerationLimits::default(), Execution::Parallel).expect("attacks");
    for o in &outcomes {
        let Target::Class(c) = o.target else {
            problems.push("unexpected outlier target".into());
            continue;
        };
        let free = grid.basic_segments_of(&release.classes[c].segment).expect("segment");
        let oracle = scan(&o.system, &free, 3);
        let got: BTreeSet<Assignment> = o.solutions().iter().cloned().collect();
        if got.len() != 8 || got != oracle {
            problems.push(format!("class {c}: {} solutions, oracle {}", got.len(), oracle.len()));
        }
        let cra_oracle: u64 = oracle
            .iter()
            .map(|z| z.counts().iter().map(|&v| choose(4, v as u64)).product::<u64>())
            .sum();
        let s = score(&release, o);
        let ratio = s.ratio.and_then(Result::ok).map(|r| r.exact);
        if s.lr != Ok(BigUint::from(560u32))
            || s.cra != Some(BigUint::from(352u32))
            || cra_oracle != 352
            || choose(16, 3) != 560
            || ratio != Some(rat(35, 22))
        {
            problems.push(format!("class {c}: lr {:?} cra {:?} ratio {:?}", s.lr, s.cra, ratio));
        }
    }
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(1) {
        problems.push(format!("took {elapsed:?}"));
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("2 classes at (2,2), loss 3/7, 8 solutions each, lr 560, cra 352, ratio 35/22 in {elapsed:.2?}")
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let grid = grid8();
    let anon = local_recode(&d7(), 3, grid.hierarchies()).expect("anonymizes");
    let release = anon.release();
    let outcomes = attack_all(&release, &EnumerationLimits::default(), Execution::Parallel).expect("attacks");
    let mut problems = Vec::new();
    if release.outlier_count() != 1 {
        problems.push(format!("{} outliers", release.outlier_count()));
    }
    match outcomes.iter().find(|o| o.target == Target::Outliers) {
        None => problems.push("no outlier target".into()),
        Some(o) => {
            let oracle: BTreeSet<Assignment> = brute_force_solutions(&o.system, 1).map_or_else(
                |_| scan(&o.system, &(0..grid.lambda()).collect::<Vec<_>>(), 1),
                |v| v.into_iter().collect(),
            );
            let got: BTreeSet<Assignment> = o.solutions().iter().cloned().collect();
            let s = score(&release, o);
            let ratio = s.ratio.and_then(Result::ok).map(|r| r.exact);
            if got.len() != 8 || got != oracle {
                problems.push(format!("{} solutions, oracle {}", got.len(), oracle.len()));
            }
            if s.lr != Ok(BigUint::from(64u32)) || s.cra != Some(BigUint::from(32u32)) || ratio != Some(rat(2, 1)) {
                problems.push(format!("lr {:?} cra {:?} ratio {:?}", s.lr, s.cra, ratio));
            }
        }
    }
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(1) {
        problems.push(format!("took {elapsed:?}"));
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("1 outlier, 8 solutions, lr 64, cra 32, ratio 2 in {elapsed:.2?}")
        } else {
            problems.join("; ")
        },
    )
}

fn random_system(rng: &mut ChaCha8Rng) -> ConstraintSystem {
    let n = rng.gen_range(1..=6);
    let mut cs = ConstraintSystem::new(n);
    cs.at_most((0..n).collect(), rng.gen_range(0..=5));
    for _ in 0..rng.gen_range(0..=9) {
        let vars: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        let vars = if vars.is_empty() { vec![rng.gen_range(0..n)] } else { vars };
        let bound = rng.gen_range(0..=5);
        match rng.gen_range(0..3) {
            0 => cs.at_most(vars, bound),
            1 => cs.at_least(vars, bound),
            _ => cs.exactly(vars, bound),
        }
    }
    cs
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut nonempty = 0;
    for _ in 0..200 {
        let cs = random_system(&mut rng);
        let got = enumerate_solutions(&cs, &EnumerationLimits::default());
        let oracle: BTreeSet<Assignment> = brute_force_solutions(&cs, 5).expect("small box").into_iter().collect();
        match got {
            Ok(r) if r.exhausted && r.solutions.iter().cloned().collect::<BTreeSet<_>>() == oracle => {}
            _ => mismatches += 1,
        }
        nonempty += usize::from(!oracle.is_empty());
    }
    let elapsed = started.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(30),
        format!("200 systems, {mismatches} mismatches, {nonempty} feasible, {elapsed:.2?}"),
    )
}

struct Suite {
    reports: Vec<common::CaseReport>,
    elapsed: Duration,
}

fn soundness_suite() -> Suite {
    let started = Instant::now();
    let limits = EnumerationLimits::default();
    let reports = common::suite_cases(100).iter().map(|c| common::check(c, &limits)).collect();
    Suite {
        reports,
        elapsed: started.elapsed(),
    }
}

fn first_errors(errors: Vec<&String>) -> String {
    errors.iter().take(3).map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
}

fn criterion_4(suite: &Suite) -> Outcome {
    let targets: usize = suite.reports.iter().map(|r| r.targets).sum();
    let exhausted: usize = suite.reports.iter().map(|r| r.exhausted).sum();
    let errors: Vec<&String> = suite
        .reports
        .iter()
        .flat_map(|r| r.soundness.iter().chain(&r.ratio_below_one))
        .collect();
    let pass = errors.is_empty() && suite.elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "100 datasets, {targets} targets, {exhausted} exhausted, {} violations, {:.2?} {}",
            errors.len(),
            suite.elapsed,
            first_errors(errors)
        ),
    )
}

fn criterion_5(suite: &Suite) -> Outcome {
    let errors: Vec<&String> = suite
        .reports
        .iter()
        .flat_map(|r| r.k_anonymity.iter().chain(&r.partition).chain(&r.replay))
        .collect();
    outcome(
        errors.is_empty(),
        format!("{} violations {}", errors.len(), first_errors(errors)),
    )
}

fn criterion_6(suite: &Suite) -> Outcome {
    let valid: usize = suite.reports.iter().map(|r| r.fpso_valid).sum();
    let predicates: usize = suite.reports.iter().map(|r| r.predicates).sum();
    let errors: Vec<&String> = suite
        .reports
        .iter()
        .flat_map(|r| r.fpso.iter().chain(&r.predicate_errors))
        .collect();
    outcome(
        errors.is_empty() && valid > 0,
        format!(
            "{valid} classes with a unique valid assignment, {predicates} predicates, {} violations {}",
            errors.len(),
            first_errors(errors)
        ),
    )
}

struct SweepCell {
    k: usize,
    basic_share: f64,
    median_ratio: f64,
    geometric_mean_ratio: f64,
    partial: usize,
    max_class_runtime: Duration,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

fn sweep(hi: i64, heights: [u32; 2], ks: std::ops::RangeInclusive<usize>) -> Vec<SweepCell> {
    let attributes = heights
        .iter()
        .enumerate()
        .map(|(i, &height)| HierarchySpec {
            name: format!("A{}", i + 1),
            lo: 0,
            hi,
            height,
        })
        .collect();
    let config = DatasetConfig::new(attributes, 400);
    let grid = config.grid().expect("valid config");
    let datasets: Vec<Dataset> = (0..12).map(|s| generate_synthetic(&config, s).expect("generates")).collect();
    ks.map(|k| {
        let mut shares = Vec::new();
        let mut ratios = Vec::new();
        let mut partial = 0;
        let mut max_class_runtime = Duration::ZERO;
        for (seed, data) in datasets.iter().enumerate() {
            let run = run_cell(data, &grid, k, &EnumerationLimits::default(), Execution::Parallel).expect("runs");
            let m = run.metrics("synthetic", seed as u64);
            partial += m.partial_classes;
            shares.push(m.classes.iter().filter(|c| c.basic).count() as f64 / m.classes.len().max(1) as f64);
            ratios.extend(m.classes.iter().map(|c| c.cra_ratio));
            for o in run.outcomes.iter().filter(|o| matches!(o.target, Target::Class(_))) {
                max_class_runtime = max_class_runtime.max(o.runtime);
            }
        }
        SweepCell {
            k,
            basic_share: shares.iter().sum::<f64>() / shares.len() as f64,
            median_ratio: median(ratios.clone()),
            geometric_mean_ratio: (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp(),
            partial,
            max_class_runtime,
        }
    })
    .collect()
}

fn criterion_7(cells: &[SweepCell]) -> Outcome {
    let steps = cells.windows(2).filter(|w| w[1].basic_share <= w[0].basic_share).count();
    let series: Vec<String> = cells.iter().map(|c| format!("k{}={:.3}", c.k, c.basic_share)).collect();
    outcome(
        steps >= 4,
        format!("basic share non-increasing in {steps}/5 steps: {}", series.join(" ")),
    )
}

fn criterion_8(cells: &[SweepCell]) -> Outcome {
    let cells: Vec<&SweepCell> = cells.iter().filter(|c| c.k <= 7).collect();
    let steps = cells.windows(2).filter(|w| w[1].median_ratio > w[0].median_ratio).count();
    let series: Vec<String> = cells.iter().map(|c| format!("k{}={:.4}", c.k, c.median_ratio)).collect();
    let geo: Vec<String> = cells
        .iter()
        .map(|c| format!("k{}={:.3}", c.k, c.geometric_mean_ratio))
        .collect();
    let partial: usize = cells.iter().map(|c| c.partial).sum();
    outcome(
        steps >= 3,
        format!(
            "median ratio increases in {steps}/4 steps: {} (geometric mean {}; {partial} partial classes)",
            series.join(" "),
            geo.join(" ")
        ),
    )
}

fn criterion_9(d6_d7: Duration) -> Outcome {
    let cells = sweep(511, [4, 4], 3..=7);
    let worst = cells.iter().map(|c| c.max_class_runtime).max().unwrap_or_default();
    let partial: usize = cells.iter().map(|c| c.partial).sum();
    outcome(
        worst < Duration::from_secs(1) && partial == 0 && d6_d7 < Duration::from_secs(5),
        format!("slowest class attack {worst:.2?} (heights 4,4; k 3..7; 60 runs), fixtures {d6_d7:.2?}"),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    let fixtures = Instant::now();
    results.push((1, "D6 end-to-end", criterion_1()));
    results.push((2, "D7 outliers", criterion_2()));
    let fixtures = fixtures.elapsed();

    results.push((3, "enumerator oracle equivalence", criterion_3()));

    let suite = soundness_suite();
    results.push((4, "soundness suite", criterion_4(&suite)));
    results.push((5, "k-anonymity and greedy replay", criterion_5(&suite)));
    results.push((6, "FPSO uniqueness", criterion_6(&suite)));

    let trend = sweep(1023, [4, 5], 3..=8);
    results.push((7, "basic-segment share trend", criterion_7(&trend)));
    results.push((8, "CRA ratio trend", criterion_8(&trend)));

    results.push((9, "performance envelope", criterion_9(fixtures)));


    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 && std::env::var_os("ANONAUDIT_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
