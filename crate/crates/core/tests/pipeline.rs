mod common;

use anonaudit_core::attack::attack_all;
use anonaudit_core::data_io::{read_anonymized, write_anonymized, Metadata};
use anonaudit_core::enumerator::EnumerationLimits;
use anonaudit_core::exec::Execution;
use anonaudit_core::fixtures::{d6, d7, grid8};
use anonaudit_core::local_recode;
use common::suite_cases;

fn signature(outcomes: &[anonaudit_core::attack::AttackOutcome]) -> Vec<String> {
    outcomes
        .iter()
        .map(|o| format!("{:?} {:?} {:?}", o.target, o.system, o.result))
        .collect()
}

#[test]
fn attacks_do_not_depend_on_metadata() {
    let dir = tempfile::tempdir().unwrap();
    for (i, case) in suite_cases(6).iter().enumerate() {
        let (data, grid) = case.data();
        let anon = local_recode(&data, case.k, grid.hierarchies()).unwrap();
        let data_path = dir.path().join(format!("{i}.csv"));
        let meta_path = dir.path().join(format!("{i}.json"));
        write_anonymized(&anon, &data_path, &meta_path).unwrap();

        let limits = EnumerationLimits::default();
        let direct = attack_all(&anon.release(), &limits, Execution::Sequential).unwrap();
        let with_meta = read_anonymized(&data_path, &grid, case.k).unwrap();
        Metadata::load(&meta_path).unwrap().check(&with_meta).unwrap();
        std::fs::remove_file(&meta_path).unwrap();
        let without_meta = read_anonymized(&data_path, &grid, case.k).unwrap();
        assert_eq!(with_meta, without_meta);
        let from_file = attack_all(&without_meta, &limits, Execution::Parallel).unwrap();
        assert_eq!(signature(&direct), signature(&from_file));
    }
}

#[test]
fn round_trip_preserves_classes() {
    let dir = tempfile::tempdir().unwrap();
    for (data, k) in [(d6(), 3), (d7(), 3), (d6(), 7), (d7(), 2)] {
        let anon = local_recode(&data, k, grid8().hierarchies()).unwrap();
        let (p, m) = (dir.path().join("x.csv"), dir.path().join("x.json"));
        write_anonymized(&anon, &p, &m).unwrap();
        let back = read_anonymized(&p, &grid8(), k).unwrap();
        assert_eq!(back, anon.release());
        assert_eq!(back.outlier_count(), anon.outliers.len());
    }
}

#[test]
fn sequential_and_parallel_runs_match() {
    for case in suite_cases(4) {
        let (data, grid) = case.data();
        let limits = EnumerationLimits::default();
        let a = anonaudit_core::audit::run_cell(&data, &grid, case.k, &limits, Execution::Sequential).unwrap();
        let b = anonaudit_core::audit::run_cell(&data, &grid, case.k, &limits, Execution::Parallel).unwrap();
        assert_eq!(a.release, b.release);
        assert_eq!(signature(&a.outcomes), signature(&b.outcomes));
        assert_eq!(a.scores, b.scores);
    }
}
