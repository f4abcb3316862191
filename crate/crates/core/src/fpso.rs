//! Fuzzy predicate singling out: checks attack solutions against the raw
//! data, keeps the single consistent one, and turns its unit counters into
//! predicates that isolate one record each.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymizer::Dataset;
use crate::domain::{Interval, SegmentGrid};
use crate::enumerator::Assignment;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FpsoError {
    #[error("no solution is consistent with the original records")]
    NoValidAssignment,
    #[error("{} solutions are consistent with the original records", .0.len())]
    MultipleValid(Vec<Assignment>),
}

/// A conjunction of closed intervals, one per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub names: Vec<String>,
    pub intervals: Vec<Interval>,
}

impl Predicate {
    pub fn matches(&self, record: &[i64]) -> bool {
        record.len() == self.intervals.len() && self.intervals.iter().zip(record).all(|(iv, &v)| iv.contains(v))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, iv)) in self.names.iter().zip(&self.intervals).enumerate() {
            if i > 0 {
                write!(f, " ∧ ")?;
            }
            write!(f, "{name}∈{iv}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "failed")]
    Failed,
    #[serde(rename = "single_1")]
    Single1,
    #[serde(rename = "single_many")]
    SingleMany,
}

impl Category {
    pub fn from_unit_counters(count: usize) -> Self {
        match count {
            0 => Category::Failed,
            1 => Category::Single1,
            _ => Category::SingleMany,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Failed => "failed",
            Category::Single1 => "single_1",
            Category::SingleMany => "single_many",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingledOut {
    /// Zero-based basic segment index.
    pub basic_index: usize,
    pub predicate: Predicate,
    /// Member matched by the predicate, if any.
    pub record: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpsoClassResult {
    pub class: usize,
    pub valid: Assignment,
    pub singled_out: Vec<SingledOut>,
    pub category: Category,
}

fn member_counts(original: &Dataset, members: &[usize], grid: &SegmentGrid) -> Option<Vec<u32>> {
    let mut counts = vec![0u32; grid.lambda()];
    for &m in members {
        if m >= original.len() {
            return None;
        }
        counts[grid.locate_record(original.record(m)).ok()?] += 1;
    }
    Some(counts)
}

/// True iff every positive counter equals the number of members in its leaf.
pub fn validate_assignment(a: &Assignment, original: &Dataset, members: &[usize], grid: &SegmentGrid) -> bool {
    match member_counts(original, members, grid) {
        Some(counts) => {
            a.total() == members.len() as u64
                && a.counts().len() == counts.len()
                && a.counts().iter().zip(&counts).all(|(&z, &c)| z == 0 || z == c)
        }
        None => false,
    }
}

pub fn find_valid(
    solutions: &[Assignment],
    original: &Dataset,
    members: &[usize],
    grid: &SegmentGrid,
) -> Result<Assignment, FpsoError> {
    let valid: Vec<Assignment> = solutions
        .iter()
        .filter(|a| validate_assignment(a, original, members, grid))
        .cloned()
        .collect();
    match valid.len() {
        0 => Err(FpsoError::NoValidAssignment),
        1 => Ok(valid.into_iter().next().expect("one element")),
        _ => Err(FpsoError::MultipleValid(valid)),
    }
}

/// One predicate per counter equal to 1.
pub fn single_out(
    class: usize,
    valid: &Assignment,
    original: &Dataset,
    members: &[usize],
    grid: &SegmentGrid,
) -> FpsoClassResult {
    let names: Vec<String> = grid.hierarchies().iter().map(|h| h.name().to_string()).collect();
    let singled_out: Vec<SingledOut> = valid
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &z)| z == 1)
        .map(|(i, _)| {
            let predicate = Predicate {
                names: names.clone(),
                intervals: grid.intervals(&grid.basic_segment(i)),
            };
            let record = members
                .iter()
                .copied()
                .find(|&m| m < original.len() && predicate.matches(original.record(m)));
            SingledOut {
                basic_index: i,
                predicate,
                record,
            }
        })
        .collect();
    FpsoClassResult {
        class,
        valid: valid.clone(),
        category: Category::from_unit_counters(singled_out.len()),
        singled_out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymizer::local_recode;
    use crate::attack::{attack_all, Target};
    use crate::enumerator::EnumerationLimits;
    use crate::exec::Execution;
    use crate::fixtures::{d6, grid8};

    fn z(pairs: &[(usize, u32)]) -> Assignment {
        let mut v = vec![0u32; 16];
        for &(b, c) in pairs {
            v[b - 1] = c;
        }
        Assignment(v)
    }

    const FIRST: [usize; 3] = [0, 1, 2];
    const SECOND: [usize; 3] = [3, 4, 5];

    #[test]
    fn validation_examples() {
        let (data, grid) = (d6(), grid8());
        assert!(validate_assignment(&z(&[(1, 2), (6, 1)]), &data, &FIRST, &grid));
        assert!(!validate_assignment(&z(&[(1, 1), (2, 1), (5, 1)]), &data, &FIRST, &grid));
        assert!(!validate_assignment(&z(&[]), &data, &FIRST, &grid));
    }

    fn class_solutions() -> Vec<(usize, Vec<usize>, Vec<Assignment>)> {
        let anon = local_recode(&d6(), 3, grid8().hierarchies()).unwrap();
        let release = anon.release();
        attack_all(&release, &EnumerationLimits::default(), Execution::Sequential)
            .unwrap()
            .into_iter()
            .filter_map(|o| match o.target {
                Target::Class(c) => Some((c, release.classes[c].rows.clone(), o.solutions().to_vec())),
                Target::Outliers => None,
            })
            .collect()
    }

    #[test]
    fn d6_valid_assignments() {
        let (data, grid) = (d6(), grid8());
        let sols = class_solutions();
        let (_, members, first) = sols.iter().find(|(c, _, _)| *c == 0).unwrap();
        assert_eq!(members, &FIRST.to_vec());
        assert_eq!(find_valid(first, &data, members, &grid).unwrap(), z(&[(1, 2), (6, 1)]));
        let (_, members, second) = sols.iter().find(|(c, _, _)| *c == 1).unwrap();
        assert_eq!(members, &SECOND.to_vec());
        assert_eq!(
            find_valid(second, &data, members, &grid).unwrap(),
            z(&[(11, 1), (15, 1), (16, 1)])
        );
        assert_eq!(find_valid(&[], &data, members, &grid), Err(FpsoError::NoValidAssignment));
    }

    #[test]
    fn multiple_valid_is_surfaced() {
        let (data, grid) = (d6(), grid8());
        let a = z(&[(1, 2), (6, 1)]);
        let b = z(&[(1, 2), (6, 1), (16, 0)]);
        assert!(matches!(
            find_valid(&[a, b], &data, &FIRST, &grid),
            Err(FpsoError::MultipleValid(v)) if v.len() == 2
        ));
    }

    #[test]
    fn single_out_examples() {
        let (data, grid) = (d6(), grid8());
        let first = single_out(0, &z(&[(1, 2), (6, 1)]), &data, &FIRST, &grid);
        assert_eq!(first.category, Category::Single1);
        assert_eq!(first.singled_out.len(), 1);
        let p = &first.singled_out[0];
        assert_eq!(p.predicate.to_string(), "Q1∈[3,4] ∧ Q2∈[3,4]");
        assert_eq!(p.record, Some(2));
        assert_eq!(data.records().iter().filter(|r| p.predicate.matches(r)).count(), 1);

        let second = single_out(1, &z(&[(11, 1), (15, 1), (16, 1)]), &data, &SECOND, &grid);
        assert_eq!(second.category, Category::SingleMany);
        assert_eq!(second.singled_out.len(), 3);
        assert!(second.singled_out.iter().all(|s| s.record.is_some()));

        let failed = single_out(0, &z(&[(1, 3)]), &data, &FIRST, &grid);
        assert_eq!(failed.category, Category::Failed);
        assert!(failed.singled_out.is_empty());
    }

    #[test]
    fn category_serialization() {
        assert_eq!(serde_json::to_string(&Category::Single1).unwrap(), "\"single_1\"");
        assert_eq!(Category::SingleMany.as_str(), "single_many");
    }
}
