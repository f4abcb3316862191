//! Small hand-checkable datasets shared by unit, integration, and
//! acceptance tests.

use crate::anonymizer::Dataset;
use crate::domain::{Hierarchy, SegmentGrid};

/// `[1,8]` with three layers: leaves of width 2.
pub fn h8() -> Hierarchy {
    Hierarchy::new("Q", 1, 8, 3).expect("valid hierarchy")
}

pub fn grid8() -> SegmentGrid {
    SegmentGrid::new(vec![
        Hierarchy::new("Q1", 1, 8, 3).expect("valid hierarchy"),
        Hierarchy::new("Q2", 1, 8, 3).expect("valid hierarchy"),
    ])
}

pub const D6: [[i64; 2]; 6] = [[1, 1], [2, 2], [3, 4], [5, 5], [6, 7], [8, 8]];

/// Six records forming two classes of three at state (2,2) when k = 3.
pub fn d6() -> Dataset {
    Dataset::for_hierarchies(grid8().hierarchies(), D6.iter().map(|r| r.to_vec()).collect())
        .expect("valid fixture")
}

/// `d6` plus the record (4,6), which ends up suppressed.
pub fn d7() -> Dataset {
    let mut records: Vec<Vec<i64>> = D6.iter().map(|r| r.to_vec()).collect();
    records.push(vec![4, 6]);
    Dataset::for_hierarchies(grid8().hierarchies(), records).expect("valid fixture")
}
