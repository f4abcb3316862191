//! The attacker's view of an anonymized dataset: generalized rows grouped
//! into classes, plus suppressed rows. Nothing here depends on formation
//! order, losses, or raw values.

use crate::domain::{Segment, SegmentGrid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleasedClass {
    pub segment: Segment,
    pub size: usize,
    /// Row positions in the released file.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub grid: SegmentGrid,
    pub k: usize,
    pub classes: Vec<ReleasedClass>,
    pub outlier_rows: Vec<usize>,
}

impl Release {
    /// Groups released rows (`None` = suppressed) into classes ordered by
    /// their first row.
    pub fn from_rows(grid: SegmentGrid, k: usize, rows: Vec<Option<Segment>>) -> Self {
        let mut classes: Vec<ReleasedClass> = Vec::new();
        let mut outlier_rows = Vec::new();
        for (row, seg) in rows.into_iter().enumerate() {
            match seg {
                None => outlier_rows.push(row),
                Some(seg) => match classes.iter_mut().find(|c| c.segment == seg) {
                    Some(c) => {
                        c.size += 1;
                        c.rows.push(row);
                    }
                    None => classes.push(ReleasedClass {
                        segment: seg,
                        size: 1,
                        rows: vec![row],
                    }),
                },
            }
        }
        Self {
            grid,
            k,
            classes,
            outlier_rows,
        }
    }

    pub fn outlier_count(&self) -> usize {
        self.outlier_rows.len()
    }

    pub fn row_count(&self) -> usize {
        self.classes.iter().map(|c| c.size).sum::<usize>() + self.outlier_count()
    }

    /// Per-row segment, `None` for suppressed rows.
    pub fn rows(&self) -> Vec<Option<Segment>> {
        let mut out = vec![None; self.row_count()];
        for c in &self.classes {
            for &r in &c.rows {
                out[r] = Some(c.segment.clone());
            }
        }
        out
    }
}
