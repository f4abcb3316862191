//! Linear systems over basic-segment counters with 0/1 coefficients.

use serde::{Deserialize, Serialize};

/// `Σ_{i ∈ vars} z_i (op) bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Row {
    pub vars: Vec<usize>,
    pub bound: u32,
}

impl Row {
    pub fn new(mut vars: Vec<usize>, bound: u32) -> Self {
        vars.sort_unstable();
        vars.dedup();
        Self { vars, bound }
    }

    pub fn sum(&self, z: &[u32]) -> u64 {
        self.vars.iter().map(|&i| z[i] as u64).sum()
    }
}

/// Upper-bound, lower-bound and equality rows; rows are deduplicated
/// within each family.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub num_vars: usize,
    pub ub: Vec<Row>,
    pub lb: Vec<Row>,
    pub eq: Vec<Row>,
}

impl ConstraintSystem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            ..Default::default()
        }
    }

    fn push(&mut self, family: usize, row: Row) {
        debug_assert!(row.vars.iter().all(|&v| v < self.num_vars));
        let rows = match family {
            0 => &mut self.ub,
            1 => &mut self.lb,
            _ => &mut self.eq,
        };
        if !rows.contains(&row) {
            rows.push(row);
        }
    }

    pub fn at_most(&mut self, vars: Vec<usize>, bound: u32) {
        self.push(0, Row::new(vars, bound));
    }

    pub fn at_least(&mut self, vars: Vec<usize>, bound: u32) {
        self.push(1, Row::new(vars, bound));
    }

    pub fn exactly(&mut self, vars: Vec<usize>, value: u32) {
        self.push(2, Row::new(vars, value));
    }

    pub fn row_count(&self) -> usize {
        self.ub.len() + self.lb.len() + self.eq.len()
    }

    pub fn is_satisfied(&self, z: &[u32]) -> bool {
        z.len() == self.num_vars
            && self.ub.iter().all(|r| r.sum(z) <= r.bound as u64)
            && self.lb.iter().all(|r| r.sum(z) >= r.bound as u64)
            && self.eq.iter().all(|r| r.sum(z) == r.bound as u64)
    }

    /// Rows that `z` violates, as `(family, index)` pairs.
    pub fn violations(&self, z: &[u32]) -> Vec<(&'static str, usize)> {
        let mut out = Vec::new();
        out.extend(self.ub.iter().enumerate().filter(|(_, r)| r.sum(z) > r.bound as u64).map(|(i, _)| ("ub", i)));
        out.extend(self.lb.iter().enumerate().filter(|(_, r)| r.sum(z) < r.bound as u64).map(|(i, _)| ("lb", i)));
        out.extend(self.eq.iter().enumerate().filter(|(_, r)| r.sum(z) != r.bound as u64).map(|(i, _)| ("eq", i)));
        out
    }
}
