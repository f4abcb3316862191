//! Exhaustive enumeration of the non-negative integer solutions of a
//! [`ConstraintSystem`].
//!
//! Depth-first search over the variables in ascending index order. Every row
//! tracks its running sum and the remaining capacity of its unassigned
//! variables, which yields an exact value window for each variable before it
//! is branched on. Solutions come out in lexicographic order.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::ConstraintSystem;

/// A counter vector `z`, one entry per basic segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<u32>);

impl Assignment {
    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    pub max_solutions: usize,
    pub time_budget: Duration,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            max_solutions: 10_000_000,
            time_budget: Duration::from_secs(300),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationResult {
    pub solutions: Vec<Assignment>,
    /// False when a limit cut the search short.
    pub exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    MaxSolutions,
    TimeBudget,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("enumeration stopped by {limit:?} after {} solutions", partial.solutions.len())]
    LimitExceeded { limit: Limit, partial: EnumerationResult },
    #[error("variable z{0} is not bounded above by any row")]
    UnboundedVariable(usize),
    #[error("search box of {0} points exceeds the brute-force cap")]
    BoxTooLarge(u128),
}

impl EnumerationError {
    /// The solutions found before a limit was hit.
    pub fn partial(&self) -> Option<&EnumerationResult> {
        match self {
            EnumerationError::LimitExceeded { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

struct RowWindow {
    lower: u64,
    upper: u64,
    sum: u64,
    capacity: u64,
}

struct Search<'a> {
    rows: Vec<RowWindow>,
    var_rows: Vec<Vec<usize>>,
    ub: Vec<u64>,
    order: Vec<usize>,
    z: Vec<u32>,
    limits: &'a EnumerationLimits,
    started: Instant,
    nodes: u64,
    out: Vec<Assignment>,
    stopped: Option<Limit>,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize) {
        if self.stopped.is_some() {
            return;
        }
        self.nodes += 1;
        if self.nodes.is_multiple_of(4096) && self.started.elapsed() > self.limits.time_budget {
            self.stopped = Some(Limit::TimeBudget);
            return;
        }
        let Some(&var) = self.order.get(depth) else {
            if self.out.len() >= self.limits.max_solutions {
                self.stopped = Some(Limit::MaxSolutions);
            } else {
                self.out.push(Assignment(self.z.clone()));
            }
            return;
        };
        let own = self.ub[var];
        let mut lo = 0u64;
        let mut hi = own;
        for &r in &self.var_rows[var] {
            let row = &self.rows[r];
            hi = hi.min(row.upper - row.sum);
            let others = row.capacity - own;
            lo = lo.max(row.lower.saturating_sub(row.sum + others));
        }
        if lo > hi {
            return;
        }
        for &r in &self.var_rows[var] {
            self.rows[r].capacity -= own;
        }
        for value in lo..=hi {
            for &r in &self.var_rows[var] {
                self.rows[r].sum += value;
            }
            self.z[var] = value as u32;
            self.descend(depth + 1);
            for &r in &self.var_rows[var] {
                self.rows[r].sum -= value;
            }
            if self.stopped.is_some() {
                break;
            }
        }
        self.z[var] = 0;
        for &r in &self.var_rows[var] {
            self.rows[r].capacity += own;
        }
    }
}

/// Upper bound of each variable implied by the ub and eq rows covering it.
pub fn variable_bounds(cs: &ConstraintSystem) -> Result<Vec<u32>, EnumerationError> {
    let mut ub = vec![u32::MAX; cs.num_vars];
    for row in cs.ub.iter().chain(&cs.eq) {
        for &v in &row.vars {
            ub[v] = ub[v].min(row.bound);
        }
    }
    match ub.iter().position(|&b| b == u32::MAX) {
        Some(v) => Err(EnumerationError::UnboundedVariable(v)),
        None => Ok(ub),
    }
}

/// Every non-negative integer `z` satisfying all rows of `cs`.
pub fn enumerate_solutions(
    cs: &ConstraintSystem,
    limits: &EnumerationLimits,
) -> Result<EnumerationResult, EnumerationError> {
    let ub: Vec<u64> = variable_bounds(cs)?.into_iter().map(u64::from).collect();
    let mut rows = Vec::with_capacity(cs.row_count());
    let mut var_rows = vec![Vec::new(); cs.num_vars];
    let families = [
        (&cs.ub, false, true),
        (&cs.lb, true, false),
        (&cs.eq, true, true),
    ];
    for (family, has_lower, has_upper) in families {
        for row in family {
            let bound = row.bound as u64;
            let capacity: u64 = row.vars.iter().map(|&v| ub[v]).sum();
            let lower = if has_lower { bound } else { 0 };
            if lower > capacity {
                return Ok(EnumerationResult {
                    solutions: Vec::new(),
                    exhausted: true,
                });
            }
            for &v in &row.vars {
                if ub[v] > 0 {
                    var_rows[v].push(rows.len());
                }
            }
            rows.push(RowWindow {
                lower,
                upper: if has_upper { bound } else { u64::MAX },
                sum: 0,
                capacity,
            });
        }
    }
    let order = (0..cs.num_vars).filter(|&v| ub[v] > 0).collect();
    let mut search = Search {
        rows,
        var_rows,
        ub,
        order,
        z: vec![0; cs.num_vars],
        limits,
        started: Instant::now(),
        nodes: 0,
        out: Vec::new(),
        stopped: None,
    };
    search.descend(0);
    match search.stopped {
        None => Ok(EnumerationResult {
            solutions: search.out,
            exhausted: true,
        }),
        Some(limit) => Err(EnumerationError::LimitExceeded {
            limit,
            partial: EnumerationResult {
                solutions: search.out,
                exhausted: false,
            },
        }),
    }
}

/// Largest box the brute-force oracle will scan.
pub const BRUTE_FORCE_CAP: u128 = 20_000_000;

/// Scans all of `[0, box_bound]^λ` and keeps the points satisfying `cs`.
/// Only meant as a test oracle for [`enumerate_solutions`].
pub fn brute_force_solutions(cs: &ConstraintSystem, box_bound: u32) -> Result<Vec<Assignment>, EnumerationError> {
    let side = box_bound as u128 + 1;
    let points = (0..cs.num_vars).try_fold(1u128, |acc, _| acc.checked_mul(side));
    match points {
        Some(p) if p <= BRUTE_FORCE_CAP => {}
        Some(p) => return Err(EnumerationError::BoxTooLarge(p)),
        None => return Err(EnumerationError::BoxTooLarge(u128::MAX)),
    }
    let mut out = Vec::new();
    let mut z = vec![0u32; cs.num_vars];
    loop {
        if cs.is_satisfied(&z) {
            out.push(Assignment(z.clone()));
        }
        // odometer, last variable fastest
        let mut i = cs.num_vars;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if z[i] < box_bound {
                z[i] += 1;
                break;
            }
            z[i] = 0;
        }
    }
}
