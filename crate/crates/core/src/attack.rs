//! Combinatorial refinement attacks on a released dataset.
//!
//! Everything here works from the attacker's view ([`Release`]): class
//! segments, class sizes, the suppressed row count, `k`, and the hierarchies.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymizer::{public_criteria, state_loss, LossValue};
use crate::constraints::ConstraintSystem;
use crate::domain::{DomainError, Segment};
use crate::enumerator::{enumerate_solutions, EnumerationError, EnumerationLimits, EnumerationResult};
use crate::exec::Execution;
use crate::release::Release;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("no class with index {0}")]
    UnknownClass(usize),
    #[error("the release has no suppressed records")]
    NoOutliers,
    #[error("class size {size} does not fit in a u32 bound")]
    TooLarge { size: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// The attacker-computable sort key of a class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassKey {
    pub loss: LossValue,
    pub c1: u32,
    pub c2: BigRational,
}

impl PartialOrd for ClassKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ClassKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.loss
            .cmp(&other.loss)
            .then(self.c1.cmp(&other.c1))
            .then_with(|| self.c2.cmp(&other.c2))
    }
}

/// Classes ranked by `(loss, c1, c2)`. Classes with equal keys share a tie
/// group and are not ordered against each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassOrdering {
    /// Class indices, ascending by key; ties keep release order.
    pub ranked: Vec<usize>,
    /// Tie group of each class, indexed by class.
    pub group: Vec<usize>,
    pub keys: Vec<ClassKey>,
}

impl ClassOrdering {
    pub fn group_count(&self) -> usize {
        self.group.iter().max().map_or(0, |g| g + 1)
    }

    /// Members of tie group `g`, in rank order.
    pub fn group_members(&self, g: usize) -> Vec<usize> {
        self.ranked.iter().copied().filter(|&c| self.group[c] == g).collect()
    }

    /// Position of class `c` in the ranking.
    pub fn rank_of(&self, c: usize) -> usize {
        self.ranked.iter().position(|&x| x == c).expect("class is ranked")
    }

    /// True when `a` must have been formed before `b`.
    pub fn strictly_before(&self, a: usize, b: usize) -> bool {
        self.group[a] < self.group[b]
    }
}

pub fn class_key(release: &Release, segment: &Segment) -> Result<ClassKey, DomainError> {
    let state = segment.state();
    let hierarchies = release.grid.hierarchies();
    let loss = state_loss(&state, hierarchies)?;
    let (c1, c2) = public_criteria(&state, hierarchies);
    Ok(ClassKey { loss, c1, c2 })
}

pub fn order_classes(release: &Release) -> Result<ClassOrdering, DomainError> {
    let keys = release
        .classes
        .iter()
        .map(|c| class_key(release, &c.segment))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ranked: Vec<usize> = (0..keys.len()).collect();
    ranked.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut group = vec![0; keys.len()];
    let mut g = 0;
    for w in 1..ranked.len() {
        if keys[ranked[w]] != keys[ranked[w - 1]] {
            g += 1;
        }
        group[ranked[w]] = g;
    }
    Ok(ClassOrdering { ranked, group, keys })
}

fn bound(size: usize) -> Result<u32, AttackError> {
    u32::try_from(size).map_err(|_| AttackError::TooLarge { size })
}

fn sparse_bound(k: usize) -> Result<u32, AttackError> {
    bound(k.saturating_sub(1))
}

/// Constraint system of class `target`.
///
/// Rows: outside-zero pins, halves (`≥ 1`), overlap with strictly earlier
/// classes (`= 0`), sparse sub-segments (`≤ k-1`), and the class size.
pub fn build_eq_constraints(
    release: &Release,
    ordering: &ClassOrdering,
    target: usize,
) -> Result<ConstraintSystem, AttackError> {
    let grid = &release.grid;
    let class = release.classes.get(target).ok_or(AttackError::UnknownClass(target))?;
    let inside = grid.basic_segments_of(&class.segment)?;
    let mut cs = ConstraintSystem::new(grid.lambda());

    let mut is_inside = vec![false; grid.lambda()];
    for &i in &inside {
        is_inside[i] = true;
    }
    for j in (0..grid.lambda()).filter(|&j| !is_inside[j]) {
        cs.exactly(vec![j], 0);
    }

    if class.segment.is_compound() {
        for half in class.segment.half_segments()? {
            cs.at_least(grid.basic_segments_of(&half)?, 1);
        }
    }

    for (other, oc) in release.classes.iter().enumerate() {
        if other == target || !ordering.strictly_before(other, target) {
            continue;
        }
        let shared: Vec<usize> = grid
            .basic_segments_of(&oc.segment)?
            .into_iter()
            .filter(|&i| is_inside[i])
            .collect();
        if !shared.is_empty() {
            cs.exactly(shared, 0);
        }
    }

    let active: Vec<&Segment> = release
        .classes
        .iter()
        .map(|c| &c.segment)
        .filter(|s| grid.contains(&class.segment, s).unwrap_or(false))
        .collect();
    let cap = sparse_bound(release.k)?;
    for sub in grid.enumerate_subsegments(&class.segment)? {
        if !active.contains(&&sub) {
            cs.at_most(grid.basic_segments_of(&sub)?, cap);
        }
    }

    cs.exactly(inside, bound(class.size)?);
    Ok(cs)
}

/// Constraint system of the suppressed records over the whole grid.
pub fn build_outlier_constraints(release: &Release) -> Result<ConstraintSystem, AttackError> {
    let count = release.outlier_count();
    if count == 0 {
        return Err(AttackError::NoOutliers);
    }
    let grid = &release.grid;
    let top = grid.top();
    let mut cs = ConstraintSystem::new(grid.lambda());

    for class in &release.classes {
        cs.exactly(grid.basic_segments_of(&class.segment)?, 0);
    }

    if count >= release.k && top.is_compound() {
        for half in top.half_segments()? {
            cs.at_least(grid.basic_segments_of(&half)?, 1);
        }
    }

    let cap = sparse_bound(release.k)?;
    for seg in grid.enumerate_subsegments(&top)? {
        if seg != top && !release.classes.iter().any(|c| c.segment == seg) {
            cs.at_most(grid.basic_segments_of(&seg)?, cap);
        }
    }

    cs.exactly((0..grid.lambda()).collect(), bound(count)?);
    Ok(cs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Target {
    Class(usize),
    Outliers,
}

/// One attacked target with its system and enumeration outcome.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub target: Target,
    /// Position in the attack order; outliers come last.
    pub rank: usize,
    pub system: ConstraintSystem,
    pub result: Result<EnumerationResult, EnumerationError>,
    pub runtime: Duration,
}

impl AttackOutcome {
    /// Solutions found, complete or partial.
    pub fn solutions(&self) -> &[crate::enumerator::Assignment] {
        match &self.result {
            Ok(r) => &r.solutions,
            Err(e) => e.partial().map_or(&[], |p| &p.solutions),
        }
    }

    pub fn exhausted(&self) -> bool {
        matches!(&self.result, Ok(r) if r.exhausted)
    }
}

/// Attacks every class in rank order, then the suppressed records.
/// Enumeration errors stay with their target.
pub fn attack_all(
    release: &Release,
    limits: &EnumerationLimits,
    exec: Execution,
) -> Result<Vec<AttackOutcome>, AttackError> {
    let ordering = order_classes(release)?;
    let mut targets: Vec<Target> = ordering.ranked.iter().map(|&c| Target::Class(c)).collect();
    if release.outlier_count() > 0 {
        targets.push(Target::Outliers);
    }
    let mut systems = Vec::with_capacity(targets.len());
    for &t in &targets {
        systems.push(match t {
            Target::Class(c) => build_eq_constraints(release, &ordering, c)?,
            Target::Outliers => build_outlier_constraints(release)?,
        });
    }
    let jobs: Vec<(usize, Target, ConstraintSystem)> = targets
        .into_iter()
        .zip(systems)
        .enumerate()
        .map(|(rank, (t, s))| (rank, t, s))
        .collect();
    Ok(exec.map(&jobs, |(rank, target, system)| {
        let started = Instant::now();
        let result = enumerate_solutions(system, limits);
        AttackOutcome {
            target: *target,
            rank: *rank,
            system: system.clone(),
            result,
            runtime: started.elapsed(),
        }
    }))
}
