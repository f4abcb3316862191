//! Greedy local recoding: information loss, tie-breaking criteria, the
//! exhaustive lattice scan that picks the optimal state, and the iterative
//! carve-out of equivalence classes with suppression of the remainder.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::domain::{
    DomainError, GeneralizationLattice, GeneralizationState, Hierarchy, Node, Segment, SegmentGrid,
};
use crate::exec::Execution;
use crate::release::{Release, ReleasedClass};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnonymizeError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("attribute {attribute} contains the value {value} more than once")]
    DuplicateValues { attribute: usize, value: i64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Raw microdata: one integer vector per record, all attributes numeric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    names: Vec<String>,
    records: Vec<Vec<i64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, records: Vec<Vec<i64>>) -> Result<Self, AnonymizeError> {
        if let Some(bad) = records.iter().find(|r| r.len() != names.len()) {
            return Err(DomainError::ArityMismatch {
                expected: names.len(),
                got: bad.len(),
            }
            .into());
        }
        Ok(Self { names, records })
    }

    /// Dataset with names taken from the hierarchies.
    pub fn for_hierarchies(hierarchies: &[Hierarchy], records: Vec<Vec<i64>>) -> Result<Self, AnonymizeError> {
        Self::new(hierarchies.iter().map(|h| h.name().to_string()).collect(), records)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn records(&self) -> &[Vec<i64>] {
        &self.records
    }

    pub fn record(&self, id: usize) -> &[i64] {
        &self.records[id]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks domain membership and per-attribute distinctness.
    pub fn validate(&self, grid: &SegmentGrid) -> Result<(), AnonymizeError> {
        for r in &self.records {
            grid.check_record(r)?;
        }
        for attribute in 0..self.names.len() {
            let mut seen = HashSet::with_capacity(self.records.len());
            for r in &self.records {
                if !seen.insert(r[attribute]) {
                    return Err(AnonymizeError::DuplicateValues {
                        attribute,
                        value: r[attribute],
                    });
                }
            }
        }
        Ok(())
    }
}

/// Normalized loss of one attribute at `layer`: `(len(layer) - 1) / (L - 1)`.
///
/// This is the min-max normalization of `len(layer) / L · n`; the record
/// count cancels out.
pub fn qi_loss_normalized(h: &Hierarchy, layer: u32) -> Result<BigRational, DomainError> {
    if layer > h.height() {
        return Err(DomainError::InvalidLayer {
            layer,
            height: h.height(),
        });
    }
    let full = h.domain().len();
    Ok(BigRational::new(
        BigInt::from(h.width(layer) - 1),
        BigInt::from(full - 1),
    ))
}

/// Geometric-mean information loss of a state.
///
/// Comparisons use the exact product `∏(1 + q_i)`, which orders states the
/// same way as its m-th root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossValue {
    product: BigRational,
    per_attribute: Vec<BigRational>,
}

impl LossValue {
    pub fn per_attribute(&self) -> &[BigRational] {
        &self.per_attribute
    }

    pub fn product(&self) -> &BigRational {
        &self.product
    }

    /// `(∏ (q_i + 1)^(1/m)) - 1` in floating point.
    pub fn decimal(&self) -> f64 {
        if let Some(v) = self.exact().and_then(|r| r.to_f64()) {
            return v;
        }
        let m = self.per_attribute.len() as f64;
        self.per_attribute
            .iter()
            .map(|q| (q.to_f64().unwrap_or(f64::NAN) + 1.0).powf(1.0 / m))
            .product::<f64>()
            - 1.0
    }

    /// The loss as an exact rational, when the m-th root of the product is rational.
    pub fn exact(&self) -> Option<BigRational> {
        let m = self.per_attribute.len() as u32;
        let root = |v: &BigInt| -> Option<BigInt> {
            let u = v.to_biguint()?;
            let r: BigUint = u.nth_root(m);
            (r.pow(m) == u).then(|| BigInt::from(r))
        };
        let num = root(self.product.numer())?;
        let den = root(self.product.denom())?;
        Some(BigRational::new(num, den) - BigRational::one())
    }
}

impl PartialOrd for LossValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LossValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.product.cmp(&other.product)
    }
}

pub fn state_loss(state: &GeneralizationState, hierarchies: &[Hierarchy]) -> Result<LossValue, DomainError> {
    if state.layers().len() != hierarchies.len() {
        return Err(DomainError::ArityMismatch {
            expected: hierarchies.len(),
            got: state.layers().len(),
        });
    }
    let per_attribute = state
        .layers()
        .iter()
        .zip(hierarchies)
        .map(|(&l, h)| qi_loss_normalized(h, l))
        .collect::<Result<Vec<_>, _>>()?;
    let product = per_attribute
        .iter()
        .fold(BigRational::one(), |acc, q| acc * (q + BigRational::one()));
    Ok(LossValue {
        product,
        per_attribute,
    })
}

/// Tie-breaking criteria `c1`, `c2`, `c3`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Criteria {
    pub c1: u32,
    pub c2: BigRational,
    pub c3: BigRational,
}

/// `c1` and `c2` only depend on the state and are visible to anyone holding the hierarchies.
pub fn public_criteria(state: &GeneralizationState, hierarchies: &[Hierarchy]) -> (u32, BigRational) {
    let m = hierarchies.len() as i64;
    let c2 = state
        .layers()
        .iter()
        .zip(hierarchies)
        .map(|(&l, h)| BigRational::new(BigInt::from(l), BigInt::from(h.height())))
        .fold(BigRational::zero(), |a, b| a + b)
        / BigRational::from_integer(BigInt::from(m));
    (state.layer_sum(), c2)
}

/// Criteria of `state` evaluated on the records `ids` of `data`.
pub fn criteria(
    state: &GeneralizationState,
    data: &Dataset,
    ids: &[usize],
    hierarchies: &[Hierarchy],
) -> Result<Criteria, AnonymizeError> {
    if ids.is_empty() {
        return Err(AnonymizeError::EmptyDataset);
    }
    let (c1, c2) = public_criteria(state, hierarchies);
    let m = hierarchies.len();
    let mut ratio_sum = BigRational::zero();
    for (axis, (&layer, h)) in state.layers().iter().zip(hierarchies).enumerate() {
        let raw: HashSet<i64> = ids.iter().map(|&i| data.record(i)[axis]).collect();
        let generalized: HashSet<_> = raw.iter().map(|&v| h.generalize(v, layer)).collect();
        ratio_sum += BigRational::new(BigInt::from(generalized.len()), BigInt::from(raw.len()));
    }
    let c3 = BigRational::one() - ratio_sum / BigRational::from_integer(BigInt::from(m));
    Ok(Criteria { c1, c2, c3 })
}

/// One record of a formed equivalence class, with its bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub segment: Segment,
    pub state: GeneralizationState,
    pub members: Vec<usize>,
    pub iteration: usize,
    pub loss: LossValue,
    pub criteria: Criteria,
}

impl EquivalenceClass {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Output of local recoding: classes in formation order plus suppressed records.
#[derive(Debug, Clone)]
pub struct AnonymizedDataset {
    pub grid: SegmentGrid,
    pub k: usize,
    pub n: usize,
    pub classes: Vec<EquivalenceClass>,
    pub outliers: Vec<usize>,
}

impl AnonymizedDataset {
    /// What a publisher releases: one generalized row per record, in input order.
    pub fn release(&self) -> Release {
        let mut row_class = vec![None; self.n];
        for (c, class) in self.classes.iter().enumerate() {
            for &m in &class.members {
                row_class[m] = Some(c);
            }
        }
        Release::from_rows(
            self.grid.clone(),
            self.k,
            row_class
                .iter()
                .map(|c| c.map(|c| self.classes[c].segment.clone()))
                .collect(),
        )
    }

    /// Records still unassigned when iteration `t` started.
    pub fn remainder_before(&self, iteration: usize) -> Vec<usize> {
        let mut taken = vec![false; self.n];
        for class in self.classes.iter().filter(|c| c.iteration < iteration) {
            for &m in &class.members {
                taken[m] = true;
            }
        }
        (0..self.n).filter(|&i| !taken[i]).collect()
    }

    pub fn iterations(&self) -> usize {
        self.classes.last().map_or(0, |c| c.iteration + 1)
    }
}

impl From<&EquivalenceClass> for ReleasedClass {
    fn from(c: &EquivalenceClass) -> Self {
        ReleasedClass {
            segment: c.segment.clone(),
            size: c.size(),
            rows: c.members.clone(),
        }
    }
}

/// Greedy local-recoding anonymizer over a fixed set of hierarchies.
#[derive(Debug, Clone)]
pub struct Anonymizer {
    grid: SegmentGrid,
    lattice: GeneralizationLattice,
    losses: Vec<LossValue>,
    exec: Execution,
}

struct Candidate {
    position: usize,
    criteria: Criteria,
}

impl Anonymizer {
    pub fn new(grid: SegmentGrid) -> Self {
        let lattice = GeneralizationLattice::new(grid.hierarchies());
        let losses = lattice
            .states()
            .iter()
            .map(|s| state_loss(s, grid.hierarchies()).expect("lattice states are valid"))
            .collect();
        Self {
            grid,
            lattice,
            losses,
            exec: Execution::default(),
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn grid(&self) -> &SegmentGrid {
        &self.grid
    }

    pub fn lattice(&self) -> &GeneralizationLattice {
        &self.lattice
    }

    fn group_key(&self, record: &[i64], state: &GeneralizationState) -> Vec<u64> {
        record
            .iter()
            .zip(state.layers())
            .zip(self.grid.hierarchies())
            .map(|((&v, &l), h)| match l {
                0 => (v - h.domain().lo) as u64,
                l => h.locate(v, l).rank,
            })
            .collect()
    }

    fn has_k_group(&self, data: &Dataset, ids: &[usize], state: &GeneralizationState, k: usize) -> bool {
        let mut counts: HashMap<Vec<u64>, usize> = HashMap::new();
        ids.iter().any(|&i| {
            let c = counts.entry(self.group_key(data.record(i), state)).or_default();
            *c += 1;
            *c >= k
        })
    }

    fn compare(&self, a: &Candidate, b: &Candidate) -> Ordering {
        self.losses[a.position]
            .cmp(&self.losses[b.position])
            .then_with(|| a.criteria.cmp(&b.criteria))
            .then_with(|| a.position.cmp(&b.position))
    }

    /// The anonymous state of minimal loss on `ids`, ties broken by `c1`,
    /// `c2`, `c3` and then lattice order. Returns the top state when no
    /// state forms a class of `k` records.
    pub fn find_optimal_state(&self, data: &Dataset, ids: &[usize], k: usize) -> Result<GeneralizationState, AnonymizeError> {
        if ids.is_empty() {
            return Err(AnonymizeError::EmptyDataset);
        }
        if k < 2 {
            return Err(AnonymizeError::InvalidK(k));
        }
        let positions: Vec<usize> = (0..self.lattice.len()).collect();
        let candidates = self.exec.map(&positions, |&position| {
            let state = &self.lattice.states()[position];
            if !self.has_k_group(data, ids, state, k) {
                return None;
            }
            let criteria = criteria(state, data, ids, self.grid.hierarchies()).ok()?;
            Some(Candidate { position, criteria })
        });
        let best = candidates
            .into_iter()
            .flatten()
            .min_by(|a, b| self.compare(a, b));
        Ok(match best {
            Some(c) => self.lattice.states()[c.position].clone(),
            None => GeneralizationState::top(self.grid.hierarchies()),
        })
    }

    /// Groups `ids` under `state`; every group of at least `k` records
    /// becomes a class. Classes come back ordered by their lowest basic segment.
    pub fn apply_state(
        &self,
        data: &Dataset,
        ids: &[usize],
        state: &GeneralizationState,
        k: usize,
    ) -> (Vec<(Segment, Vec<usize>)>, Vec<usize>) {
        let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
        for &i in ids {
            groups.entry(self.group_key(data.record(i), state)).or_default().push(i);
        }
        let mut classes = Vec::new();
        let mut remainder = Vec::new();
        for (key, members) in groups {
            if members.len() >= k && state.layers().iter().all(|&l| l >= 1) {
                let nodes = key
                    .iter()
                    .zip(state.layers())
                    .map(|(&rank, &layer)| Node::new(layer, rank))
                    .collect();
                classes.push((Segment::new(nodes), members));
            } else {
                remainder.extend(members);
            }
        }
        for (_, members) in &mut classes {
            members.sort_unstable();
        }
        classes.sort_by_key(|(seg, _)| self.grid.basic_segments_of(seg).map(|b| b[0]).unwrap_or(0));
        remainder.sort_unstable();
        (classes, remainder)
    }

    pub fn local_recode(&self, data: &Dataset, k: usize) -> Result<AnonymizedDataset, AnonymizeError> {
        if k < 2 {
            return Err(AnonymizeError::InvalidK(k));
        }
        data.validate(&self.grid)?;
        let hierarchies = self.grid.hierarchies();
        let mut remaining: Vec<usize> = (0..data.len()).collect();
        let mut classes = Vec::new();
        let mut iteration = 0;
        while remaining.len() >= k {
            let state = self.find_optimal_state(data, &remaining, k)?;
            if state.is_top(hierarchies) {
                break;
            }
            let loss = state_loss(&state, hierarchies)?;
            let crit = criteria(&state, data, &remaining, hierarchies)?;
            let (formed, rest) = self.apply_state(data, &remaining, &state, k);
            debug_assert!(!formed.is_empty());
            for (segment, members) in formed {
                classes.push(EquivalenceClass {
                    segment,
                    state: state.clone(),
                    members,
                    iteration,
                    loss: loss.clone(),
                    criteria: crit.clone(),
                });
            }
            remaining = rest;
            iteration += 1;
        }
        Ok(AnonymizedDataset {
            grid: self.grid.clone(),
            k,
            n: data.len(),
            classes,
            outliers: remaining,
        })
    }
}

/// Convenience wrapper over [`Anonymizer::local_recode`].
pub fn local_recode(data: &Dataset, k: usize, hierarchies: &[Hierarchy]) -> Result<AnonymizedDataset, AnonymizeError> {
    Anonymizer::new(SegmentGrid::new(hierarchies.to_vec())).local_recode(data, k)
}
