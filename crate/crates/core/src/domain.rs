//! Attribute domains, binary generalization hierarchies, generalization
//! states and the lattice they form, and the segment grid.
//!
//! Layer numbering follows the anonymization literature: leaves sit at layer
//! 1, the root (the whole domain) at layer `height`, and layer 0 means "not
//! generalized at all". Ranks index the nodes of a layer from left to right.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("hierarchy height must be at least 1, got {0}")]
    InvalidHeight(u32),
    #[error("domain [{lo},{hi}] must contain at least two values")]
    InvalidDomain { lo: i64, hi: i64 },
    #[error("domain length {length} is not divisible by 2^{exponent}")]
    NonDivisibleDomain { length: u64, exponent: u32 },
    #[error("segment does not belong to this grid")]
    GridMismatch,
    #[error("segment is basic and has no half-segments")]
    NotCompound,
    #[error("value {value} of attribute {attribute} lies outside its domain")]
    OutOfDomain { attribute: usize, value: i64 },
    #[error("layer {layer} exceeds hierarchy height {height}")]
    InvalidLayer { layer: u32, height: u32 },
    #[error("record has {got} attributes, expected {expected}")]
    ArityMismatch { expected: usize, got: usize },
}

/// Closed integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub fn new(lo: i64, hi: i64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn point(v: i64) -> Self {
        Self { lo: v, hi: v }
    }

    /// Number of integer points.
    pub fn len(&self) -> u64 {
        (self.hi - self.lo) as u64 + 1
    }

    /// Always false: a closed interval holds at least its endpoint.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn parse(s: &str) -> Option<Self> {
        let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
        let (lo, hi) = inner.split_once(',')?;
        let lo = lo.trim().parse().ok()?;
        let hi = hi.trim().parse().ok()?;
        (lo <= hi).then_some(Self { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// A node `(layer, rank)` of a generalization hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub layer: u32,
    pub rank: u64,
}

impl Node {
    pub fn new(layer: u32, rank: u64) -> Self {
        Self { layer, rank }
    }

    /// The two children one layer down, or `None` for leaves.
    pub fn children(&self) -> Option<[Node; 2]> {
        (self.layer >= 2).then(|| {
            [
                Node::new(self.layer - 1, 2 * self.rank),
                Node::new(self.layer - 1, 2 * self.rank + 1),
            ]
        })
    }

    /// True when `self` is a descendant of, or equal to, `ancestor`.
    pub fn within(&self, ancestor: &Node) -> bool {
        self.layer <= ancestor.layer && self.rank >> (ancestor.layer - self.layer) == ancestor.rank
    }
}

/// Serializable description of a hierarchy, as found in config files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub height: u32,
}

/// Binary interval tree over an integer attribute domain with equal-width
/// nodes on every layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    name: String,
    domain: Interval,
    height: u32,
    leaf_width: u64,
}

impl Hierarchy {
    pub fn new(name: impl Into<String>, lo: i64, hi: i64, height: u32) -> Result<Self, DomainError> {
        if height < 1 {
            return Err(DomainError::InvalidHeight(height));
        }
        if hi <= lo {
            return Err(DomainError::InvalidDomain { lo, hi });
        }
        let length = (hi - lo) as u64 + 1;
        let exponent = height - 1;
        let leaves = 1u64
            .checked_shl(exponent)
            .filter(|&l| l <= length)
            .ok_or(DomainError::NonDivisibleDomain { length, exponent })?;
        if !length.is_multiple_of(leaves) {
            return Err(DomainError::NonDivisibleDomain { length, exponent });
        }
        Ok(Self {
            name: name.into(),
            domain: Interval::new(lo, hi),
            height,
            leaf_width: length / leaves,
        })
    }

    pub fn from_spec(spec: &HierarchySpec) -> Result<Self, DomainError> {
        Self::new(spec.name.clone(), spec.lo, spec.hi, spec.height)
    }

    pub fn spec(&self) -> HierarchySpec {
        HierarchySpec {
            name: self.name.clone(),
            lo: self.domain.lo,
            hi: self.domain.hi,
            height: self.height,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn leaf_count(&self) -> u64 {
        1 << (self.height - 1)
    }

    /// Number of nodes on `layer` (1..=height).
    pub fn layer_size(&self, layer: u32) -> u64 {
        1 << (self.height - layer)
    }

    /// Width of every interval on `layer`; layer 0 has width 1.
    pub fn width(&self, layer: u32) -> u64 {
        match layer {
            0 => 1,
            l => self.leaf_width << (l - 1),
        }
    }

    pub fn interval(&self, node: Node) -> Interval {
        let w = self.width(node.layer) as i64;
        let lo = self.domain.lo + node.rank as i64 * w;
        Interval::new(lo, lo + w - 1)
    }

    /// All intervals of one layer in rank order.
    pub fn layer(&self, layer: u32) -> Vec<Interval> {
        (0..self.layer_size(layer))
            .map(|r| self.interval(Node::new(layer, r)))
            .collect()
    }

    pub fn root(&self) -> Node {
        Node::new(self.height, 0)
    }

    pub fn is_valid(&self, node: Node) -> bool {
        node.layer >= 1 && node.layer <= self.height && node.rank < self.layer_size(node.layer)
    }

    /// The node at `layer` (>= 1) containing `value`.
    pub fn locate(&self, value: i64, layer: u32) -> Node {
        debug_assert!(layer >= 1 && self.domain.contains(value));
        Node::new(layer, (value - self.domain.lo) as u64 / self.width(layer))
    }

    /// Generalize one value to `layer`; layer 0 is the identity.
    pub fn generalize(&self, value: i64, layer: u32) -> Interval {
        match layer {
            0 => Interval::point(value),
            l => self.interval(self.locate(value, l)),
        }
    }

    /// Inverse of [`Hierarchy::interval`]: the node whose interval is exactly `iv`.
    pub fn node_of(&self, iv: Interval) -> Option<Node> {
        let len = iv.len();
        if !len.is_multiple_of(self.leaf_width) || !(len / self.leaf_width).is_power_of_two() {
            return None;
        }
        let layer = (len / self.leaf_width).trailing_zeros() + 1;
        if layer > self.height || iv.lo < self.domain.lo {
            return None;
        }
        let offset = (iv.lo - self.domain.lo) as u64;
        let node = Node::new(layer, offset / len);
        (offset.is_multiple_of(len) && self.is_valid(node)).then_some(node)
    }

    /// Nodes equal to or below `node`, down to the leaves, layer by layer.
    pub fn descendants(&self, node: Node) -> Vec<Node> {
        (1..=node.layer)
            .rev()
            .flat_map(|layer| {
                let span = 1u64 << (node.layer - layer);
                (node.rank * span..(node.rank + 1) * span).map(move |r| Node::new(layer, r))
            })
            .collect()
    }
}

/// Per-attribute layer vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeneralizationState(pub Vec<u32>);

impl GeneralizationState {
    pub fn layers(&self) -> &[u32] {
        &self.0
    }

    pub fn layer_sum(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_top(&self, hierarchies: &[Hierarchy]) -> bool {
        self.0.iter().zip(hierarchies).all(|(&l, h)| l == h.height())
    }

    pub fn top(hierarchies: &[Hierarchy]) -> Self {
        Self(hierarchies.iter().map(Hierarchy::height).collect())
    }
}

impl fmt::Display for GeneralizationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

/// Every generalization state, ordered by layer sum and then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralizationLattice {
    states: Vec<GeneralizationState>,
}

impl GeneralizationLattice {
    pub fn new(hierarchies: &[Hierarchy]) -> Self {
        let mut states = vec![Vec::new()];
        for h in hierarchies {
            states = states
                .into_iter()
                .flat_map(|prefix: Vec<u32>| {
                    (0..=h.height()).map(move |l| {
                        let mut s = prefix.clone();
                        s.push(l);
                        s
                    })
                })
                .collect();
        }
        let mut states: Vec<_> = states.into_iter().map(GeneralizationState).collect();
        states.sort_by(|a, b| a.layer_sum().cmp(&b.layer_sum()).then_with(|| a.cmp(b)));
        Self { states }
    }

    pub fn states(&self) -> &[GeneralizationState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Product of one hierarchy node per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    nodes: Vec<Node>,
}

impl Segment {
    pub fn new(nodes: Vec<Node>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_basic(&self) -> bool {
        self.nodes.iter().all(|n| n.layer == 1)
    }

    pub fn is_compound(&self) -> bool {
        !self.is_basic()
    }

    pub fn state(&self) -> GeneralizationState {
        GeneralizationState(self.nodes.iter().map(|n| n.layer).collect())
    }

    /// Segments obtained by swapping one non-leaf node for one of its children.
    pub fn half_segments(&self) -> Result<Vec<Segment>, DomainError> {
        if self.is_basic() {
            return Err(DomainError::NotCompound);
        }
        let mut halves = Vec::new();
        for (axis, node) in self.nodes.iter().enumerate() {
            if let Some(children) = node.children() {
                for child in children {
                    let mut nodes = self.nodes.clone();
                    nodes[axis] = child;
                    halves.push(Segment::new(nodes));
                }
            }
        }
        Ok(halves)
    }
}

/// The grid of basic segments spanned by a set of hierarchies.
///
/// Basic segment `B_i` (1-based, as shown to users) is stored at zero-based
/// index `i - 1 = Σ rank_d · stride_d`, where the first attribute varies
/// fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentGrid {
    hierarchies: Vec<Hierarchy>,
    strides: Vec<usize>,
    lambda: usize,
}

impl SegmentGrid {
    pub fn new(hierarchies: Vec<Hierarchy>) -> Self {
        let mut strides = Vec::with_capacity(hierarchies.len());
        let mut lambda = 1usize;
        for h in &hierarchies {
            strides.push(lambda);
            lambda *= h.leaf_count() as usize;
        }
        Self {
            hierarchies,
            strides,
            lambda,
        }
    }

    pub fn from_specs(specs: &[HierarchySpec]) -> Result<Self, DomainError> {
        Ok(Self::new(
            specs.iter().map(Hierarchy::from_spec).collect::<Result<_, _>>()?,
        ))
    }

    pub fn hierarchies(&self) -> &[Hierarchy] {
        &self.hierarchies
    }

    pub fn dims(&self) -> usize {
        self.hierarchies.len()
    }

    /// Number of basic segments.
    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn top(&self) -> Segment {
        Segment::new(self.hierarchies.iter().map(Hierarchy::root).collect())
    }

    pub fn check(&self, seg: &Segment) -> Result<(), DomainError> {
        if seg.nodes.len() == self.dims()
            && seg.nodes.iter().zip(&self.hierarchies).all(|(n, h)| h.is_valid(*n))
        {
            Ok(())
        } else {
            Err(DomainError::GridMismatch)
        }
    }

    pub fn intervals(&self, seg: &Segment) -> Vec<Interval> {
        seg.nodes
            .iter()
            .zip(&self.hierarchies)
            .map(|(n, h)| h.interval(*n))
            .collect()
    }

    pub fn contains(&self, outer: &Segment, inner: &Segment) -> Result<bool, DomainError> {
        self.check(outer)?;
        self.check(inner)?;
        Ok(inner.nodes.iter().zip(&outer.nodes).all(|(i, o)| i.within(o)))
    }

    /// Zero-based index of the basic segment with the given leaf ranks.
    pub fn basic_index(&self, ranks: &[u64]) -> usize {
        ranks.iter().zip(&self.strides).map(|(&r, &s)| r as usize * s).sum()
    }

    /// Leaf ranks of the basic segment at zero-based `index`.
    pub fn basic_ranks(&self, index: usize) -> Vec<u64> {
        self.hierarchies
            .iter()
            .zip(&self.strides)
            .map(|(h, &s)| ((index / s) as u64) % h.leaf_count())
            .collect()
    }

    pub fn basic_segment(&self, index: usize) -> Segment {
        Segment::new(self.basic_ranks(index).into_iter().map(|r| Node::new(1, r)).collect())
    }

    /// Zero-based indices of the basic segments contained in `seg`, ascending.
    pub fn basic_segments_of(&self, seg: &Segment) -> Result<Vec<usize>, DomainError> {
        self.check(seg)?;
        let mut out = vec![0usize];
        for (axis, node) in seg.nodes.iter().enumerate() {
            let span = 1u64 << (node.layer - 1);
            let first = node.rank * span;
            let stride = self.strides[axis];
            out = out
                .into_iter()
                .flat_map(|base| (first..first + span).map(move |r| base + r as usize * stride))
                .collect();
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Every segment contained in `seg`, including `seg` itself.
    pub fn enumerate_subsegments(&self, seg: &Segment) -> Result<Vec<Segment>, DomainError> {
        self.check(seg)?;
        let mut out = vec![Vec::new()];
        for (node, h) in seg.nodes.iter().zip(&self.hierarchies) {
            let choices = h.descendants(*node);
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Node>| {
                    choices.iter().map(move |c| {
                        let mut p = prefix.clone();
                        p.push(*c);
                        p
                    })
                })
                .collect();
        }
        Ok(out.into_iter().map(Segment::new).collect())
    }

    /// Zero-based index of the basic segment holding `record`.
    pub fn locate_record(&self, record: &[i64]) -> Result<usize, DomainError> {
        self.check_record(record)?;
        Ok(record
            .iter()
            .zip(&self.hierarchies)
            .zip(&self.strides)
            .map(|((&v, h), &s)| h.locate(v, 1).rank as usize * s)
            .sum())
    }

    pub fn check_record(&self, record: &[i64]) -> Result<(), DomainError> {
        if record.len() != self.dims() {
            return Err(DomainError::ArityMismatch {
                expected: self.dims(),
                got: record.len(),
            });
        }
        for (attribute, (&value, h)) in record.iter().zip(&self.hierarchies).enumerate() {
            if !h.domain().contains(value) {
                return Err(DomainError::OutOfDomain { attribute, value });
            }
        }
        Ok(())
    }

    pub fn segment_contains_record(&self, seg: &Segment, record: &[i64]) -> bool {
        self.intervals(seg).iter().zip(record).all(|(iv, &v)| iv.contains(v))
    }
}

/// Generalize a record under `state`.
pub fn generalize_record(
    record: &[i64],
    state: &GeneralizationState,
    hierarchies: &[Hierarchy],
) -> Result<Vec<Interval>, DomainError> {
    if record.len() != hierarchies.len() || state.0.len() != hierarchies.len() {
        return Err(DomainError::ArityMismatch {
            expected: hierarchies.len(),
            got: record.len(),
        });
    }
    record
        .iter()
        .zip(&state.0)
        .zip(hierarchies)
        .enumerate()
        .map(|(attribute, ((&value, &layer), h))| {
            if layer > h.height() {
                return Err(DomainError::InvalidLayer {
                    layer,
                    height: h.height(),
                });
            }
            if !h.domain().contains(value) {
                return Err(DomainError::OutOfDomain { attribute, value });
            }
            Ok(h.generalize(value, layer))
        })
        .collect()
}
