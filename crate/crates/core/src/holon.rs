//! The holon hierarchy: recursive part-whole individuals, their heritable
//! mechanisms, and identity bookkeeping.
//!
//! A [`Holon`] owns its parts, so the parts relation is a tree by
//! construction. [`validate`] still checks id uniqueness because holons are
//! plain values and can be assembled by hand (or deserialized) with repeated
//! ids.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Run-scoped identifier. Ids are handed out by an [`IdSource`] and never
/// reused within a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HolonId(pub u64);

impl fmt::Display for HolonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("holon id space exhausted")]
pub struct IdsExhausted;

/// Monotone id counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdSource {
    next: u64,
}

impl Default for IdSource {
    fn default() -> Self {
        Self::new()
    }
}

impl IdSource {
    pub fn new() -> Self {
        IdSource { next: 0 }
    }

    pub fn starting_at(next: u64) -> Self {
        IdSource { next }
    }

    pub fn fresh(&mut self) -> Result<HolonId, IdsExhausted> {
        let id = self.next;
        self.next = self.next.checked_add(1).ok_or(IdsExhausted)?;
        Ok(HolonId(id))
    }

    /// The id the next call to [`IdSource::fresh`] will return.
    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// Real-valued traits plus optional small-integer type labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitVector<S> {
    pub values: Vec<S>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<u16>,
}

impl<S: Scalar> TraitVector<S> {
    pub fn new(values: Vec<S>) -> Self {
        TraitVector {
            values,
            tags: Vec::new(),
        }
    }

    pub fn tagged(values: Vec<S>, tags: Vec<u16>) -> Self {
        TraitVector { values, tags }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trait at `index`, or zero when the vector is shorter.
    pub fn get(&self, index: usize) -> S {
        self.values.get(index).copied().unwrap_or_else(S::zero)
    }

    pub fn tag(&self) -> Option<u16> {
        self.tags.first().copied()
    }

    /// Same length and identical tags: the vectors live in the same space.
    pub fn aligned(&self, other: &Self) -> bool {
        self.values.len() == other.values.len() && self.tags == other.tags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReproMode {
    Asexual,
    Multiparent,
}

impl ReproMode {
    pub fn flipped(self) -> Self {
        match self {
            ReproMode::Asexual => ReproMode::Multiparent,
            ReproMode::Multiparent => ReproMode::Asexual,
        }
    }
}

/// Heritable kinds of variation an operator can apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariationKind {
    /// 5A: perturb one trait.
    TraitChange,
    /// 5B: delete one part.
    PartDeletion,
    /// 5C: duplicate one part.
    PartDuplication,
    /// 5D: reproductive mechanism.
    ReproMechanism,
    /// 5E: fission or fusion mechanism.
    FissionFusionMechanism,
    /// 5F: cooperation enforcement mechanism.
    EnforcementMechanism,
}

impl VariationKind {
    pub const ALL: [VariationKind; 6] = [
        VariationKind::TraitChange,
        VariationKind::PartDeletion,
        VariationKind::PartDuplication,
        VariationKind::ReproMechanism,
        VariationKind::FissionFusionMechanism,
        VariationKind::EnforcementMechanism,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Condition label, `"5A"` through `"5F"`.
    pub fn code(self) -> &'static str {
        ["5A", "5B", "5C", "5D", "5E", "5F"][self.index()]
    }
}

/// Per-kind variation probabilities, indexed by [`VariationKind::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationRates<S>(pub [S; 6]);

impl<S: Scalar> MutationRates<S> {
    pub fn zero() -> Self {
        MutationRates([S::zero(); 6])
    }

    pub fn uniform(rate: S) -> Self {
        MutationRates([rate; 6])
    }

    pub fn get(&self, kind: VariationKind) -> S {
        self.0[kind.index()]
    }

    pub fn set(&mut self, kind: VariationKind, rate: S) {
        self.0[kind.index()] = rate;
    }

    pub fn with(mut self, kind: VariationKind, rate: S) -> Self {
        self.set(kind, rate);
        self
    }
}

/// Heritable meta-genome carried by every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanisms<S> {
    pub repro_mode: ReproMode,
    pub n_parents: u32,
    pub fission_rate: S,
    pub fusion_affinity: S,
    pub enforcement_strength: S,
    pub mutation_rates: MutationRates<S>,
}

impl<S: Scalar> Default for Mechanisms<S> {
    fn default() -> Self {
        Mechanisms {
            repro_mode: ReproMode::Asexual,
            n_parents: 2,
            fission_rate: S::zero(),
            fusion_affinity: S::zero(),
            enforcement_strength: S::zero(),
            mutation_rates: MutationRates::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Seed,
    Asexual,
    Multiparent,
    Fission,
    Fusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holon<S = f64> {
    pub id: HolonId,
    pub traits: TraitVector<S>,
    pub mechanisms: Mechanisms<S>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<Holon<S>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parent_ids: Vec<HolonId>,
    pub origin: Origin,
}

impl<S: Scalar> Holon<S> {
    /// A seed leaf with no parents.
    pub fn leaf(id: HolonId, traits: TraitVector<S>, mechanisms: Mechanisms<S>) -> Self {
        Holon {
            id,
            traits,
            mechanisms,
            parts: Vec::new(),
            parent_ids: Vec::new(),
            origin: Origin::Seed,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn depth(&self) -> usize {
        depth(self)
    }

    /// Number of nodes in the hierarchy, root included.
    pub fn node_count(&self) -> usize {
        1 + self.parts.iter().map(Holon::node_count).sum::<usize>()
    }

    /// Pre-order traversal.
    pub fn nodes(&self) -> Vec<&Holon<S>> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.parts.iter().rev());
        }
        out
    }

    /// Leaves of the hierarchy, left to right.
    pub fn leaves(&self) -> Vec<&Holon<S>> {
        self.nodes().into_iter().filter(|n| n.is_leaf()).collect()
    }

    pub fn part(&self, id: HolonId) -> Option<&Holon<S>> {
        self.parts.iter().find(|p| p.id == id)
    }
}

/// Number of levels: 1 for a leaf, otherwise one more than the deepest part.
pub fn depth<S>(h: &Holon<S>) -> usize {
    1 + h.parts.iter().map(depth).max().unwrap_or(0)
}

/// Euclidean distance between root trait vectors, `+inf` when the vectors
/// have different lengths or tags.
pub fn trait_distance<S: Scalar>(a: &Holon<S>, b: &Holon<S>) -> S {
    if !a.traits.aligned(&b.traits) {
        return S::infinity();
    }
    a.traits
        .values
        .iter()
        .zip(&b.traits.values)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(S::zero(), |acc, v| acc + v)
        .sqrt()
}

/// Equal shape: same trait lengths and part counts at every node. Tags are
/// only compared at the root, where [`trait_distance`] requires them.
pub fn same_structure<S: Scalar>(a: &Holon<S>, b: &Holon<S>) -> bool {
    a.traits.aligned(&b.traits) && same_shape(a, b)
}

fn same_shape<S>(a: &Holon<S>, b: &Holon<S>) -> bool {
    a.traits.values.len() == b.traits.values.len()
        && a.traits.tags.len() == b.traits.tags.len()
        && a.parts.len() == b.parts.len()
        && a.parts.iter().zip(&b.parts).all(|(x, y)| same_shape(x, y))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The id also appears on the node's own ancestor path.
    Cycle(HolonId),
    DuplicateId(HolonId),
    OutOfRange {
        node: HolonId,
        field: &'static str,
        value: f64,
    },
    NonFiniteTrait {
        node: HolonId,
        index: usize,
    },
    EmptyTraits(HolonId),
}

/// Reports every structural or range violation; an empty list means valid.
pub fn validate<S: Scalar>(h: &Holon<S>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut ancestors = Vec::new();
    validate_node(h, &mut ancestors, &mut seen, &mut out);
    out
}

fn validate_node<S: Scalar>(
    node: &Holon<S>,
    ancestors: &mut Vec<HolonId>,
    seen: &mut HashSet<HolonId>,
    out: &mut Vec<Violation>,
) {
    if ancestors.contains(&node.id) {
        out.push(Violation::Cycle(node.id));
        // the repeated subtree would only echo the same ids again
        return;
    }
    if !seen.insert(node.id) {
        out.push(Violation::DuplicateId(node.id));
    }
    if node.traits.values.is_empty() {
        out.push(Violation::EmptyTraits(node.id));
    }
    for (index, v) in node.traits.values.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation::NonFiniteTrait {
                node: node.id,
                index,
            });
        }
    }
    check_mechanisms(node.id, &node.mechanisms, out);

    ancestors.push(node.id);
    for part in &node.parts {
        validate_node(part, ancestors, seen, out);
    }
    ancestors.pop();
}

fn check_mechanisms<S: Scalar>(node: HolonId, m: &Mechanisms<S>, out: &mut Vec<Violation>) {
    let mut unit = |field: &'static str, value: S| {
        let v = value.as_f64();
        if !(0.0..=1.0).contains(&v) {
            out.push(Violation::OutOfRange {
                node,
                field,
                value: v,
            });
        }
    };
    unit("fission_rate", m.fission_rate);
    unit("fusion_affinity", m.fusion_affinity);
    unit("enforcement_strength", m.enforcement_strength);
    for kind in VariationKind::ALL {
        unit(rate_field(kind), m.mutation_rates.get(kind));
    }
    if m.n_parents < 2 {
        out.push(Violation::OutOfRange {
            node,
            field: "n_parents",
            value: f64::from(m.n_parents),
        });
    }
}

fn rate_field(kind: VariationKind) -> &'static str {
    match kind {
        VariationKind::TraitChange => "mutation_rates.5A",
        VariationKind::PartDeletion => "mutation_rates.5B",
        VariationKind::PartDuplication => "mutation_rates.5C",
        VariationKind::ReproMechanism => "mutation_rates.5D",
        VariationKind::FissionFusionMechanism => "mutation_rates.5E",
        VariationKind::EnforcementMechanism => "mutation_rates.5F",
    }
}

/// Copies the hierarchy with a fresh id at every node. Each copied node lists
/// the node it was copied from as its sole parent.
pub fn deep_copy<S: Scalar>(h: &Holon<S>, ids: &mut IdSource) -> Result<Holon<S>, IdsExhausted> {
    let id = ids.fresh()?;
    let parts = h
        .parts
        .iter()
        .map(|p| deep_copy(p, ids))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Holon {
        id,
        traits: h.traits.clone(),
        mechanisms: h.mechanisms.clone(),
        parts,
        parent_ids: vec![h.id],
        origin: h.origin,
    })
}

/// One row of the lineage table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub child_id: HolonId,
    pub parent_ids: Vec<HolonId>,
    pub generation: u64,
    pub origin: Origin,
}

impl LineageRecord {
    pub fn is_valid(&self) -> bool {
        self.origin == Origin::Seed || !self.parent_ids.is_empty()
    }
}
