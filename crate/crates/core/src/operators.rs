//! Reproduction, fission, fusion, heritable variation, selection and
//! cooperation enforcement as pure functions of their inputs and an RNG.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::holon::{
    deep_copy, depth, same_structure, trait_distance, Holon, HolonId, IdSource, IdsExhausted,
    Mechanisms, MutationRates, Origin, TraitVector, VariationKind,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("parents {0} and {1} are not similar")]
    DissimilarParents(HolonId, HolonId),
    #[error("multiparent reproduction needs at least 2 parents, got {0}")]
    TooFewParents(usize),
    #[error("blend weights must be nonnegative, one per parent, and sum to 1")]
    InvalidBlendWeights,
    #[error("cannot fission leaf {0}")]
    LeafFission(HolonId),
    #[error("fusion needs at least 2 inputs, got {0}")]
    TooFewInputs(usize),
    #[error("fusion input {0} appears more than once")]
    DuplicateInput(HolonId),
    #[error("all fitnesses are zero")]
    AllZeroFitness,
    #[error("fitness at index {0} is negative or not finite")]
    InvalidFitness(usize),
    #[error("selection needs k >= 1 draws and a tournament size >= 1")]
    InvalidSelection,
    #[error("{part} is not a direct part of {whole}")]
    NotAPart { part: HolonId, whole: HolonId },
    #[error(transparent)]
    Ids(#[from] IdsExhausted),
}

pub type OpResult<T> = Result<T, OperatorError>;

/// Step sizes and switches for [`mutate`]. The per-kind probabilities come
/// from each node's own [`Mechanisms::mutation_rates`]; a disabled kind never
/// fires regardless of its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationParams<S> {
    pub sigma_trait: S,
    pub sigma_mech: S,
    pub enabled: [bool; 6],
    pub max_parts: usize,
}

impl<S: Scalar> Default for VariationParams<S> {
    fn default() -> Self {
        VariationParams {
            sigma_trait: S::lit(0.1),
            sigma_mech: S::lit(0.05),
            enabled: [true; 6],
            max_parts: 64,
        }
    }
}

impl<S: Scalar> VariationParams<S> {
    pub fn is_enabled(&self, kind: VariationKind) -> bool {
        self.enabled[kind.index()]
    }
}

/// One applied variation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variation {
    pub kind: VariationKind,
    pub node: HolonId,
    /// Deleted part for 5B, the new duplicate for 5C.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<HolonId>,
}

/// Resource guard that prevented a structural change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cap {
    Depth,
    Parts,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MutationOutcome {
    pub variations: Vec<Variation>,
    /// Nodes where a 5C duplication was skipped at the parts cap.
    pub parts_cap_hits: Vec<HolonId>,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * sigma
}

/// Applies heritable variation to every node of a private holon.
///
/// Nodes are visited in pre-order. At each node every enabled kind fires
/// independently with the node's rate, in the order 5A..5F, before its parts
/// (including any fresh duplicate) are visited.
pub fn mutate<S: Scalar, R: Rng + ?Sized>(
    h: &mut Holon<S>,
    params: &VariationParams<S>,
    ids: &mut IdSource,
    rng: &mut R,
) -> OpResult<MutationOutcome> {
    let mut out = MutationOutcome::default();
    mutate_node(h, params, ids, rng, &mut out)?;
    Ok(out)
}

fn mutate_node<S: Scalar, R: Rng + ?Sized>(
    node: &mut Holon<S>,
    params: &VariationParams<S>,
    ids: &mut IdSource,
    rng: &mut R,
    out: &mut MutationOutcome,
) -> OpResult<()> {
    let rates = node.mechanisms.mutation_rates;
    for kind in VariationKind::ALL {
        if !params.is_enabled(kind) {
            continue;
        }
        let p = rates.get(kind).as_f64();
        if !rng.random_bool(p.clamp(0.0, 1.0)) {
            continue;
        }
        if let Some(v) = apply_variation(node, kind, params, ids, rng, out)? {
            out.variations.push(v);
        }
    }
    for part in node.parts.iter_mut() {
        mutate_node(part, params, ids, rng, out)?;
    }
    Ok(())
}

fn apply_variation<S: Scalar, R: Rng + ?Sized>(
    node: &mut Holon<S>,
    kind: VariationKind,
    params: &VariationParams<S>,
    ids: &mut IdSource,
    rng: &mut R,
    out: &mut MutationOutcome,
) -> OpResult<Option<Variation>> {
    let id = node.id;
    let applied = |part| {
        Some(Variation {
            kind,
            node: id,
            part,
        })
    };
    match kind {
        VariationKind::TraitChange => {
            if node.traits.values.is_empty() {
                return Ok(None);
            }
            let i = rng.random_range(0..node.traits.values.len());
            let step = S::lit(gaussian(rng, params.sigma_trait.as_f64()));
            node.traits.values[i] = node.traits.values[i] + step;
            Ok(applied(None))
        }
        VariationKind::PartDeletion => {
            // depth only changes through fission: never remove the last part
            // or the only deepest one
            if node.parts.len() < 2 {
                return Ok(None);
            }
            let i = rng.random_range(0..node.parts.len());
            let d = depth(&node.parts[i]);
            if node
                .parts
                .iter()
                .all(|p| p.id == node.parts[i].id || depth(p) < d)
            {
                return Ok(None);
            }
            let removed = node.parts.remove(i);
            Ok(applied(Some(removed.id)))
        }
        VariationKind::PartDuplication => {
            if node.parts.is_empty() {
                return Ok(None);
            }
            if node.parts.len() >= params.max_parts {
                out.parts_cap_hits.push(id);
                return Ok(None);
            }
            let i = rng.random_range(0..node.parts.len());
            let copy = deep_copy(&node.parts[i], ids)?;
            let new_id = copy.id;
            node.parts.insert(i + 1, copy);
            Ok(applied(Some(new_id)))
        }
        VariationKind::ReproMechanism => {
            let m = &mut node.mechanisms;
            if rng.random_bool(0.5) {
                m.repro_mode = m.repro_mode.flipped();
            } else if rng.random_bool(0.5) {
                m.n_parents += 1;
            } else {
                m.n_parents = m.n_parents.saturating_sub(1).max(2);
            }
            Ok(applied(None))
        }
        VariationKind::FissionFusionMechanism => {
            let sigma = params.sigma_mech.as_f64();
            let m = &mut node.mechanisms;
            let target = if rng.random_bool(0.5) {
                &mut m.fission_rate
            } else {
                &mut m.fusion_affinity
            };
            *target = (*target + S::lit(gaussian(rng, sigma))).unit_clamp();
            Ok(applied(None))
        }
        VariationKind::EnforcementMechanism => {
            let sigma = params.sigma_mech.as_f64();
            let m = &mut node.mechanisms;
            m.enforcement_strength =
                (m.enforcement_strength + S::lit(gaussian(rng, sigma))).unit_clamp();
            Ok(applied(None))
        }
    }
}

/// Single-parent reproduction: a fresh-id copy of the parent, then one
/// mutation pass. Depth is preserved: 5B never removes a node's last or only
/// deepest part.
pub fn reproduce_asexual<S: Scalar, R: Rng + ?Sized>(
    parent: &Holon<S>,
    params: &VariationParams<S>,
    ids: &mut IdSource,
    rng: &mut R,
) -> OpResult<(Holon<S>, MutationOutcome)> {
    let mut child = deep_copy(parent, ids)?;
    child.origin = Origin::Asexual;
    child.parent_ids = vec![parent.id];
    let outcome = mutate(&mut child, params, ids, rng)?;
    Ok((child, outcome))
}

/// How a multiparent child weighs its parents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendWeights<S> {
    /// Equal weight per parent.
    #[default]
    Uniform,
    /// Caller-supplied convex weights, one per parent.
    Fixed(Vec<S>),
    /// One flat-Dirichlet draw per child.
    RandomConvex,
    /// Every trait coordinate copied from an independently drawn parent
    /// (one-hot weights per coordinate, i.e. free recombination).
    PerCoordinate,
}

enum Resolved {
    Weights(Vec<f64>),
    PerCoordinate,
}

fn resolve_weights<S: Scalar, R: Rng + ?Sized>(
    blend: &BlendWeights<S>,
    n: usize,
    rng: &mut R,
) -> OpResult<Resolved> {
    Ok(match blend {
        BlendWeights::Uniform => Resolved::Weights(vec![1.0 / n as f64; n]),
        BlendWeights::Fixed(w) => {
            let w: Vec<f64> = w.iter().map(|x| x.as_f64()).collect();
            let sum: f64 = w.iter().sum();
            if w.len() != n || w.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
                return Err(OperatorError::InvalidBlendWeights);
            }
            Resolved::Weights(w)
        }
        BlendWeights::RandomConvex => {
            let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
            let sum: f64 = raw.iter().sum();
            Resolved::Weights(raw.into_iter().map(|x| x / sum).collect())
        }
        BlendWeights::PerCoordinate => Resolved::PerCoordinate,
    })
}

/// Whether every pair of parents shares structure and lies within `theta`.
pub fn check_similar<S: Scalar>(parents: &[&Holon<S>], theta: S) -> OpResult<()> {
    for (i, a) in parents.iter().enumerate() {
        for b in &parents[i + 1..] {
            if !same_structure(a, b) || !(trait_distance(a, b) <= theta) {
                return Err(OperatorError::DissimilarParents(a.id, b.id));
            }
        }
    }
    Ok(())
}

/// Multiparent reproduction. Every node of the child blends the traits and
/// probability mechanisms of the corresponding parent nodes; tags, the
/// reproduction mode and the parent count come from a uniformly drawn
/// parent. Blended values are kept inside the parents' per-coordinate hull.
pub fn reproduce_multiparent<S: Scalar, R: Rng + ?Sized>(
    parents: &[&Holon<S>],
    blend: &BlendWeights<S>,
    theta: S,
    params: &VariationParams<S>,
    ids: &mut IdSource,
    rng: &mut R,
) -> OpResult<(Holon<S>, MutationOutcome)> {
    if parents.len() < 2 {
        return Err(OperatorError::TooFewParents(parents.len()));
    }
    check_similar(parents, theta)?;
    let weights = resolve_weights(blend, parents.len(), rng)?;
    let mut child = blend_node(parents, &weights, ids, rng)?;
    child.origin = Origin::Multiparent;
    let outcome = mutate(&mut child, params, ids, rng)?;
    Ok((child, outcome))
}

fn blend_scalar<S: Scalar, R: Rng + ?Sized>(
    xs: impl Iterator<Item = S> + Clone,
    weights: &Resolved,
    rng: &mut R,
) -> S {
    match weights {
        Resolved::Weights(w) => {
            let (lo, hi) = xs
                .clone()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x.as_f64()), hi.max(x.as_f64()))
                });
            let v: f64 = xs.zip(w).map(|(x, w)| x.as_f64() * w).sum();
            S::lit(v.clamp(lo, hi))
        }
        Resolved::PerCoordinate => {
            let n = xs.clone().count();
            xs.clone()
                .nth(rng.random_range(0..n))
                .expect("index in range")
        }
    }
}

fn blend_node<S: Scalar, R: Rng + ?Sized>(
    nodes: &[&Holon<S>],
    weights: &Resolved,
    ids: &mut IdSource,
    rng: &mut R,
) -> OpResult<Holon<S>> {
    let id = ids.fresh()?;
    let first = nodes[0];
    let n = nodes.len();

    let values = (0..first.traits.values.len())
        .map(|i| blend_scalar(nodes.iter().map(|h| h.traits.values[i]), weights, rng))
        .collect();
    let tags = (0..first.traits.tags.len())
        .map(|i| nodes[rng.random_range(0..n)].traits.tags[i])
        .collect();

    let donor = nodes[rng.random_range(0..n)];
    let mut mechanisms = Mechanisms {
        repro_mode: donor.mechanisms.repro_mode,
        n_parents: donor.mechanisms.n_parents,
        fission_rate: blend_scalar(
            nodes.iter().map(|h| h.mechanisms.fission_rate),
            weights,
            rng,
        ),
        fusion_affinity: blend_scalar(
            nodes.iter().map(|h| h.mechanisms.fusion_affinity),
            weights,
            rng,
        ),
        enforcement_strength: blend_scalar(
            nodes.iter().map(|h| h.mechanisms.enforcement_strength),
            weights,
            rng,
        ),
        mutation_rates: MutationRates::zero(),
    };
    for kind in VariationKind::ALL {
        let r = blend_scalar(
            nodes.iter().map(|h| h.mechanisms.mutation_rates.get(kind)),
            weights,
            rng,
        );
        mechanisms.mutation_rates.set(kind, r);
    }

    let parts = (0..first.parts.len())
        .map(|i| {
            let corresponding: Vec<&Holon<S>> = nodes.iter().map(|h| &h.parts[i]).collect();
            blend_node(&corresponding, weights, ids, rng)
        })
        .collect::<OpResult<Vec<_>>>()?;

    Ok(Holon {
        id,
        traits: TraitVector::tagged(values, tags),
        mechanisms,
        parts,
        parent_ids: nodes.iter().map(|h| h.id).collect(),
        origin: first.origin,
    })
}

/// Splits a holon into its parts, which become independent roots. The parts
/// keep their ids; the input holon ceases to exist.
pub fn fission<S: Scalar>(h: &Holon<S>) -> OpResult<Vec<Holon<S>>> {
    if h.parts.is_empty() {
        return Err(OperatorError::LeafFission(h.id));
    }
    Ok(h.parts
        .iter()
        .map(|p| {
            let mut fragment = p.clone();
            fragment.origin = Origin::Fission;
            fragment.parent_ids = vec![h.id];
            fragment
        })
        .collect())
}

/// Combines holons into a new composite whose parts are exactly the inputs.
///
/// Root traits are `root_traits` when given, else the per-coordinate mean of
/// the inputs' root traits when those align, else a copy of the lowest-id
/// input's traits. Probability mechanisms are averaged; enum-valued ones take
/// the majority, ties going to the lowest-id input.
pub fn fuse<S: Scalar>(
    inputs: Vec<Holon<S>>,
    root_traits: Option<TraitVector<S>>,
    ids: &mut IdSource,
) -> OpResult<Holon<S>> {
    if inputs.len() < 2 {
        return Err(OperatorError::TooFewInputs(inputs.len()));
    }
    for (i, a) in inputs.iter().enumerate() {
        if inputs[i + 1..].iter().any(|b| b.id == a.id) {
            return Err(OperatorError::DuplicateInput(a.id));
        }
    }
    let mut by_id: Vec<&Holon<S>> = inputs.iter().collect();
    by_id.sort_by_key(|h| h.id);

    let n = S::lit(inputs.len() as f64);
    let mean = |f: &dyn Fn(&Mechanisms<S>) -> S| {
        inputs
            .iter()
            .map(|h| f(&h.mechanisms))
            .fold(S::zero(), |a, b| a + b)
            / n
    };

    let traits = root_traits.unwrap_or_else(|| {
        let first = &by_id[0].traits;
        if inputs.iter().all(|h| h.traits.aligned(first)) {
            let values = (0..first.values.len())
                .map(|i| {
                    inputs
                        .iter()
                        .map(|h| h.traits.values[i])
                        .fold(S::zero(), |a, b| a + b)
                        / n
                })
                .collect();
            TraitVector::tagged(values, first.tags.clone())
        } else {
            first.clone()
        }
    });

    let repro_mode = majority(by_id.iter().map(|h| h.mechanisms.repro_mode));
    let n_parents = majority(by_id.iter().map(|h| h.mechanisms.n_parents));
    let mut mutation_rates = MutationRates::zero();
    for kind in VariationKind::ALL {
        mutation_rates.set(kind, mean(&|m| m.mutation_rates.get(kind)));
    }
    let mechanisms = Mechanisms {
        repro_mode,
        n_parents,
        fission_rate: mean(&|m| m.fission_rate),
        fusion_affinity: mean(&|m| m.fusion_affinity),
        enforcement_strength: mean(&|m| m.enforcement_strength),
        mutation_rates,
    };
    let parent_ids = by_id.iter().map(|h| h.id).collect();
    Ok(Holon {
        id: ids.fresh()?,
        traits,
        mechanisms,
        parts: inputs,
        parent_ids,
        origin: Origin::Fusion,
    })
}

/// Most frequent value; ties go to the value seen first.
fn majority<T: PartialEq + Copy>(values: impl Iterator<Item = T>) -> T {
    let values: Vec<T> = values.collect();
    let mut best = values[0];
    let mut best_count = 0;
    for &v in &values {
        let count = values.iter().filter(|&&x| x == v).count();
        if count > best_count {
            best = v;
            best_count = count;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScheme {
    #[default]
    FitnessProportional,
    Tournament(usize),
}

/// Draws `k` parent indices with repetition.
pub fn select<S: Scalar, R: Rng + ?Sized>(
    fitnesses: &[S],
    k: usize,
    scheme: SelectionScheme,
    rng: &mut R,
) -> OpResult<Vec<usize>> {
    if k == 0 || matches!(scheme, SelectionScheme::Tournament(0)) {
        return Err(OperatorError::InvalidSelection);
    }
    let f: Vec<f64> = fitnesses.iter().map(|x| x.as_f64()).collect();
    if let Some(i) = f.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(OperatorError::InvalidFitness(i));
    }
    if !f.iter().any(|&x| x > 0.0) {
        return Err(OperatorError::AllZeroFitness);
    }
    Ok(match scheme {
        SelectionScheme::FitnessProportional => {
            let mut cumulative = Vec::with_capacity(f.len());
            let mut total = 0.0;
            for &x in &f {
                total += x;
                cumulative.push(total);
            }
            (0..k)
                .map(|_| {
                    let u = rng.random::<f64>() * total;
                    let i = cumulative.partition_point(|&c| c <= u);
                    // zero-width slots can only be hit through rounding at the top end
                    let i = i.min(f.len() - 1);
                    if f[i] > 0.0 {
                        i
                    } else {
                        f.iter()
                            .rposition(|&x| x > 0.0)
                            .expect("a positive fitness exists")
                    }
                })
                .collect()
        }
        SelectionScheme::Tournament(size) => (0..k)
            .map(|_| {
                let candidates: Vec<usize> =
                    (0..size).map(|_| rng.random_range(0..f.len())).collect();
                let best = candidates.iter().map(|&i| f[i]).fold(f64::MIN, f64::max);
                let tied: Vec<usize> = candidates.into_iter().filter(|&i| f[i] == best).collect();
                tied[rng.random_range(0..tied.len())]
            })
            .collect(),
    })
}

/// Within-holon replication weight of a direct part: its defection
/// propensity (trait `defection_index`, clamped to [0,1]) times one minus the
/// whole's enforcement strength.
pub fn effective_contribution<S: Scalar>(
    part: &Holon<S>,
    whole: &Holon<S>,
    defection_index: usize,
) -> OpResult<S> {
    if whole.part(part.id).is_none() {
        return Err(OperatorError::NotAPart {
            part: part.id,
            whole: whole.id,
        });
    }
    Ok(defection_weight(part, whole, defection_index))
}

/// [`effective_contribution`] without the membership check.
pub(crate) fn defection_weight<S: Scalar>(
    part: &Holon<S>,
    whole: &Holon<S>,
    defection_index: usize,
) -> S {
    let d = part.traits.get(defection_index).unit_clamp();
    let e = whole.mechanisms.enforcement_strength.unit_clamp();
    d * (S::one() - e)
}

/// Uniform sample of `count` distinct indices from `0..n`, in draw order.
pub(crate) fn sample_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, count: usize) -> Vec<usize> {
    index::sample(rng, n, count).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holon::tests::{leaf, node};
    use crate::holon::ReproMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn params() -> VariationParams<f64> {
        VariationParams::default()
    }

    fn set_rates(h: &mut Holon<f64>, rates: MutationRates<f64>) {
        h.mechanisms.mutation_rates = rates;
        for p in h.parts.iter_mut() {
            set_rates(p, rates);
        }
    }

    #[test]
    fn asexual_zero_rates_is_identity() {
        let mut ids = IdSource::new();
        let p = leaf(&mut ids, &[0.7]);
        let (c, out) = reproduce_asexual(&p, &params(), &mut ids, &mut rng(1)).unwrap();
        assert_eq!(c.traits.values, vec![0.7]);
        assert_eq!(c.origin, Origin::Asexual);
        assert_eq!(c.parent_ids, vec![p.id]);
        assert!(out.variations.is_empty());

        let parts = (0..3).map(|_| leaf(&mut ids, &[0.1])).collect();
        let p = node(&mut ids, &[0.0], parts);
        let (c, _) = reproduce_asexual(&p, &params(), &mut ids, &mut rng(2)).unwrap();
        assert_eq!(depth(&c), 2);
        assert_eq!(c.parts.len(), 3);
    }

    #[test]
    fn asexual_trait_mean_within_three_standard_errors() {
        // oracle: sample mean of N(0.7, 0.1) draws has standard error 0.1/sqrt(n)
        let mut ids = IdSource::new();
        let mut p = leaf(&mut ids, &[0.7]);
        p.mechanisms.mutation_rates = MutationRates::zero().with(VariationKind::TraitChange, 1.0);
        let mut r = rng(3);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| {
                reproduce_asexual(&p, &params(), &mut ids, &mut r)
                    .unwrap()
                    .0
                    .traits
                    .values[0]
            })
            .sum::<f64>()
            / n as f64;
        let se = 0.1 / (n as f64).sqrt();
        assert!((mean - 0.7).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn multiparent_midpoint_and_identity() {
        let mut ids = IdSource::new();
        let a = leaf(&mut ids, &[0.0]);
        let b = leaf(&mut ids, &[1.0]);
        let (c, _) = reproduce_multiparent(
            &[&a, &b],
            &BlendWeights::Uniform,
            1.0,
            &params(),
            &mut ids,
            &mut rng(4),
        )
        .unwrap();
        assert_eq!(c.traits.values, vec![0.5]);
        assert_eq!(c.origin, Origin::Multiparent);
        assert_eq!(c.parent_ids, vec![a.id, b.id]);

        let parts = vec![leaf(&mut ids, &[0.2]), leaf(&mut ids, &[0.4])];
        let x = node(&mut ids, &[0.3, 0.6], parts);
        let y = deep_copy(&x, &mut ids).unwrap();
        let (c, _) = reproduce_multiparent(
            &[&x, &y],
            &BlendWeights::Uniform,
            0.0,
            &params(),
            &mut ids,
            &mut rng(5),
        )
        .unwrap();
        assert!(same_structure(&c, &x));
        assert_eq!(c.traits, x.traits);
        assert_eq!(c.parts[1].traits, x.parts[1].traits);
        assert!(c.nodes().iter().all(|n| n.id > y.id));
    }

    #[test]
    fn multiparent_random_convex_stays_in_hull() {
        let mut ids = IdSource::new();
        let ps = [
            leaf(&mut ids, &[0.0]),
            leaf(&mut ids, &[0.3]),
            leaf(&mut ids, &[0.9]),
        ];
        let refs: Vec<&Holon<f64>> = ps.iter().collect();
        let mut r = rng(6);
        for _ in 0..10_000 {
            let (c, _) = reproduce_multiparent(
                &refs,
                &BlendWeights::RandomConvex,
                1.0,
                &params(),
                &mut ids,
                &mut r,
            )
            .unwrap();
            let v = c.traits.values[0];
            assert!((0.0..=0.9).contains(&v), "{v}");
        }
    }

    #[test]
    fn multiparent_rejects_dissimilar_and_bad_weights() {
        let mut ids = IdSource::new();
        let a = leaf(&mut ids, &[0.0]);
        let b = leaf(&mut ids, &[1.0]);
        let err = reproduce_multiparent(
            &[&a, &b],
            &BlendWeights::Uniform,
            0.5,
            &params(),
            &mut ids,
            &mut rng(7),
        )
        .unwrap_err();
        assert_eq!(err, OperatorError::DissimilarParents(a.id, b.id));

        let err = reproduce_multiparent(
            &[&a, &b],
            &BlendWeights::Fixed(vec![0.7, 0.7]),
            2.0,
            &params(),
            &mut ids,
            &mut rng(7),
        )
        .unwrap_err();
        assert_eq!(err, OperatorError::InvalidBlendWeights);

        let err = reproduce_multiparent(
            &[&a],
            &BlendWeights::Uniform,
            2.0,
            &params(),
            &mut ids,
            &mut rng(7),
        )
        .unwrap_err();
        assert_eq!(err, OperatorError::TooFewParents(1));
    }

    #[test]
    fn per_coordinate_blend_recombines() {
        let mut ids = IdSource::new();
        let a = leaf(&mut ids, &[1.0, 0.0]);
        let b = leaf(&mut ids, &[0.0, 1.0]);
        let mut r = rng(8);
        let mut saw_both = false;
        for _ in 0..200 {
            let (c, _) = reproduce_multiparent(
                &[&a, &b],
                &BlendWeights::PerCoordinate,
                2.0,
                &params(),
                &mut ids,
                &mut r,
            )
            .unwrap();
            assert!(c.traits.values.iter().all(|&v| v == 0.0 || v == 1.0));
            saw_both |= c.traits.values == vec![1.0, 1.0];
        }
        assert!(saw_both);
    }

    #[test]
    fn fission_cases() {
        let mut ids = IdSource::new();
        let parts: Vec<_> = (0..3).map(|i| leaf(&mut ids, &[i as f64])).collect();
        let part_ids: Vec<_> = parts.iter().map(|p| p.id).collect();
        let h = node(&mut ids, &[0.0], parts);
        let frags = fission(&h).unwrap();
        assert_eq!(frags.iter().map(|f| f.id).collect::<Vec<_>>(), part_ids);
        assert!(frags
            .iter()
            .all(|f| depth(f) == 1 && f.origin == Origin::Fission && f.parent_ids == vec![h.id]));

        let l = leaf(&mut ids, &[0.0]);
        let inner = {
            let l = leaf(&mut ids, &[0.0]);
            node(&mut ids, &[0.0], vec![l])
        };
        let h = node(&mut ids, &[0.0], vec![l, inner]);
        assert_eq!(depth(&h), 3);
        let depths: Vec<_> = fission(&h).unwrap().iter().map(depth).collect();
        assert_eq!(depths, vec![1, 2]);

        let l = leaf(&mut ids, &[0.0]);
        assert_eq!(fission(&l), Err(OperatorError::LeafFission(l.id)));
    }

    #[test]
    fn fuse_cases() {
        let mut ids = IdSource::new();
        let a = leaf(&mut ids, &[0.0]);
        let b = leaf(&mut ids, &[1.0]);
        let f = fuse(vec![a.clone(), b.clone()], None, &mut ids).unwrap();
        assert_eq!(depth(&f), 2);
        assert_eq!(f.parts.len(), 2);
        assert_eq!(f.traits.values, vec![0.5]);
        assert_eq!(f.origin, Origin::Fusion);

        let inner = {
            let l = leaf(&mut ids, &[0.0]);
            node(&mut ids, &[0.0], vec![l])
        };
        let f = fuse(vec![leaf(&mut ids, &[0.0]), inner], None, &mut ids).unwrap();
        assert_eq!(depth(&f), 3);

        let mut x = leaf(&mut ids, &[0.0]);
        let mut y = leaf(&mut ids, &[0.0]);
        x.mechanisms.enforcement_strength = 0.2;
        y.mechanisms.enforcement_strength = 0.6;
        x.mechanisms.repro_mode = ReproMode::Multiparent;
        let f = fuse(vec![y, x], None, &mut ids).unwrap();
        assert!((f.mechanisms.enforcement_strength - 0.4).abs() < 1e-12);
        // one vote each: the lower id wins
        assert_eq!(f.mechanisms.repro_mode, ReproMode::Multiparent);

        assert_eq!(
            fuse(vec![a.clone()], None, &mut ids),
            Err(OperatorError::TooFewInputs(1))
        );
        assert_eq!(
            fuse(vec![a.clone(), a.clone()], None, &mut ids),
            Err(OperatorError::DuplicateInput(a.id))
        );
    }

    #[test]
    fn fuse_misaligned_roots_use_override_or_first() {
        let mut ids = IdSource::new();
        let a = leaf(&mut ids, &[0.0]);
        let b = leaf(&mut ids, &[1.0, 2.0]);
        let f = fuse(vec![b.clone(), a.clone()], None, &mut ids).unwrap();
        assert_eq!(f.traits, a.traits);
        let f = fuse(vec![a, b], Some(TraitVector::new(vec![7.0])), &mut ids).unwrap();
        assert_eq!(f.traits.values, vec![7.0]);
    }

    #[test]
    fn mutate_zero_rates_is_noop() {
        let mut ids = IdSource::new();
        let parts = vec![leaf(&mut ids, &[0.1]), leaf(&mut ids, &[0.2])];
        let mut h = node(&mut ids, &[0.5], parts);
        let before = h.clone();
        let out = mutate(&mut h, &params(), &mut ids, &mut rng(9)).unwrap();
        assert_eq!(h, before);
        assert!(out.variations.is_empty());
    }

    #[test]
    fn duplication_adds_fresh_subtree() {
        let mut ids = IdSource::new();
        let parts = vec![leaf(&mut ids, &[0.1]), leaf(&mut ids, &[0.2])];
        let mut h = node(&mut ids, &[0.5], parts);
        h.mechanisms.mutation_rates =
            MutationRates::zero().with(VariationKind::PartDuplication, 1.0);
        let before: Vec<_> = h.nodes().iter().map(|n| n.id).collect();
        let out = mutate(&mut h, &params(), &mut ids, &mut rng(10)).unwrap();
        assert_eq!(h.parts.len(), 3);
        assert_eq!(out.variations.len(), 1);
        let dup = out.variations[0].part.unwrap();
        assert!(!before.contains(&dup));
        assert!(crate::holon::validate(&h).is_empty());
    }

    #[test]
    fn deletion_stops_at_one_part() {
        // exhaustive over starting part counts 2..=6 and many seeds
        for k in 2..=6usize {
            for seed in 0..20 {
                let mut ids = IdSource::new();
                let parts = (0..k).map(|i| leaf(&mut ids, &[i as f64])).collect();
                let mut h = node(&mut ids, &[0.0], parts);
                h.mechanisms.mutation_rates =
                    MutationRates::zero().with(VariationKind::PartDeletion, 1.0);
                let mut r = rng(seed);
                for step in 1..=k + 2 {
                    let before = h.parts.len();
                    let out = mutate(&mut h, &params(), &mut ids, &mut r).unwrap();
                    let expected = if before >= 2 { before - 1 } else { before };
                    assert_eq!(h.parts.len(), expected, "k={k} step={step}");
                    assert_eq!(out.variations.len(), before - expected);
                }
                assert_eq!(h.parts.len(), 1);
            }
        }
    }

    #[test]
    fn mechanism_kinds_stay_in_range() {
        let mut ids = IdSource::new();
        let mut h = leaf(&mut ids, &[0.0]);
        set_rates(
            &mut h,
            MutationRates::zero()
                .with(VariationKind::ReproMechanism, 1.0)
                .with(VariationKind::FissionFusionMechanism, 1.0)
                .with(VariationKind::EnforcementMechanism, 1.0),
        );
        let p = VariationParams {
            sigma_mech: 0.8,
            ..params()
        };
        let mut r = rng(11);
        let mut kinds = std::collections::HashSet::new();
        for _ in 0..500 {
            let out = mutate(&mut h, &p, &mut ids, &mut r).unwrap();
            kinds.extend(out.variations.iter().map(|v| v.kind));
            assert!(crate::holon::validate(&h).is_empty());
        }
        assert_eq!(kinds.len(), 3);
    }

    #[test]
    fn disabled_kind_never_fires() {
        let mut ids = IdSource::new();
        let mut h = leaf(&mut ids, &[0.0]);
        h.mechanisms.mutation_rates = MutationRates::uniform(1.0);
        let mut p = params();
        p.enabled = [false; 6];
        let out = mutate(&mut h, &p, &mut ids, &mut rng(12)).unwrap();
        assert!(out.variations.is_empty());
    }

    #[test]
    fn duplication_respects_parts_cap() {
        let mut ids = IdSource::new();
        let parts = vec![leaf(&mut ids, &[0.1]), leaf(&mut ids, &[0.2])];
        let mut h = node(&mut ids, &[0.5], parts);
        h.mechanisms.mutation_rates =
            MutationRates::zero().with(VariationKind::PartDuplication, 1.0);
        let p = VariationParams {
            max_parts: 2,
            ..params()
        };
        let out = mutate(&mut h, &p, &mut ids, &mut rng(13)).unwrap();
        assert!(out.variations.is_empty());
        assert_eq!(out.parts_cap_hits, vec![h.id]);
    }

    #[test]
    fn select_cases() {
        let mut r = rng(14);
        let picks = select(
            &[0.0, 2.0],
            1000,
            SelectionScheme::FitnessProportional,
            &mut r,
        )
        .unwrap();
        assert!(picks.iter().all(|&i| i == 1));
        // a tournament of 3 misses index 1 only when all candidates are 0
        let picks = select(&[0.0, 2.0], 10_000, SelectionScheme::Tournament(3), &mut r).unwrap();
        let ones = picks.iter().filter(|&&i| i == 1).count() as f64 / 1e4;
        assert!((ones - 0.875).abs() < 0.02, "{ones}");

        let picks = select(&[1.0; 4], 4, SelectionScheme::FitnessProportional, &mut r).unwrap();
        assert_eq!(picks.len(), 4);

        assert_eq!(
            select(&[0.0, 0.0], 1, SelectionScheme::FitnessProportional, &mut r),
            Err(OperatorError::AllZeroFitness)
        );
        assert_eq!(
            select(
                &[1.0, -1.0],
                1,
                SelectionScheme::FitnessProportional,
                &mut r
            ),
            Err(OperatorError::InvalidFitness(1))
        );
        assert_eq!(
            select(&[1.0], 0, SelectionScheme::FitnessProportional, &mut r),
            Err(OperatorError::InvalidSelection)
        );
        assert_eq!(
            select(&[1.0], 1, SelectionScheme::Tournament(0), &mut r),
            Err(OperatorError::InvalidSelection)
        );
    }

    #[test]
    fn select_three_to_one_frequency() {
        // exact probability 3/4; binomial sd at 1e5 draws is ~0.0014
        let picks = select(
            &[3.0, 1.0],
            100_000,
            SelectionScheme::FitnessProportional,
            &mut rng(15),
        )
        .unwrap();
        let freq = picks.iter().filter(|&&i| i == 0).count() as f64 / 1e5;
        assert!((freq - 0.75).abs() < 0.01, "{freq}");
    }

    #[test]
    fn select_symmetric_expected_counts() {
        let mut counts = [0usize; 4];
        let mut r = rng(16);
        let reps = 25_000;
        for _ in 0..reps {
            for i in select(&[1.0; 4], 4, SelectionScheme::FitnessProportional, &mut r).unwrap() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let mean = c as f64 / reps as f64;
            assert!((mean - 1.0).abs() < 0.03, "{mean}");
        }
    }

    #[test]
    fn effective_contribution_cases() {
        let mut ids = IdSource::new();
        let part = leaf(&mut ids, &[0.8]);
        let mut whole = node(&mut ids, &[0.0], vec![part.clone()]);
        whole.mechanisms.enforcement_strength = 1.0;
        assert_eq!(effective_contribution(&part, &whole, 0).unwrap(), 0.0);
        whole.mechanisms.enforcement_strength = 0.0;
        assert_eq!(effective_contribution(&part, &whole, 0).unwrap(), 0.8);

        let half = leaf(&mut ids, &[0.5]);
        let mut w = node(&mut ids, &[0.0], vec![half.clone()]);
        w.mechanisms.enforcement_strength = 0.5;
        assert_eq!(effective_contribution(&half, &w, 0).unwrap(), 0.25);

        let stranger = leaf(&mut ids, &[0.5]);
        assert_eq!(
            effective_contribution(&stranger, &w, 0),
            Err(OperatorError::NotAPart {
                part: stranger.id,
                whole: w.id
            })
        );
    }

    #[test]
    fn majority_ties_go_first() {
        assert_eq!(majority([1, 2].into_iter()), 1);
        assert_eq!(majority([1, 2, 2].into_iter()), 2);
    }
}
