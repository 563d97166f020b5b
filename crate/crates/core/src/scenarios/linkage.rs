//! Linked genes against free genes in small protocells.
//!
//! Leaves are genes tagged A (0) or B (1). A free gene lives in a protocell
//! of `n_proto` molecules drawn from the pool of free genes; when the
//! protocell divides, the gene's daughter keeps `n_proto / 2` of them. The
//! daughter is viable only if it holds both gene types, so a free gene's
//! fitness is that assembly probability. Drawing the protocell and then the
//! daughter without replacement is the same as drawing the daughter's other
//! members straight from the pool, which gives the hypergeometric closed form
//! in [`assembly_probability`].
//!
//! A fused pair holding both types among its direct parts always assembles
//! but replicates slower: its fitness is `1 - tau`.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{untagged_mean, Environment, Scenario};
use crate::engine::EngineConfig;
use crate::holon::{Holon, IdSource, IdsExhausted, TraitVector};
use crate::scalar::Scalar;

pub const GENE_A: u16 = 0;
pub const GENE_B: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkageParams {
    /// Molecules per protocell.
    pub n_proto: usize,
    /// Replication-time penalty of a linked pair.
    pub tau: f64,
}

impl Default for LinkageParams {
    fn default() -> Self {
        LinkageParams {
            n_proto: 6,
            tau: 0.2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Linkage {
    pub params: LinkageParams,
}

/// Probability that a focal free gene's daughter protocell holds the other
/// gene type, given `same` other free genes of the focal type and
/// `complement` of the other type.
///
/// The daughter holds the focal gene plus `min(n_proto / 2 - 1, others)`
/// genes drawn without replacement from the others; it fails only when all
/// of them match the focal type.
pub fn assembly_probability(same: usize, complement: usize, n_proto: usize) -> f64 {
    let others = same + complement;
    let slots = (n_proto / 2).saturating_sub(1).min(others);
    if slots == 0 {
        return 0.0;
    }
    // C(same, slots) / C(others, slots)
    let all_same: f64 = (0..slots)
        .map(|i| same.saturating_sub(i) as f64 / (others - i) as f64)
        .product();
    1.0 - all_same
}

/// One simulated protocell division: draw the protocell from the pool, then
/// the focal gene's daughter from the protocell. True when the daughter
/// holds both gene types.
pub fn simulate_assembly<R: Rng + ?Sized>(
    same: usize,
    complement: usize,
    n_proto: usize,
    rng: &mut R,
) -> bool {
    // others in the pool: `false` = focal type, `true` = complement
    let pool: Vec<bool> = std::iter::repeat_n(false, same)
        .chain(std::iter::repeat_n(true, complement))
        .collect();
    let cell_others = n_proto.saturating_sub(1).min(pool.len());
    let cell: Vec<bool> = index::sample(rng, pool.len(), cell_others)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    let daughter_others = (n_proto / 2).saturating_sub(1).min(cell.len());
    index::sample(rng, cell.len(), daughter_others)
        .into_iter()
        .any(|i| cell[i])
}

impl Linkage {
    pub fn new(params: LinkageParams) -> Self {
        Linkage { params }
    }

    /// A composite with both gene types among its direct parts.
    pub fn is_linked<S: Scalar>(&self, h: &Holon<S>) -> bool {
        let has = |tag| {
            h.parts
                .iter()
                .any(|p| p.is_leaf() && p.traits.tag() == Some(tag))
        };
        !h.is_leaf() && has(GENE_A) && has(GENE_B)
    }

    pub fn linked_frequency<S: Scalar>(&self, population: &[Holon<S>]) -> f64 {
        if population.is_empty() {
            return 0.0;
        }
        population.iter().filter(|h| self.is_linked(h)).count() as f64 / population.len() as f64
    }
}

impl<S: Scalar> Scenario<S> for Linkage {
    fn name(&self) -> &'static str {
        "linkage"
    }

    fn init(
        &self,
        config: &EngineConfig<S>,
        ids: &mut IdSource,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Holon<S>>, IdsExhausted> {
        (0..config.capacity)
            .map(|i| {
                let tag = if i % 2 == 0 { GENE_A } else { GENE_B };
                Ok(Holon::leaf(
                    ids.fresh()?,
                    TraitVector::tagged(vec![S::zero()], vec![tag]),
                    config.initial.clone(),
                ))
            })
            .collect()
    }

    fn fitness(&self, h: &Holon<S>, env: &Environment) -> S {
        let f = if h.is_leaf() {
            match h.traits.tag() {
                Some(tag @ (GENE_A | GENE_B)) => {
                    let other = if tag == GENE_A { GENE_B } else { GENE_A };
                    let same = env.free(tag).saturating_sub(1);
                    assembly_probability(same, env.free(other), self.params.n_proto)
                }
                _ => 0.0,
            }
        } else if self.is_linked(h) {
            1.0 - self.params.tau
        } else {
            0.0
        };
        S::lit(f)
    }

    fn composite_traits(&self, inputs: &[Holon<S>]) -> Option<TraitVector<S>> {
        untagged_mean(inputs)
    }

    fn observables(&self, population: &[Holon<S>]) -> BTreeMap<String, f64> {
        BTreeMap::from([("linked_freq".to_string(), self.linked_frequency(population))])
    }
}
