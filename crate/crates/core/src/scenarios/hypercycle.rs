//! Catalytic cycle of replicators with free-riding parasites.
//!
//! Leaves are molecules. The first tag is the species: `0..members` are cycle
//! members, `members` is the parasite. Traits are `[defection, efficiency]`.
//! Member `i` is catalysed by member `i - 1 (mod members)`; the parasite takes
//! catalysis from the last member, the same catalyst member 0 depends on, and
//! catalyses nothing.
//!
//! An unfused molecule draws catalysis from the well-mixed pool: its fitness
//! is its efficiency times the pool frequency of its catalyst. A compartment
//! (a composite whose direct parts are molecules) is viable only when every
//! member species is among its direct parts; its fitness is the product of
//! the members' mean efficiencies, reduced by the mean effective defection of
//! its parts. Composites that hold no molecules directly score zero.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{untagged_mean, Environment, Scenario};
use crate::engine::EngineConfig;
use crate::holon::{Holon, IdSource, IdsExhausted, TraitVector};
use crate::operators::defection_weight;
use crate::scalar::Scalar;

pub const DEFECTION: usize = 0;
pub const EFFICIENCY: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypercycleParams {
    /// Cycle length m.
    pub members: u16,
    /// Fraction of the initial population seeded as parasites.
    pub parasite_fraction: f64,
    pub member_efficiency: f64,
    pub parasite_efficiency: f64,
    /// Efficiencies are clamped to `[0, max_efficiency]` when scored.
    pub max_efficiency: f64,
    /// Parasite frequency at or above which a run counts as parasite-fixed.
    pub fixation_threshold: f64,
}

impl Default for HypercycleParams {
    fn default() -> Self {
        HypercycleParams {
            members: 2,
            parasite_fraction: 0.1,
            member_efficiency: 1.0,
            parasite_efficiency: 1.5,
            max_efficiency: 2.0,
            fixation_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Hypercycle {
    pub params: HypercycleParams,
}

impl Hypercycle {
    pub fn new(params: HypercycleParams) -> Self {
        Hypercycle { params }
    }

    pub fn parasite_tag(&self) -> u16 {
        self.params.members
    }

    /// Catalyst species for `species`.
    pub fn catalyst(&self, species: u16) -> u16 {
        let m = self.params.members;
        if species >= m {
            m - 1
        } else {
            (species + m - 1) % m
        }
    }

    fn efficiency<S: Scalar>(&self, h: &Holon<S>) -> f64 {
        h.traits
            .get(EFFICIENCY)
            .as_f64()
            .clamp(0.0, self.params.max_efficiency)
    }

    /// Fitness of a compartment from its direct parts.
    pub fn compartment_fitness<S: Scalar>(&self, h: &Holon<S>) -> f64 {
        let m = self.params.members;
        let mut sums = vec![(0.0, 0usize); m as usize];
        for part in h.parts.iter().filter(|p| p.is_leaf()) {
            if let Some(t) = part.traits.tag().filter(|&t| t < m) {
                let slot = &mut sums[t as usize];
                slot.0 += self.efficiency(part);
                slot.1 += 1;
            }
        }
        if sums.iter().any(|&(_, n)| n == 0) {
            return 0.0;
        }
        let product: f64 = sums.iter().map(|&(s, n)| s / n as f64).product();
        let load = h
            .parts
            .iter()
            .map(|p| defection_weight(p, h, DEFECTION).as_f64())
            .sum::<f64>()
            / h.parts.len() as f64;
        product * (1.0 - load).max(0.0)
    }

    pub fn is_parasite<S: Scalar>(&self, h: &Holon<S>) -> bool {
        h.is_leaf() && h.traits.tag() == Some(self.parasite_tag())
    }
}

impl<S: Scalar> Scenario<S> for Hypercycle {
    fn name(&self) -> &'static str {
        "hypercycle"
    }

    fn init(
        &self,
        config: &EngineConfig<S>,
        ids: &mut IdSource,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Holon<S>>, IdsExhausted> {
        let n = config.capacity;
        let parasites = ((n as f64) * self.params.parasite_fraction).round() as usize;
        let m = self.params.members as usize;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let (tag, defection, efficiency) = if i < parasites {
                (self.parasite_tag(), 1.0, self.params.parasite_efficiency)
            } else {
                (
                    ((i - parasites) % m) as u16,
                    0.0,
                    self.params.member_efficiency,
                )
            };
            out.push(Holon::leaf(
                ids.fresh()?,
                TraitVector::tagged(vec![S::lit(defection), S::lit(efficiency)], vec![tag]),
                config.initial.clone(),
            ));
        }
        Ok(out)
    }

    fn fitness(&self, h: &Holon<S>, env: &Environment) -> S {
        let f = if h.is_leaf() {
            let total = env.free_total();
            match h.traits.tag() {
                Some(species) if total > 0 => {
                    let support = env.free(self.catalyst(species)) as f64 / total as f64;
                    self.efficiency(h) * support
                }
                _ => 0.0,
            }
        } else {
            self.compartment_fitness(h)
        };
        S::lit(f)
    }

    fn composite_traits(&self, inputs: &[Holon<S>]) -> Option<TraitVector<S>> {
        untagged_mean(inputs)
    }

    fn defection_index(&self) -> usize {
        DEFECTION
    }

    /// Parasites among all molecules (leaves) in every root's hierarchy.
    fn parasite_frequency(&self, population: &[Holon<S>]) -> Option<f64> {
        let mut molecules = 0usize;
        let mut parasites = 0usize;
        for root in population {
            for l in root.leaves() {
                molecules += 1;
                if self.is_parasite(l) {
                    parasites += 1;
                }
            }
        }
        Some(if molecules == 0 {
            0.0
        } else {
            parasites as f64 / molecules as f64
        })
    }

    fn observables(&self, population: &[Holon<S>]) -> BTreeMap<String, f64> {
        let freq = self.parasite_frequency(population).unwrap_or(0.0);
        let compartments = population.iter().filter(|h| !h.is_leaf()).count();
        BTreeMap::from([
            ("parasite_freq".to_string(), freq),
            (
                "compartment_freq".to_string(),
                if population.is_empty() {
                    0.0
                } else {
                    compartments as f64 / population.len() as f64
                },
            ),
        ])
    }
}
