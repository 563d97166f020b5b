//! Desk-scale major-transition experiments. A scenario seeds the population,
//! scores root holons, and optionally supplies composite traits, a scenario
//! observable, and an early-stop goal.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::engine::EngineConfig;
use crate::holon::{Holon, IdSource, IdsExhausted, TraitVector};
use crate::scalar::Scalar;

pub mod division_of_labor;
pub mod fisher_muller;
pub mod hypercycle;
pub mod linkage;
pub mod presets;

pub use division_of_labor::{DivisionOfLabor, DivisionOfLaborParams};
pub use fisher_muller::{FisherMuller, FisherMullerParams};
pub use hypercycle::{Hypercycle, HypercycleParams};
pub use linkage::{Linkage, LinkageParams};

/// Population-level context a fitness evaluation may depend on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Environment {
    pub generation: u64,
    /// Counts of unfused (root) leaves by their first tag: the well-mixed pool.
    pub free_tags: BTreeMap<u16, usize>,
}

impl Environment {
    pub fn observe<S: Scalar>(population: &[Holon<S>], generation: u64) -> Self {
        let mut free_tags = BTreeMap::new();
        for h in population.iter().filter(|h| h.is_leaf()) {
            if let Some(t) = h.traits.tag() {
                *free_tags.entry(t).or_insert(0) += 1;
            }
        }
        Environment {
            generation,
            free_tags,
        }
    }

    pub fn free(&self, tag: u16) -> usize {
        self.free_tags.get(&tag).copied().unwrap_or(0)
    }

    pub fn free_total(&self) -> usize {
        self.free_tags.values().sum()
    }
}

pub trait Scenario<S: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;

    fn init(
        &self,
        config: &EngineConfig<S>,
        ids: &mut IdSource,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Holon<S>>, IdsExhausted>;

    fn environment(&self, population: &[Holon<S>], generation: u64) -> Environment {
        Environment::observe(population, generation)
    }

    /// Finite and nonnegative for every valid holon.
    fn fitness(&self, holon: &Holon<S>, env: &Environment) -> S;

    /// Root traits for a fusion composite; `None` keeps the default rule.
    fn composite_traits(&self, _inputs: &[Holon<S>]) -> Option<TraitVector<S>> {
        None
    }

    /// Trait coordinate holding a part's defection propensity.
    fn defection_index(&self) -> usize {
        0
    }

    fn parasite_frequency(&self, _population: &[Holon<S>]) -> Option<f64> {
        None
    }

    fn goal_reached(&self, _population: &[Holon<S>], _env: &Environment) -> bool {
        false
    }

    /// Named end-of-run observables for summaries and replicate reports.
    fn observables(&self, _population: &[Holon<S>]) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }
}

/// Mean of the root enforcement strengths.
pub fn mean_enforcement<S: Scalar>(population: &[Holon<S>]) -> f64 {
    if population.is_empty() {
        return 0.0;
    }
    population
        .iter()
        .map(|h| h.mechanisms.enforcement_strength.as_f64())
        .sum::<f64>()
        / population.len() as f64
}

/// Untagged per-coordinate mean over inputs with equal trait lengths.
pub(crate) fn untagged_mean<S: Scalar>(inputs: &[Holon<S>]) -> Option<TraitVector<S>> {
    let len = inputs.first()?.traits.values.len();
    if inputs.iter().any(|h| h.traits.values.len() != len) {
        return None;
    }
    let n = S::lit(inputs.len() as f64);
    let values = (0..len)
        .map(|i| {
            inputs
                .iter()
                .map(|h| h.traits.values[i])
                .fold(S::zero(), |a, b| a + b)
                / n
        })
        .collect();
    Some(TraitVector::new(values))
}
