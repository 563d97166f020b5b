//! Two loci, each with a beneficial allele that arises by mutation.
//!
//! Leaves carry traits `[locus_0, locus_1]`, seeded at 0. A locus holds the
//! beneficial allele once its value reaches `threshold`. Fitness is
//! `(1 + s)^k` for `k` beneficial loci. The goal is reached the first
//! generation some individual carries both.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, Scenario};
use crate::engine::EngineConfig;
use crate::holon::{Holon, IdSource, IdsExhausted, TraitVector};
use crate::scalar::Scalar;

pub const LOCI: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FisherMullerParams {
    /// Selective advantage per beneficial locus.
    pub s: f64,
    /// Locus value at or above which the allele is beneficial.
    pub threshold: f64,
}

impl Default for FisherMullerParams {
    fn default() -> Self {
        FisherMullerParams {
            s: 0.5,
            threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FisherMuller {
    pub params: FisherMullerParams,
}

impl FisherMuller {
    pub fn new(params: FisherMullerParams) -> Self {
        FisherMuller { params }
    }

    pub fn beneficial_loci<S: Scalar>(&self, h: &Holon<S>) -> usize {
        (0..LOCI)
            .filter(|&i| h.traits.get(i).as_f64() >= self.params.threshold)
            .count()
    }

    pub fn carriers<S: Scalar>(&self, population: &[Holon<S>], loci: usize) -> usize {
        population
            .iter()
            .filter(|h| self.beneficial_loci(h) >= loci)
            .count()
    }
}

impl<S: Scalar> Scenario<S> for FisherMuller {
    fn name(&self) -> &'static str {
        "fisher_muller"
    }

    fn init(
        &self,
        config: &EngineConfig<S>,
        ids: &mut IdSource,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Holon<S>>, IdsExhausted> {
        (0..config.capacity)
            .map(|_| {
                Ok(Holon::leaf(
                    ids.fresh()?,
                    TraitVector::new(vec![S::zero(); LOCI]),
                    config.initial.clone(),
                ))
            })
            .collect()
    }

    fn fitness(&self, h: &Holon<S>, _env: &Environment) -> S {
        S::lit((1.0 + self.params.s).powi(self.beneficial_loci(h) as i32))
    }

    fn goal_reached(&self, population: &[Holon<S>], _env: &Environment) -> bool {
        self.carriers(population, LOCI) > 0
    }

    fn observables(&self, population: &[Holon<S>]) -> BTreeMap<String, f64> {
        let n = population.len().max(1) as f64;
        BTreeMap::from([
            (
                "one_locus_freq".to_string(),
                self.carriers(population, 1) as f64 / n,
            ),
            (
                "both_loci_freq".to_string(),
                self.carriers(population, LOCI) as f64 / n,
            ),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holon::{HolonId, Mechanisms};

    fn ind(values: [f64; 2]) -> Holon<f64> {
        Holon::leaf(
            HolonId(1),
            TraitVector::new(values.to_vec()),
            Mechanisms::default(),
        )
    }

    #[test]
    fn both_alleles_score_the_square() {
        let s = FisherMuller::default();
        assert_eq!(s.fitness(&ind([0.4, 0.3]), &Environment::default()), 2.25);
        assert!(s.goal_reached(&[ind([0.0, 0.0]), ind([0.4, 0.3])], &Environment::default()));
    }

    #[test]
    fn no_alleles_score_one() {
        let s = FisherMuller::default();
        assert_eq!(s.fitness(&ind([0.0, 0.29]), &Environment::default()), 1.0);
        assert_eq!(s.fitness(&ind([0.35, 0.0]), &Environment::default()), 1.5);
        assert!(!s.goal_reached(
            &[ind([0.35, 0.0]), ind([0.0, 0.35])],
            &Environment::default()
        ));
    }
}
