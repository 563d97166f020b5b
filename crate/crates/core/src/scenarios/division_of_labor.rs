//! Specialised parts inside a whole, and the defectors that escape it.
//!
//! Traits are `[defection, role]`. The role coordinate is binned into
//! `roles` equal slots of `[0, 1]`. A holon's fitness is
//! `(distinct roles among its direct parts)^alpha` minus the summed
//! effective defection of those parts, floored at zero. A lone leaf has one
//! role and no parts, so it scores 1.
//!
//! Defection shifts by 5A like any trait; with cooperation enabled a
//! defecting part copies itself inside its whole, adding tax without adding
//! roles, so wholes with stronger enforcement keep more of their fitness.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{untagged_mean, Environment, Scenario};
use crate::engine::EngineConfig;
use crate::holon::{Holon, IdSource, IdsExhausted, Origin, TraitVector};
use crate::operators::defection_weight;
use crate::scalar::Scalar;

pub const DEFECTION: usize = 0;
pub const ROLE: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivisionOfLaborParams {
    /// Superadditivity exponent.
    pub alpha: f64,
    /// Number of role bins.
    pub roles: usize,
    /// Seed holons are groups of this many leaves with distinct roles
    /// (round-robin over the bins); 1 seeds bare leaves.
    pub initial_group_size: usize,
    /// Defection propensity of seeded leaves.
    pub initial_defection: f64,
}

impl Default for DivisionOfLaborParams {
    fn default() -> Self {
        DivisionOfLaborParams {
            alpha: 1.5,
            roles: 4,
            initial_group_size: 4,
            initial_defection: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DivisionOfLabor {
    pub params: DivisionOfLaborParams,
}

impl DivisionOfLabor {
    pub fn new(params: DivisionOfLaborParams) -> Self {
        DivisionOfLabor { params }
    }

    /// Role bin of a holon's root traits.
    pub fn role<S: Scalar>(&self, h: &Holon<S>) -> usize {
        let r = self.params.roles.max(1);
        let v = h.traits.get(ROLE).unit_clamp().as_f64();
        ((v * r as f64) as usize).min(r - 1)
    }

    pub fn distinct_roles<S: Scalar>(&self, h: &Holon<S>) -> usize {
        if h.is_leaf() {
            return 1;
        }
        h.parts
            .iter()
            .map(|p| self.role(p))
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Centre of role bin `bin`.
    fn role_value(&self, bin: usize) -> f64 {
        let r = self.params.roles.max(1);
        ((bin % r) as f64 + 0.5) / r as f64
    }
}

impl<S: Scalar> Scenario<S> for DivisionOfLabor {
    fn name(&self) -> &'static str {
        "division_of_labor"
    }

    fn init(
        &self,
        config: &EngineConfig<S>,
        ids: &mut IdSource,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Holon<S>>, IdsExhausted> {
        let k = self.params.initial_group_size.max(1);
        let d = S::lit(self.params.initial_defection);
        let mut out = Vec::with_capacity(config.capacity);
        for _ in 0..config.capacity {
            let mut leaves = Vec::with_capacity(k);
            for j in 0..k {
                leaves.push(Holon::leaf(
                    ids.fresh()?,
                    TraitVector::new(vec![d, S::lit(self.role_value(j))]),
                    config.initial.clone(),
                ));
            }
            if k == 1 {
                out.extend(leaves);
                continue;
            }
            let traits = untagged_mean(&leaves).expect("seed leaves share a shape");
            let mut group = Holon::leaf(ids.fresh()?, traits, config.initial.clone());
            group.origin = Origin::Seed;
            group.parts = leaves;
            out.push(group);
        }
        Ok(out)
    }

    fn fitness(&self, h: &Holon<S>, _env: &Environment) -> S {
        let gain = (self.distinct_roles(h) as f64).powf(self.params.alpha);
        let tax: f64 = h
            .parts
            .iter()
            .map(|p| defection_weight(p, h, DEFECTION).as_f64())
            .sum();
        S::lit((gain - tax).max(0.0))
    }

    fn defection_index(&self) -> usize {
        DEFECTION
    }

    fn observables(&self, population: &[Holon<S>]) -> BTreeMap<String, f64> {
        let n = population.len().max(1) as f64;
        let roles: f64 = population
            .iter()
            .map(|h| self.distinct_roles(h) as f64)
            .sum::<f64>()
            / n;
        BTreeMap::from([
            (
                "mean_enforcement".to_string(),
                super::mean_enforcement(population),
            ),
            ("mean_roles".to_string(), roles),
        ])
    }
}
