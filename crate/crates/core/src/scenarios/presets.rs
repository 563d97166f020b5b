//! Stock configurations for the scenario experiments.
//!
//! Each preset returns the engine config and the scenario it was tuned for;
//! callers set `seed` (and anything else they want to vary) afterwards.

use super::{
    DivisionOfLabor, DivisionOfLaborParams, FisherMuller, FisherMullerParams, Hypercycle, Linkage,
};
use crate::engine::{Enables, EngineConfig};
use crate::holon::{ReproMode, VariationKind};
use crate::operators::BlendWeights;
use crate::scalar::Scalar;

fn without(mut enables: Enables, kinds: &[VariationKind]) -> Enables {
    for k in kinds {
        enables.variation[k.index()] = false;
    }
    enables
}

fn asexual_only() -> Enables {
    Enables {
        asexual: true,
        multiparent: false,
        fission: false,
        fusion: false,
        cooperation: false,
        variation: [true; 6],
    }
}

/// Every condition enabled at the default rates, on division-of-labour
/// groups with a little initial defection so suppression can occur. Part
/// duplication is free in this scenario, so the size guards are tighter than
/// the engine defaults to bound holon size.
pub fn full_featured<S: Scalar>() -> (EngineConfig<S>, DivisionOfLabor) {
    let scenario = DivisionOfLabor::new(DivisionOfLaborParams {
        initial_group_size: 2,
        initial_defection: 0.1,
        ..DivisionOfLaborParams::default()
    });
    let config = EngineConfig {
        max_parts_cap: 8,
        max_depth_cap: 4,
        ..EngineConfig::default()
    };
    (config, scenario)
}

/// Variation, heredity and selection only.
pub fn brandon<S: Scalar>() -> (EngineConfig<S>, DivisionOfLabor) {
    let (config, scenario) = full_featured();
    (config.brandon(), scenario)
}

/// Molecules may fuse into compartments that police their parts.
pub fn hypercycle_compartments<S: Scalar>() -> (EngineConfig<S>, Hypercycle) {
    let mut config = EngineConfig {
        enables: Enables {
            fusion: true,
            cooperation: true,
            ..asexual_only()
        },
        max_parts_cap: 8,
        ..EngineConfig::default()
    };
    config.enables = without(config.enables, &[VariationKind::ReproMechanism]);
    config.initial.enforcement_strength = S::lit(0.5);
    (config, Hypercycle::default())
}

/// The same molecules in a well-mixed pool: no compartments, no policing.
pub fn hypercycle_well_mixed<S: Scalar>() -> (EngineConfig<S>, Hypercycle) {
    let (mut config, scenario) = hypercycle_compartments();
    config.enables.fusion = false;
    config.enables.cooperation = false;
    (config, scenario)
}

/// Free genes against fused gene pairs.
pub fn linkage<S: Scalar>() -> (EngineConfig<S>, Linkage) {
    let mut config = EngineConfig {
        enables: without(
            Enables {
                fusion: true,
                ..asexual_only()
            },
            &[
                VariationKind::ReproMechanism,
                VariationKind::FissionFusionMechanism,
            ],
        ),
        ..EngineConfig::default()
    };
    config.initial.fusion_affinity = S::lit(0.2);
    (config, Linkage::default())
}

/// Groups of specialised cells with heritable enforcement.
pub fn division_of_labor<S: Scalar>() -> (EngineConfig<S>, DivisionOfLabor) {
    let config = EngineConfig {
        enables: without(
            Enables {
                cooperation: true,
                ..asexual_only()
            },
            &[
                VariationKind::ReproMechanism,
                VariationKind::FissionFusionMechanism,
            ],
        ),
        ..EngineConfig::default()
    };
    (config, DivisionOfLabor::default())
}

/// Weak selection on two loci in a large population, so that beneficial
/// alleles tend to arise in different lineages before either sweeps.
fn fisher_muller<S: Scalar>(mode: ReproMode) -> (EngineConfig<S>, FisherMuller) {
    let multiparent = mode == ReproMode::Multiparent;
    let mut config = EngineConfig {
        enables: without(
            Enables {
                asexual: !multiparent,
                multiparent,
                ..asexual_only()
            },
            &[
                VariationKind::PartDeletion,
                VariationKind::PartDuplication,
                VariationKind::ReproMechanism,
                VariationKind::FissionFusionMechanism,
                VariationKind::EnforcementMechanism,
            ],
        ),
        blend: BlendWeights::PerCoordinate,
        similarity_threshold: S::lit(1e6),
        capacity: 400,
        generations: 2000,
        stop_on_goal: true,
        ..EngineConfig::default()
    };
    config.initial.repro_mode = mode;
    config
        .initial
        .mutation_rates
        .set(VariationKind::TraitChange, S::lit(0.5));
    let scenario = FisherMuller::new(FisherMullerParams {
        s: 0.1,
        threshold: 0.5,
    });
    (config, scenario)
}

/// Clonal lineages only.
pub fn fisher_muller_asexual<S: Scalar>() -> (EngineConfig<S>, FisherMuller) {
    fisher_muller(ReproMode::Asexual)
}

/// Biparental recombination.
pub fn fisher_muller_multiparent<S: Scalar>() -> (EngineConfig<S>, FisherMuller) {
    fisher_muller(ReproMode::Multiparent)
}
