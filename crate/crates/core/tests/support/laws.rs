//! Randomized operator laws shared by the property tests and the acceptance
//! harness. Each law runs [`CASES`] deterministic random cases.

use std::collections::{BTreeMap, HashSet};

use holon_evo::engine::{Enables, Engine};
use holon_evo::events::{EventCounts, EventKind};
use holon_evo::holon::{deep_copy, depth, trait_distance, validate};
use holon_evo::operators::{
    fission, fuse, mutate, reproduce_asexual, reproduce_multiparent, select, BlendWeights,
    SelectionScheme, VariationParams,
};
use holon_evo::scenarios::presets;
use holon_evo::{Holon, IdSource, Mechanisms, MutationRates, TraitVector, VariationKind};
use proptest::prelude::*;
use proptest::test_runner::{RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 1000;

/// Cases passed, or the minimal failing input.
pub type Outcome = Result<u32, String>;
const TRAITS: usize = 2;

#[derive(Debug, Clone)]
struct Shape {
    values: Vec<f64>,
    parts: Vec<Shape>,
}

fn shape() -> impl Strategy<Value = Shape> {
    let values = || prop::collection::vec(-2.0..2.0f64, TRAITS);
    let leaf = values().prop_map(|values| Shape {
        values,
        parts: vec![],
    });
    leaf.prop_recursive(3, 24, 3, move |inner| {
        (values(), prop::collection::vec(inner, 1..4))
            .prop_map(|(values, parts)| Shape { values, parts })
    })
}

fn mechanisms(rng: &mut ChaCha8Rng) -> Mechanisms<f64> {
    Mechanisms {
        fission_rate: rng.random(),
        fusion_affinity: rng.random(),
        enforcement_strength: rng.random(),
        mutation_rates: MutationRates(std::array::from_fn(|_| rng.random())),
        ..Mechanisms::default()
    }
}

fn build(s: &Shape, ids: &mut IdSource, rng: &mut ChaCha8Rng) -> Holon<f64> {
    let mut h = Holon::leaf(
        ids.fresh().unwrap(),
        TraitVector::new(s.values.clone()),
        mechanisms(rng),
    );
    h.parts = s.parts.iter().map(|p| build(p, ids, rng)).collect();
    h
}

fn no_variation() -> VariationParams<f64> {
    VariationParams {
        enabled: [false; 6],
        ..VariationParams::default()
    }
}

fn check<T>(strategy: T, test: impl Fn(T::Value) -> Result<(), TestCaseError>) -> Outcome
where
    T: Strategy,
    T::Value: std::fmt::Debug,
{
    let config = ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, test)
        .map(|()| CASES)
        .map_err(|e| e.to_string())
}

/// Same shape as `template`, independently drawn values and mechanisms.
fn jittered(template: &Holon<f64>, ids: &mut IdSource, rng: &mut ChaCha8Rng) -> Holon<f64> {
    let mut h = deep_copy(template, ids).unwrap();
    fn jitter(h: &mut Holon<f64>, rng: &mut ChaCha8Rng) {
        for v in h.traits.values.iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
        h.mechanisms = mechanisms(rng);
        for p in h.parts.iter_mut() {
            jitter(p, rng);
        }
    }
    jitter(&mut h, rng);
    h
}

/// Walks corresponding nodes of a child and its parents.
fn check_hull(child: &Holon<f64>, parents: &[&Holon<f64>]) -> Result<(), TestCaseError> {
    let within = |x: f64, xs: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        lo <= x && x <= hi
    };
    for (i, &v) in child.traits.values.iter().enumerate() {
        prop_assert!(within(v, &mut parents.iter().map(|p| p.traits.values[i])));
    }
    let m = &child.mechanisms;
    prop_assert!(within(
        m.enforcement_strength,
        &mut parents.iter().map(|p| p.mechanisms.enforcement_strength)
    ));
    prop_assert!(within(
        m.fission_rate,
        &mut parents.iter().map(|p| p.mechanisms.fission_rate)
    ));
    prop_assert!(within(
        m.fusion_affinity,
        &mut parents.iter().map(|p| p.mechanisms.fusion_affinity)
    ));
    for kind in VariationKind::ALL {
        prop_assert!(within(
            m.mutation_rates.get(kind),
            &mut parents
                .iter()
                .map(|p| p.mechanisms.mutation_rates.get(kind))
        ));
    }
    for (i, part) in child.parts.iter().enumerate() {
        let corresponding: Vec<&Holon<f64>> = parents.iter().map(|p| &p.parts[i]).collect();
        check_hull(part, &corresponding)?;
    }
    Ok(())
}

/// Exact pick probabilities of a tournament of `k` uniform draws with
/// uniform tie-breaking among the best candidates.
fn tournament_probabilities(f: &[f64], k: usize) -> Vec<f64> {
    let n = f.len() as f64;
    f.iter()
        .map(|&x| {
            let at_most = f.iter().filter(|&&y| y <= x).count() as f64;
            let below = f.iter().filter(|&&y| y < x).count() as f64;
            let tied = f.iter().filter(|&&y| y == x).count() as f64;
            ((at_most / n).powi(k as i32) - (below / n).powi(k as i32)) / tied
        })
        .collect()
}

fn frequencies(picks: &[usize], n: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n];
    for &i in picks {
        counts[i] += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / picks.len() as f64)
        .collect()
}

fn fitnesses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..10.0f64, 1.0..2.0f64], 1..8)
        .prop_filter("some positive fitness", |f| f.iter().any(|&x| x > 0.0))
}

pub type Law = fn() -> Outcome;

pub const LAWS: [(&str, Law); 9] = [
    ("fusion depth law", fusion_depth_law),
    ("fission undoes fusion", fission_undoes_fusion),
    (
        "multiparent child stays in parent hull",
        multiparent_child_stays_in_parent_hull,
    ),
    (
        "proportional selection matches exact probabilities",
        proportional_selection_matches_exact_probabilities,
    ),
    (
        "tournament selection matches exact probabilities",
        tournament_selection_matches_exact_probabilities,
    ),
    (
        "selection ignores fitness scale",
        selection_ignores_fitness_scale,
    ),
    (
        "offspring resemble their parents",
        offspring_resemble_their_parents,
    ),
    (
        "mutation reports each applied kind",
        mutation_reports_each_applied_kind,
    ),
    (
        "engine mutation events match metrics",
        engine_mutation_events_match_metrics,
    ),
];

pub fn fusion_depth_law() -> Outcome {
    check(
        (prop::collection::vec(shape(), 2..5), any::<u64>()),
        |(shapes, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids = IdSource::new();
            let inputs: Vec<_> = shapes
                .iter()
                .map(|s| build(s, &mut ids, &mut rng))
                .collect();
            let deepest = inputs.iter().map(depth).max().unwrap();
            let fused = fuse(inputs, None, &mut ids).unwrap();
            prop_assert_eq!(depth(&fused), 1 + deepest);
            prop_assert!(validate(&fused).is_empty());
            Ok(())
        },
    )
}

pub fn fission_undoes_fusion() -> Outcome {
    check(
        (prop::collection::vec(shape(), 2..5), any::<u64>()),
        |(shapes, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids = IdSource::new();
            let inputs: Vec<_> = shapes
                .iter()
                .map(|s| build(s, &mut ids, &mut rng))
                .collect();
            let fused = fuse(inputs.clone(), None, &mut ids).unwrap();
            let fragments = fission(&fused).unwrap();
            prop_assert_eq!(fragments.len(), inputs.len());
            for (frag, input) in fragments.iter().zip(&inputs) {
                prop_assert_eq!(frag.id, input.id);
                prop_assert_eq!(&frag.traits, &input.traits);
                prop_assert_eq!(&frag.mechanisms, &input.mechanisms);
                prop_assert_eq!(&frag.parts, &input.parts);
                prop_assert_eq!(&frag.parent_ids, &vec![fused.id]);
            }
            // and the other way round for any composite
            let refused = fuse(fragments, None, &mut ids).unwrap();
            let before: Vec<_> = fused.parts.iter().map(|p| p.id).collect();
            let after: Vec<_> = refused.parts.iter().map(|p| p.id).collect();
            prop_assert_eq!(before, after);
            prop_assert_eq!(depth(&refused), depth(&fused));
            Ok(())
        },
    )
}

pub fn multiparent_child_stays_in_parent_hull() -> Outcome {
    check(
        (shape(), 2usize..5, 0usize..4, any::<u64>()),
        |(s, n, blend, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids = IdSource::new();
            let template = build(&s, &mut ids, &mut rng);
            let parents: Vec<_> = (0..n)
                .map(|_| jittered(&template, &mut ids, &mut rng))
                .collect();
            let refs: Vec<&Holon<f64>> = parents.iter().collect();
            let blend = match blend {
                0 => BlendWeights::Uniform,
                1 => {
                    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let sum: f64 = raw.iter().sum();
                    let mut w: Vec<f64> = raw.iter().map(|x| x / sum).collect();
                    let rest: f64 = w[1..].iter().sum();
                    w[0] = 1.0 - rest;
                    BlendWeights::Fixed(w)
                }
                2 => BlendWeights::RandomConvex,
                _ => BlendWeights::PerCoordinate,
            };
            let (child, outcome) = reproduce_multiparent(
                &refs,
                &blend,
                f64::INFINITY,
                &no_variation(),
                &mut ids,
                &mut rng,
            )
            .unwrap();
            prop_assert!(outcome.variations.is_empty());
            prop_assert_eq!(depth(&child), depth(&template));
            check_hull(&child, &refs)?;
            Ok(())
        },
    )
}

pub fn proportional_selection_matches_exact_probabilities() -> Outcome {
    check((fitnesses(), any::<u64>()), |(f, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = select(&f, 100_000, SelectionScheme::FitnessProportional, &mut rng).unwrap();
        let total: f64 = f.iter().sum();
        for (freq, x) in frequencies(&picks, f.len()).iter().zip(&f) {
            prop_assert!(
                (freq - x / total).abs() <= 0.01,
                "{} vs {}",
                freq,
                x / total
            );
        }
        Ok(())
    })
}

pub fn tournament_selection_matches_exact_probabilities() -> Outcome {
    check((fitnesses(), 1usize..5, any::<u64>()), |(f, k, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = select(&f, 100_000, SelectionScheme::Tournament(k), &mut rng).unwrap();
        let exact = tournament_probabilities(&f, k);
        for (freq, p) in frequencies(&picks, f.len()).iter().zip(&exact) {
            prop_assert!((freq - p).abs() <= 0.01, "{} vs {}", freq, p);
        }
        Ok(())
    })
}

pub fn selection_ignores_fitness_scale() -> Outcome {
    check(
        (fitnesses(), -8i32..8, 1usize..4, any::<u64>()),
        |(f, power, k, seed)| {
            let scaled: Vec<f64> = f.iter().map(|x| x * 2f64.powi(power)).collect();
            for scheme in [
                SelectionScheme::FitnessProportional,
                SelectionScheme::Tournament(k),
            ] {
                let a = select(&f, 200, scheme, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let b = select(&scaled, 200, scheme, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                prop_assert_eq!(a, b);
            }
            Ok(())
        },
    )
}

pub fn offspring_resemble_their_parents() -> Outcome {
    check(
        (
            prop::collection::vec(prop::collection::vec(0.0..1.0f64, TRAITS), 10..30),
            any::<bool>(),
            any::<u64>(),
        ),
        |(points, multiparent, seed)| {
            let mut ids = IdSource::new();
            let rates = MutationRates::zero().with(VariationKind::TraitChange, 0.5);
            let population: Vec<Holon<f64>> = points
                .iter()
                .map(|v| {
                    Holon::leaf(
                        ids.fresh().unwrap(),
                        TraitVector::new(v.clone()),
                        Mechanisms {
                            mutation_rates: rates,
                            ..Mechanisms::default()
                        },
                    )
                })
                .collect();
            let spread = population
                .iter()
                .flat_map(|a| population.iter().map(|b| trait_distance(a, b)))
                .sum::<f64>()
                / (population.len() * population.len()) as f64;
            prop_assume!(spread > 0.1);
            let params = VariationParams {
                sigma_trait: 0.05,
                ..VariationParams::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = population.len();
            let (mut to_parent, mut to_other) = (0.0, 0.0);
            let trials = 200;
            for _ in 0..trials {
                let focal = rng.random_range(0..n);
                let mut parents = vec![focal];
                if multiparent {
                    // nearest neighbour, as partner search would choose within a threshold
                    let partner = (0..n)
                        .filter(|&j| j != focal)
                        .min_by(|&a, &b| {
                            trait_distance(&population[focal], &population[a])
                                .total_cmp(&trait_distance(&population[focal], &population[b]))
                        })
                        .unwrap();
                    parents.push(partner);
                }
                let refs: Vec<&Holon<f64>> = parents.iter().map(|&i| &population[i]).collect();
                let child = if multiparent {
                    reproduce_multiparent(
                        &refs,
                        &BlendWeights::Uniform,
                        f64::INFINITY,
                        &params,
                        &mut ids,
                        &mut rng,
                    )
                    .unwrap()
                    .0
                } else {
                    reproduce_asexual(refs[0], &params, &mut ids, &mut rng)
                        .unwrap()
                        .0
                };
                to_parent +=
                    refs.iter().map(|p| trait_distance(&child, p)).sum::<f64>() / refs.len() as f64;
                let others: Vec<usize> = (0..n).filter(|i| !parents.contains(i)).collect();
                let other = others[rng.random_range(0..others.len())];
                to_other += trait_distance(&child, &population[other]);
            }
            prop_assert!(to_parent < to_other, "{} vs {}", to_parent, to_other);
            Ok(())
        },
    )
}

pub fn mutation_reports_each_applied_kind() -> Outcome {
    check(
        (shape(), prop::array::uniform6(any::<bool>()), any::<u64>()),
        |(s, mask, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids = IdSource::new();
            let original = build(&s, &mut ids, &mut rng);
            let mut h = original.clone();
            let params = VariationParams {
                enabled: mask,
                max_parts: 4,
                ..VariationParams::default()
            };
            let outcome = mutate(&mut h, &params, &mut ids, &mut rng).unwrap();

            let before: HashSet<_> = original.nodes().iter().map(|n| n.id).collect();
            let after: HashSet<_> = h.nodes().iter().map(|n| n.id).collect();
            for v in &outcome.variations {
                prop_assert!(mask[v.kind.index()]);
                match v.kind {
                    VariationKind::PartDeletion => prop_assert!(!after.contains(&v.part.unwrap())),
                    VariationKind::PartDuplication => {
                        prop_assert!(!before.contains(&v.part.unwrap()))
                    }
                    _ => prop_assert!(v.part.is_none()),
                }
            }
            // every change to the node set is explained by a reported variation
            let vanished = before.difference(&after).count();
            let appeared = after.difference(&before).count();
            if outcome
                .variations
                .iter()
                .all(|v| v.kind != VariationKind::PartDeletion)
            {
                prop_assert_eq!(vanished, 0);
            }
            if outcome
                .variations
                .iter()
                .all(|v| v.kind != VariationKind::PartDuplication)
            {
                prop_assert_eq!(appeared, 0);
            }
            if outcome.variations.is_empty() {
                prop_assert_eq!(&h, &original);
            }
            prop_assert_eq!(depth(&h), depth(&original));
            prop_assert!(validate(&h).is_empty());
            Ok(())
        },
    )
}

pub fn engine_mutation_events_match_metrics() -> Outcome {
    check(
        (prop::array::uniform6(any::<bool>()), 0u64..1_000_000),
        |(mask, seed)| {
            let (mut config, scenario) = presets::full_featured::<f64>();
            config.capacity = 12;
            config.generations = 6;
            config.seed = seed;
            config.enables = Enables {
                variation: mask,
                ..Enables::all()
            };
            let mut engine = Engine::new(config, Box::new(scenario)).unwrap();
            engine.run_to_end().unwrap();
            let state = engine.state();
            let mut per_generation: BTreeMap<u64, EventCounts> = BTreeMap::new();
            for e in &state.events {
                per_generation.entry(e.generation).or_default().add(&e.kind);
                if let EventKind::Mutation { kind, .. } = e.kind {
                    prop_assert!(mask[kind.index()], "disabled kind {:?} fired", kind);
                }
            }
            for m in &state.metrics {
                let tally = per_generation
                    .get(&m.generation)
                    .copied()
                    .unwrap_or_default();
                prop_assert_eq!(m.counts.mutations, tally.mutations);
            }
            Ok(())
        },
    )
}
