//! Per-generation observables, the condition audit, and level-transition
//! detection.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::events::{DeathCause, Event, EventCounts, EventKind};
use crate::holon::{depth, same_structure, trait_distance, Holon, HolonId, Origin};
use crate::scalar::Scalar;
use crate::scenarios::mean_enforcement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetrics {
    pub generation: u64,
    pub pop_size: usize,
    pub max_depth: usize,
    pub modal_depth: usize,
    pub mean_depth: f64,
    pub mean_fitness: f64,
    pub fitness_variance: f64,
    pub diversity: f64,
    pub parasite_freq: Option<f64>,
    pub mean_enforcement: f64,
    pub counts: EventCounts,
}

impl GenerationMetrics {
    pub fn observe<S: Scalar>(
        generation: u64,
        population: &[Holon<S>],
        fitness: &[f64],
        parasite_freq: Option<f64>,
        step_events: &[Event],
    ) -> Self {
        let depths: Vec<usize> = population.iter().map(depth).collect();
        let (mean_fitness, fitness_variance) = mean_variance(fitness);
        GenerationMetrics {
            generation,
            pop_size: population.len(),
            max_depth: depths.iter().copied().max().unwrap_or(0),
            modal_depth: modal(&depths),
            mean_depth: mean_variance(&depths.iter().map(|&d| d as f64).collect::<Vec<_>>()).0,
            mean_fitness,
            fitness_variance,
            diversity: diversity(population),
            parasite_freq,
            mean_enforcement: mean_enforcement(population),
            counts: EventCounts::tally(step_events),
        }
    }
}

/// Population mean and (biased) variance; zeros for an empty slice.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Most common value, the smaller one on ties; 0 for an empty slice.
pub fn modal(depths: &[usize]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in depths {
        *counts.entry(d).or_insert(0) += 1;
    }
    let mut best = (0, 0);
    for (d, c) in counts {
        if c > best.1 {
            best = (d, c);
        }
    }
    best.0
}

pub fn modal_depth<S>(population: &[Holon<S>]) -> usize {
    modal(&population.iter().map(depth).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiversityStats {
    pub mean: f64,
    pub compared_pairs: usize,
    pub mismatched_pairs: usize,
}

/// Mean pairwise root trait distance over equal-structure pairs.
pub fn diversity_stats<S: Scalar>(population: &[Holon<S>]) -> DiversityStats {
    let mut sum = 0.0;
    let mut stats = DiversityStats::default();
    for (i, a) in population.iter().enumerate() {
        for b in &population[i + 1..] {
            if same_structure(a, b) {
                sum += trait_distance(a, b).as_f64();
                stats.compared_pairs += 1;
            } else {
                stats.mismatched_pairs += 1;
            }
        }
    }
    if stats.compared_pairs > 0 {
        stats.mean = sum / stats.compared_pairs as f64;
    }
    stats
}

pub fn diversity<S: Scalar>(population: &[Holon<S>]) -> f64 {
    diversity_stats(population).mean
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionEvent {
    /// First generation of the persistence window.
    pub generation: u64,
    pub old_depth: usize,
    pub new_depth: usize,
    pub window: usize,
}

/// Sustained increases of modal depth.
///
/// The established level starts at `series[0]`. A transition starts at `g`
/// when `series[g]` exceeds the established level and every value in
/// `[g, g + window)` stays at or above `series[g]`; the level then becomes
/// `series[g]`. Windows running past the end of the series are not judged.
pub fn detect_transitions(series: &[usize], window: usize) -> Vec<TransitionEvent> {
    let mut out = Vec::new();
    let Some(&first) = series.first() else {
        return out;
    };
    if window == 0 {
        return out;
    }
    let mut level = first;
    for g in 1..series.len() {
        if g + window > series.len() {
            break;
        }
        let candidate = series[g];
        if candidate > level && series[g..g + window].iter().all(|&d| d >= candidate) {
            out.push(TransitionEvent {
                generation: g as u64,
                old_depth: level,
                new_depth: candidate,
                window,
            });
            level = candidate;
        }
    }
    out
}

/// Which conditions a run actually exercised, counted from its event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    /// 1A: root births from a single parent.
    pub asexual_births: u64,
    /// 1B: root births from several parents.
    pub multiparent_births: u64,
    /// 2A
    pub fissions: u64,
    /// 2B
    pub fusions: u64,
    /// 3: generations with nonzero fitness variance.
    pub fitness_variance_generations: u64,
    /// Generations where realized offspring counts varied among parents.
    pub offspring_variance_generations: u64,
    /// 4
    pub enforcement_suppressions: u64,
    /// 5A..5F, keyed by condition code.
    pub mutations: BTreeMap<String, u64>,
    /// 5G: fusion composites that later reproduced.
    pub heritable_fusions: u64,
    /// 5H: fission fragments that later reproduced.
    pub heritable_fissions: u64,
    pub fission_fragments: u64,
    pub internal_births: u64,
    pub brandon_subset_only: bool,
}

pub const CONDITIONS: [&str; 14] = [
    "1A", "1B", "2A", "2B", "3", "4", "5A", "5B", "5C", "5D", "5E", "5F", "5G", "5H",
];

impl AuditReport {
    pub fn count(&self, condition: &str) -> u64 {
        match condition {
            "1A" => self.asexual_births,
            "1B" => self.multiparent_births,
            "2A" => self.fissions,
            "2B" => self.fusions,
            "3" => self.fitness_variance_generations,
            "4" => self.enforcement_suppressions,
            "5G" => self.heritable_fusions,
            "5H" => self.heritable_fissions,
            code => self.mutations.get(code).copied().unwrap_or(0),
        }
    }

    /// Condition code → exercised, for all fourteen audited conditions.
    pub fn exercised(&self) -> BTreeMap<&'static str, bool> {
        CONDITIONS.iter().map(|&c| (c, self.count(c) > 0)).collect()
    }

    pub fn all_exercised(&self) -> bool {
        self.exercised().values().all(|&b| b)
    }
}

/// Counts each condition from the log. 5G and 5H join fusion composites and
/// fission fragments with later root births naming them as a parent.
pub fn condition_audit(events: &[Event], fitness_variances: &[f64]) -> AuditReport {
    let mut report = AuditReport {
        asexual_births: 0,
        multiparent_births: 0,
        fissions: 0,
        fusions: 0,
        fitness_variance_generations: fitness_variances.iter().filter(|&&v| v > 0.0).count() as u64,
        offspring_variance_generations: 0,
        enforcement_suppressions: 0,
        mutations: crate::holon::VariationKind::ALL
            .iter()
            .map(|k| (k.code().to_string(), 0))
            .collect(),
        heritable_fusions: 0,
        heritable_fissions: 0,
        fission_fragments: 0,
        internal_births: 0,
        brandon_subset_only: false,
    };

    let mut composites: HashSet<HolonId> = HashSet::new();
    let mut fragments: HashSet<HolonId> = HashSet::new();
    let mut reproduced_composites: HashSet<HolonId> = HashSet::new();
    let mut reproduced_fragments: HashSet<HolonId> = HashSet::new();
    // generation -> (parent generation roots, offspring per parent)
    let mut offspring: BTreeMap<u64, (Vec<HolonId>, HashMap<HolonId, u64>)> = BTreeMap::new();

    for e in events {
        match &e.kind {
            EventKind::Birth {
                parents,
                origin,
                within,
                ..
            } => {
                if within.is_some() {
                    report.internal_births += 1;
                    continue;
                }
                match origin {
                    Origin::Multiparent => report.multiparent_births += 1,
                    _ => report.asexual_births += 1,
                }
                let counts = &mut offspring.entry(e.generation).or_default().1;
                for p in parents {
                    *counts.entry(*p).or_insert(0) += 1;
                    if composites.contains(p) {
                        reproduced_composites.insert(*p);
                    }
                    if fragments.contains(p) {
                        reproduced_fragments.insert(*p);
                    }
                }
            }
            EventKind::Death {
                id,
                cause: DeathCause::Replaced,
            } => offspring.entry(e.generation).or_default().0.push(*id),
            EventKind::Fission { fragments: f, .. } => {
                report.fissions += 1;
                report.fission_fragments += f.len() as u64;
                fragments.extend(f.iter().copied());
            }
            EventKind::Fusion { composite, .. } => {
                report.fusions += 1;
                composites.insert(*composite);
            }
            EventKind::Mutation { kind, .. } => {
                *report.mutations.entry(kind.code().to_string()).or_insert(0) += 1;
            }
            EventKind::EnforcementSuppression { .. } => report.enforcement_suppressions += 1,
            _ => {}
        }
    }
    report.heritable_fusions = reproduced_composites.len() as u64;
    report.heritable_fissions = reproduced_fragments.len() as u64;
    report.offspring_variance_generations = offspring
        .values()
        .filter(|(roots, counts)| {
            let xs: Vec<f64> = roots
                .iter()
                .map(|id| counts.get(id).copied().unwrap_or(0) as f64)
                .collect();
            mean_variance(&xs).1 > 0.0
        })
        .count() as u64;
    report.brandon_subset_only = report.asexual_births == 0
        && report.fissions == 0
        && report.fusions == 0
        && report.enforcement_suppressions == 0
        && report.internal_births == 0
        && ["5D", "5E", "5F"].iter().all(|c| report.count(c) == 0);
    report
}
