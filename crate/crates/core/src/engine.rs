//! The generational loop.
//!
//! One call to [`Engine::step`] runs a generation in a fixed phase order:
//!
//! 1. within-holon dynamics (parts of each composite root replicate in place
//!    with probability equal to their effective contribution),
//! 2. fitness evaluation,
//! 3. selection of `capacity` parents,
//! 4. reproduction by each parent's heritable mode (the parent generation is
//!    then replaced),
//! 5. stochastic fission of each new child,
//! 6. affinity-weighted fusion, at most `capacity / 8` events,
//! 7. uniform cull to capacity.
//!
//! All randomness comes from the single ChaCha stream in [`EngineState`] and is
//! consumed in that phase order, iterating holons by ascending id. Equal
//! `(config, scenario)` therefore give identical runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{DeathCause, Event, EventKind};
use crate::holon::{
    deep_copy, depth, same_structure, trait_distance, Holon, HolonId, IdSource, IdsExhausted,
    Mechanisms, MutationRates, Origin, ReproMode, VariationKind,
};
use crate::metrics::{detect_transitions, GenerationMetrics};
use crate::operators::{
    check_similar, defection_weight, fission, fuse, reproduce_asexual, reproduce_multiparent,
    sample_indices, select, BlendWeights, Cap, MutationOutcome, OperatorError, SelectionScheme,
    VariationParams,
};
use crate::scalar::Scalar;
use crate::scenarios::Scenario;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Ids(#[from] IdsExhausted),
}

/// Which conditions hold in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Enables {
    pub asexual: bool,
    pub multiparent: bool,
    pub fission: bool,
    pub fusion: bool,
    pub cooperation: bool,
    /// Variation kinds 5A..5F.
    pub variation: [bool; 6],
}

impl Enables {
    pub fn all() -> Self {
        Enables {
            asexual: true,
            multiparent: true,
            fission: true,
            fusion: true,
            cooperation: true,
            variation: [true; 6],
        }
    }

    /// Variation, heredity and selection only: multiparent reproduction with
    /// 5A..5C, nothing that can change the number of levels.
    pub fn brandon() -> Self {
        Enables {
            asexual: false,
            multiparent: true,
            fission: false,
            fusion: false,
            cooperation: false,
            variation: [true, true, true, false, false, false],
        }
    }

    pub fn is_brandon(&self) -> bool {
        *self == Enables::brandon()
    }

    pub fn variation_enabled(&self, kind: VariationKind) -> bool {
        self.variation[kind.index()]
    }
}

impl Default for Enables {
    fn default() -> Self {
        Enables::all()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig<S> {
    pub capacity: usize,
    pub generations: u64,
    pub similarity_threshold: S,
    pub selection: SelectionScheme,
    pub blend: BlendWeights<S>,
    pub enables: Enables,
    pub sigma_trait: S,
    pub sigma_mech: S,
    pub max_depth_cap: usize,
    pub max_parts_cap: usize,
    pub seed: u64,
    pub transition_window: usize,
    pub stop_on_goal: bool,
    /// Mechanisms given to seed holons; `mutation_rates` here are the run's
    /// per-kind variation rates.
    pub initial: Mechanisms<S>,
}

impl<S: Scalar> Default for EngineConfig<S> {
    fn default() -> Self {
        EngineConfig {
            capacity: 50,
            generations: 500,
            similarity_threshold: S::lit(0.5),
            selection: SelectionScheme::FitnessProportional,
            blend: BlendWeights::Uniform,
            enables: Enables::all(),
            sigma_trait: S::lit(0.1),
            sigma_mech: S::lit(0.05),
            max_depth_cap: 16,
            max_parts_cap: 64,
            seed: 0,
            transition_window: 50,
            stop_on_goal: false,
            initial: Mechanisms {
                repro_mode: ReproMode::Asexual,
                n_parents: 2,
                fission_rate: S::lit(0.05),
                fusion_affinity: S::lit(0.5),
                enforcement_strength: S::lit(0.2),
                mutation_rates: default_rates(),
            },
        }
    }
}

/// Per-node variation rates used by the stock configurations.
pub fn default_rates<S: Scalar>() -> MutationRates<S> {
    MutationRates([0.1, 0.01, 0.01, 0.02, 0.05, 0.05].map(S::lit))
}

impl<S: Scalar> EngineConfig<S> {
    pub fn brandon(mut self) -> Self {
        self.enables = Enables::brandon();
        self.initial.repro_mode = ReproMode::Multiparent;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: &str| Err(EngineError::InvalidConfig(msg.to_string()));
        if self.capacity < 2 {
            return bad("capacity must be at least 2");
        }
        if self.max_depth_cap < 1 || self.max_parts_cap < 1 {
            return bad("caps must be at least 1");
        }
        if !(self.similarity_threshold >= S::zero()) {
            return bad("similarity threshold must be nonnegative");
        }
        if self.transition_window < 1 {
            return bad("transition window must be at least 1");
        }
        if let SelectionScheme::Tournament(0) = self.selection {
            return bad("tournament size must be at least 1");
        }
        if !(self.sigma_trait >= S::zero() && self.sigma_mech >= S::zero()) {
            return bad("mutation step sizes must be nonnegative");
        }
        let probe = Holon::leaf(
            HolonId(0),
            crate::holon::TraitVector::new(vec![S::zero()]),
            self.initial.clone(),
        );
        if let Some(v) = crate::holon::validate(&probe).first() {
            return bad(&format!("initial mechanisms out of range: {v:?}"));
        }
        Ok(())
    }

    pub fn variation_params(&self) -> VariationParams<S> {
        VariationParams {
            sigma_trait: self.sigma_trait,
            sigma_mech: self.sigma_mech,
            enabled: self.enables.variation,
            max_parts: self.max_parts_cap,
        }
    }

    pub fn max_fusions_per_generation(&self) -> usize {
        self.capacity / 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed { generation: u64 },
    Extinct { generation: u64 },
    GoalReached { generation: u64 },
}

impl RunStatus {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, RunStatus::Running)
    }
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EngineState<S> {
    pub generation: u64,
    pub population: Vec<Holon<S>>,
    pub rng: ChaCha8Rng,
    pub ids: IdSource,
    pub events: Vec<Event>,
    pub metrics: Vec<GenerationMetrics>,
    pub status: RunStatus,
}

/// Completed run, self-contained for post-hoc audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RunRecord<S> {
    pub scenario: String,
    pub seed: u64,
    pub status: RunStatus,
    pub population: Vec<Holon<S>>,
    pub events: Vec<Event>,
    pub metrics: Vec<GenerationMetrics>,
}

impl<S: Scalar> RunRecord<S> {
    pub fn fitness_variances(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.fitness_variance).collect()
    }

    pub fn modal_depths(&self) -> Vec<usize> {
        self.metrics.iter().map(|m| m.modal_depth).collect()
    }

    pub fn last_metrics(&self) -> Option<&GenerationMetrics> {
        self.metrics.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoSimilarPartner;

/// Uniform sample without replacement of `n_parents - 1` roots that share
/// `h`'s structure and lie within `theta` of it. Returns population indices.
pub fn find_partners<S: Scalar, R: Rng + ?Sized>(
    h: &Holon<S>,
    population: &[Holon<S>],
    theta: S,
    n_parents: usize,
    rng: &mut R,
) -> Result<Vec<usize>, NoSimilarPartner> {
    let needed = n_parents.saturating_sub(1).max(1);
    let candidates: Vec<usize> = population
        .iter()
        .enumerate()
        .filter(|(_, o)| o.id != h.id && same_structure(h, o) && trait_distance(h, o) <= theta)
        .map(|(i, _)| i)
        .collect();
    if candidates.len() < needed {
        return Err(NoSimilarPartner);
    }
    Ok(sample_indices(rng, candidates.len(), needed)
        .into_iter()
        .map(|i| candidates[i])
        .collect())
}

pub struct Engine<S: Scalar> {
    config: EngineConfig<S>,
    scenario: Box<dyn Scenario<S>>,
    state: EngineState<S>,
}

impl<S: Scalar> Engine<S> {
    /// Seeds the population and records generation 0.
    pub fn new(
        config: EngineConfig<S>,
        scenario: Box<dyn Scenario<S>>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut ids = IdSource::new();
        let mut population = scenario.init(&config, &mut ids, &mut rng)?;
        population.sort_by_key(|h| h.id);
        let mut engine = Engine {
            config,
            scenario,
            state: EngineState {
                generation: 0,
                population,
                rng,
                ids,
                events: Vec::new(),
                metrics: Vec::new(),
                status: RunStatus::Running,
            },
        };
        let row = engine.observe(&[]);
        engine.state.metrics.push(row);
        if engine.state.population.is_empty() {
            engine.state.status = RunStatus::Extinct { generation: 0 };
        }
        Ok(engine)
    }

    /// Resumes from a saved state.
    pub fn from_state(
        config: EngineConfig<S>,
        scenario: Box<dyn Scenario<S>>,
        state: EngineState<S>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Engine {
            config,
            scenario,
            state,
        })
    }

    pub fn config(&self) -> &EngineConfig<S> {
        &self.config
    }

    pub fn scenario(&self) -> &dyn Scenario<S> {
        self.scenario.as_ref()
    }

    pub fn state(&self) -> &EngineState<S> {
        &self.state
    }

    pub fn into_state(self) -> EngineState<S> {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.status.is_terminal() || self.state.generation >= self.config.generations
    }

    /// Steps until the configured generation count or a terminal status.
    pub fn run_to_end(&mut self) -> Result<(), EngineError> {
        while !self.is_done() {
            self.step()?;
        }
        if !self.state.status.is_terminal() {
            self.state.status = RunStatus::Completed {
                generation: self.state.generation,
            };
        }
        Ok(())
    }

    /// Steps until `generation` is reached (or the run ends first).
    pub fn run_until(&mut self, generation: u64) -> Result<(), EngineError> {
        while !self.is_done() && self.state.generation < generation {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_record(self) -> RunRecord<S> {
        RunRecord {
            scenario: self.scenario.name().to_string(),
            seed: self.config.seed,
            status: self.state.status,
            population: self.state.population,
            events: self.state.events,
            metrics: self.state.metrics,
        }
    }

    fn observe(&self, step_events: &[Event]) -> GenerationMetrics {
        let env = self
            .scenario
            .environment(&self.state.population, self.state.generation);
        let fitness: Vec<f64> = self
            .state
            .population
            .iter()
            .map(|h| self.scenario.fitness(h, &env).as_f64())
            .collect();
        GenerationMetrics::observe(
            self.state.generation,
            &self.state.population,
            &fitness,
            self.scenario.parasite_frequency(&self.state.population),
            step_events,
        )
    }

    /// Runs one generation. A terminal run is left untouched.
    pub fn step(&mut self) -> Result<RunStatus, EngineError> {
        if self.state.status.is_terminal() {
            return Ok(self.state.status);
        }
        if self.state.population.is_empty() {
            self.state.status = RunStatus::Extinct {
                generation: self.state.generation,
            };
            return Ok(self.state.status);
        }
        let generation = self.state.generation + 1;
        let mut rng = self.state.rng.clone();
        let mut ids = self.state.ids.clone();
        let mut population = self.state.population.clone();
        let mut log = EventLog {
            generation,
            events: Vec::new(),
        };

        if self.config.enables.cooperation {
            self.within_holon_dynamics(&mut population, &mut ids, &mut rng, &mut log)?;
        }

        let env = self
            .scenario
            .environment(&population, self.state.generation);
        let fitness: Vec<S> = population
            .iter()
            .map(|h| self.scenario.fitness(h, &env))
            .collect();

        let mut picks = match select(
            &fitness,
            self.config.capacity,
            self.config.selection,
            &mut rng,
        ) {
            Ok(p) => p,
            Err(OperatorError::AllZeroFitness) => {
                self.state.status = RunStatus::Extinct {
                    generation: self.state.generation,
                };
                return Ok(self.state.status);
            }
            Err(e) => return Err(e.into()),
        };
        picks.sort_unstable();

        let children = self.reproduce(&population, &picks, &mut ids, &mut rng, &mut log)?;
        for h in &population {
            log.push(EventKind::Death {
                id: h.id,
                cause: DeathCause::Replaced,
            });
        }

        let mut next = self.fission_phase(children, &mut rng, &mut log)?;
        self.fusion_phase(&mut next, &mut ids, &mut rng, &mut log)?;
        self.cull(&mut next, &mut rng, &mut log);
        next.sort_by_key(|h| h.id);

        self.state.generation = generation;
        self.state.population = next;
        self.state.rng = rng;
        self.state.ids = ids;
        let row = self.observe(&log.events);
        self.state.metrics.push(row);
        self.state.events.append(&mut log.events);
        self.emit_transitions();

        if self.config.stop_on_goal {
            let env = self
                .scenario
                .environment(&self.state.population, self.state.generation);
            if self.scenario.goal_reached(&self.state.population, &env) {
                self.state.status = RunStatus::GoalReached { generation };
            }
        }
        if !self.state.status.is_terminal() && self.state.population.is_empty() {
            self.state.status = RunStatus::Extinct { generation };
        }
        Ok(self.state.status)
    }

    /// Phase 1. One uniform draw per direct part: below `d(1-e)` the part
    /// replicates in place; between `d(1-e)` and `d` enforcement suppressed it.
    fn within_holon_dynamics(
        &self,
        population: &mut [Holon<S>],
        ids: &mut IdSource,
        rng: &mut ChaCha8Rng,
        log: &mut EventLog,
    ) -> Result<(), EngineError> {
        let di = self.scenario.defection_index();
        for root in population.iter_mut().filter(|h| !h.is_leaf()) {
            let original = root.parts.len();
            for i in 0..original {
                let part = &root.parts[i];
                let d = part.traits.get(di).unit_clamp().as_f64();
                let replicate = defection_weight(part, root, di).as_f64();
                let u: f64 = rng.random();
                if u < replicate {
                    if root.parts.len() >= self.config.max_parts_cap {
                        log.push(EventKind::CapHit {
                            cap: Cap::Parts,
                            holon: root.id,
                        });
                        continue;
                    }
                    let mut copy = deep_copy(part, ids)?;
                    copy.origin = Origin::Asexual;
                    log.push(EventKind::Birth {
                        child: copy.id,
                        parents: vec![part.id],
                        origin: Origin::Asexual,
                        within: Some(root.id),
                    });
                    root.parts.push(copy);
                } else if u < d {
                    log.push(EventKind::EnforcementSuppression {
                        part: part.id,
                        whole: root.id,
                    });
                }
            }
        }
        Ok(())
    }

    /// Phase 4.
    fn reproduce(
        &self,
        population: &[Holon<S>],
        picks: &[usize],
        ids: &mut IdSource,
        rng: &mut ChaCha8Rng,
        log: &mut EventLog,
    ) -> Result<Vec<Holon<S>>, EngineError> {
        let enables = self.config.enables;
        let params = self.config.variation_params();
        let mut children = Vec::with_capacity(picks.len());
        for &i in picks {
            let parent = &population[i];
            let wants_multi = match parent.mechanisms.repro_mode {
                ReproMode::Multiparent => enables.multiparent,
                ReproMode::Asexual => !enables.asexual && enables.multiparent,
            };
            let mut born = None;
            if wants_multi {
                let n = parent.mechanisms.n_parents as usize;
                let threshold = self.config.similarity_threshold;
                if let Ok(partners) = find_partners(parent, population, threshold, n, rng) {
                    let mut group: Vec<&Holon<S>> = vec![parent];
                    group.extend(partners.iter().map(|&j| &population[j]));
                    // partners are near the parent but may be far from each other
                    if check_similar(&group, threshold).is_ok() {
                        born = Some(reproduce_multiparent(
                            &group,
                            &self.config.blend,
                            threshold,
                            &params,
                            ids,
                            rng,
                        )?);
                    }
                }
            }
            if born.is_none() && enables.asexual {
                born = Some(reproduce_asexual(parent, &params, ids, rng)?);
            }
            if let Some((child, outcome)) = born {
                log.push(EventKind::Birth {
                    child: child.id,
                    parents: child.parent_ids.clone(),
                    origin: child.origin,
                    within: None,
                });
                log.mutations(child.id, outcome);
                children.push(child);
            }
        }
        Ok(children)
    }

    /// Phase 5.
    fn fission_phase(
        &self,
        children: Vec<Holon<S>>,
        rng: &mut ChaCha8Rng,
        log: &mut EventLog,
    ) -> Result<Vec<Holon<S>>, EngineError> {
        if !self.config.enables.fission {
            return Ok(children);
        }
        let mut out = Vec::with_capacity(children.len());
        for child in children {
            if child.is_leaf() {
                out.push(child);
                continue;
            }
            let p = child.mechanisms.fission_rate.unit_clamp().as_f64();
            if rng.random_bool(p) {
                let fragments = fission(&child)?;
                log.push(EventKind::Fission {
                    parent: child.id,
                    fragments: fragments.iter().map(|f| f.id).collect(),
                });
                out.extend(fragments);
            } else {
                out.push(child);
            }
        }
        Ok(out)
    }

    /// Phase 6. Each attempt draws an unordered pair with probability
    /// proportional to the product of affinities, then fuses it with
    /// probability equal to that product.
    fn fusion_phase(
        &self,
        population: &mut Vec<Holon<S>>,
        ids: &mut IdSource,
        rng: &mut ChaCha8Rng,
        log: &mut EventLog,
    ) -> Result<(), EngineError> {
        if !self.config.enables.fusion {
            return Ok(());
        }
        population.sort_by_key(|h| h.id);
        for _ in 0..self.config.max_fusions_per_generation() {
            if population.len() < 2 {
                break;
            }
            let affinity: Vec<f64> = population
                .iter()
                .map(|h| h.mechanisms.fusion_affinity.unit_clamp().as_f64())
                .collect();
            let Some((i, j, w)) = draw_pair(&affinity, rng) else {
                break;
            };
            if !rng.random_bool(w.min(1.0)) {
                continue;
            }
            let new_depth = 1 + depth(&population[i]).max(depth(&population[j]));
            if new_depth > self.config.max_depth_cap {
                log.push(EventKind::CapHit {
                    cap: Cap::Depth,
                    holon: population[i].id,
                });
                continue;
            }
            // j > i, so removing j first keeps i valid
            let b = population.remove(j);
            let a = population.remove(i);
            let inputs = vec![a, b];
            let traits = self.scenario.composite_traits(&inputs);
            let input_ids = inputs.iter().map(|h| h.id).collect();
            let composite = fuse(inputs, traits, ids)?;
            log.push(EventKind::Fusion {
                composite: composite.id,
                inputs: input_ids,
            });
            // fresh ids are the largest, so appending keeps id order
            population.push(composite);
        }
        Ok(())
    }

    /// Phase 7.
    fn cull(&self, population: &mut Vec<Holon<S>>, rng: &mut ChaCha8Rng, log: &mut EventLog) {
        let excess = population.len().saturating_sub(self.config.capacity);
        if excess == 0 {
            return;
        }
        population.sort_by_key(|h| h.id);
        let mut doomed = sample_indices(rng, population.len(), excess);
        doomed.sort_unstable_by(|a, b| b.cmp(a));
        let mut removed: Vec<HolonId> = doomed
            .into_iter()
            .map(|i| population.remove(i).id)
            .collect();
        removed.sort();
        for id in removed {
            log.push(EventKind::Death {
                id,
                cause: DeathCause::Culled,
            });
        }
    }

    /// Logs transitions whose persistence window closed this generation.
    fn emit_transitions(&mut self) {
        let w = self.config.transition_window;
        let series: Vec<usize> = self.state.metrics.iter().map(|m| m.modal_depth).collect();
        if series.len() < w {
            return;
        }
        let start = (series.len() - w) as u64;
        for t in detect_transitions(&series, w) {
            if t.generation == start {
                self.state.events.push(Event {
                    generation: self.state.generation,
                    kind: EventKind::TransitionDetected {
                        start: t.generation,
                        old_depth: t.old_depth,
                        new_depth: t.new_depth,
                        window: w,
                    },
                });
            }
        }
    }
}

/// Draws `i < j` with probability proportional to `a[i] * a[j]`; returns the
/// pair and its weight, or `None` when every pair has zero weight.
fn draw_pair<R: Rng + ?Sized>(a: &[f64], rng: &mut R) -> Option<(usize, usize, f64)> {
    let mut total = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            total += a[i] * a[j];
        }
    }
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let w = a[i] * a[j];
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = Some((i, j, w));
            if target < acc {
                return last;
            }
        }
    }
    last
}

struct EventLog {
    generation: u64,
    events: Vec<Event>,
}

impl EventLog {
    fn push(&mut self, kind: EventKind) {
        self.events.push(Event {
            generation: self.generation,
            kind,
        });
    }

    fn mutations(&mut self, root: HolonId, outcome: MutationOutcome) {
        for v in outcome.variations {
            self.push(EventKind::Mutation {
                kind: v.kind,
                root,
                node: v.node,
                part: v.part,
            });
        }
        for holon in outcome.parts_cap_hits {
            self.push(EventKind::CapHit {
                cap: Cap::Parts,
                holon,
            });
        }
    }
}

/// Runs a configured scenario to completion.
pub fn run<S: Scalar>(
    config: EngineConfig<S>,
    scenario: Box<dyn Scenario<S>>,
) -> Result<RunRecord<S>, EngineError> {
    let mut engine = Engine::new(config, scenario)?;
    engine.run_to_end()?;
    Ok(engine.into_record())
}
