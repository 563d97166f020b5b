//! Config files, run artifacts and snapshots.
//!
//! A run directory holds:
//!
//! - `config.toml`: the canonical config the run used, seed included;
//! - `metrics.csv`: one row per generation, columns [`METRICS_COLUMNS`];
//! - `events.jsonl`: one JSON object per event, in log order;
//! - `audit.json`: the [`AuditReport`];
//! - `summary.json`: the [`RunSummary`];
//! - optional `snapshot-<generation>.json` files (see [`Snapshot`]).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Enables, Engine, EngineConfig, EngineState, RunStatus};
use crate::events::{Event, EventCounts, EventKind};
use crate::holon::{Mechanisms, MutationRates, ReproMode, VariationKind};
use crate::metrics::{condition_audit, AuditReport, GenerationMetrics};
use crate::operators::{BlendWeights, SelectionScheme};
use crate::scalar::Scalar;
use crate::scenarios::{
    presets, DivisionOfLabor, DivisionOfLaborParams, FisherMuller, FisherMullerParams, Hypercycle,
    HypercycleParams, Linkage, LinkageParams, Scenario,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config value out of range: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> ArtifactError {
    ArtifactError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// `[scenario]`: the scenario name plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ScenarioSection {
    Hypercycle(HypercycleParams),
    Linkage(LinkageParams),
    DivisionOfLabor(DivisionOfLaborParams),
    FisherMuller(FisherMullerParams),
}

impl ScenarioSection {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSection::Hypercycle(_) => "hypercycle",
            ScenarioSection::Linkage(_) => "linkage",
            ScenarioSection::DivisionOfLabor(_) => "division_of_labor",
            ScenarioSection::FisherMuller(_) => "fisher_muller",
        }
    }

    pub fn build<S: Scalar>(&self) -> Box<dyn Scenario<S>> {
        match self {
            ScenarioSection::Hypercycle(p) => Box::new(Hypercycle::new(p.clone())),
            ScenarioSection::Linkage(p) => Box::new(Linkage::new(p.clone())),
            ScenarioSection::DivisionOfLabor(p) => Box::new(DivisionOfLabor::new(p.clone())),
            ScenarioSection::FisherMuller(p) => Box::new(FisherMuller::new(p.clone())),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let unit = |name: &str, v: f64| check(name, v, (0.0..=1.0).contains(&v));
        let nonneg = |name: &str, v: f64| check(name, v, v >= 0.0 && v.is_finite());
        match self {
            ScenarioSection::Hypercycle(p) => {
                if p.members < 1 {
                    return Err("scenario.members must be at least 1".into());
                }
                unit("scenario.parasite_fraction", p.parasite_fraction)?;
                nonneg("scenario.member_efficiency", p.member_efficiency)?;
                nonneg("scenario.parasite_efficiency", p.parasite_efficiency)?;
                nonneg("scenario.max_efficiency", p.max_efficiency)?;
                unit("scenario.fixation_threshold", p.fixation_threshold)
            }
            ScenarioSection::Linkage(p) => {
                if p.n_proto < 2 {
                    return Err("scenario.n_proto must be at least 2".into());
                }
                unit("scenario.tau", p.tau)
            }
            ScenarioSection::DivisionOfLabor(p) => {
                if p.roles < 1 || p.initial_group_size < 1 {
                    return Err(
                        "scenario.roles and scenario.initial_group_size must be at least 1".into(),
                    );
                }
                nonneg("scenario.alpha", p.alpha)?;
                unit("scenario.initial_defection", p.initial_defection)
            }
            ScenarioSection::FisherMuller(p) => {
                nonneg("scenario.s", p.s)?;
                check("scenario.threshold", p.threshold, p.threshold.is_finite())
            }
        }
    }
}

fn check(name: &str, v: f64, ok: bool) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(format!("{name} = {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    FitnessProportional,
    Tournament,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendKind {
    Uniform,
    Fixed,
    RandomConvex,
    PerCoordinate,
}

/// `[engine]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSection {
    pub capacity: usize,
    pub generations: u64,
    pub seed: u64,
    pub similarity_threshold: f64,
    pub selection: SelectionKind,
    /// Used when `selection = "tournament"`.
    pub tournament_size: usize,
    pub blend: BlendKind,
    /// Used when `blend = "fixed"`.
    pub blend_weights: Vec<f64>,
    pub max_depth_cap: usize,
    pub max_parts_cap: usize,
    pub transition_window: usize,
    pub stop_on_goal: bool,
}

/// `[operators]`: which conditions are enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorsSection {
    pub asexual: bool,
    pub multiparent: bool,
    pub fission: bool,
    pub fusion: bool,
    pub cooperation: bool,
    pub trait_change: bool,
    pub part_deletion: bool,
    pub part_duplication: bool,
    pub repro_mechanism: bool,
    pub fission_fusion_mechanism: bool,
    pub enforcement_mechanism: bool,
}

/// `[rates]`: initial per-node variation rates and step sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub trait_change: f64,
    pub part_deletion: f64,
    pub part_duplication: f64,
    pub repro_mechanism: f64,
    pub fission_fusion_mechanism: f64,
    pub enforcement_mechanism: f64,
    pub sigma_trait: f64,
    pub sigma_mech: f64,
}

/// `[mechanisms]`: initial heritable mechanisms of seed holons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanismsSection {
    pub repro_mode: ReproMode,
    pub n_parents: u32,
    pub fission_rate: f64,
    pub fusion_affinity: f64,
    pub enforcement_strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    MetricsCsv,
    EventsJsonl,
    AuditJson,
}

/// `[output]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Default run directory when none is given on the command line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: None,
            formats: vec![
                OutputFormat::MetricsCsv,
                OutputFormat::EventsJsonl,
                OutputFormat::AuditJson,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub operators: OperatorsSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub mechanisms: MechanismsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl Default for EngineSection {
    fn default() -> Self {
        ConfigFile::sections(&EngineConfig::<f64>::default()).0
    }
}

impl Default for OperatorsSection {
    fn default() -> Self {
        ConfigFile::sections(&EngineConfig::<f64>::default()).1
    }
}

impl Default for RatesSection {
    fn default() -> Self {
        ConfigFile::sections(&EngineConfig::<f64>::default()).2
    }
}

impl Default for MechanismsSection {
    fn default() -> Self {
        ConfigFile::sections(&EngineConfig::<f64>::default()).3
    }
}

/// Names accepted by [`ConfigFile::preset`].
pub const PRESETS: [&str; 8] = [
    "full_featured",
    "brandon",
    "hypercycle_compartments",
    "hypercycle_well_mixed",
    "linkage",
    "division_of_labor",
    "fisher_muller_asexual",
    "fisher_muller_multiparent",
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| {
            ConfigError::Parse(
                e.to_string()
                    .split_whitespace()
                    .collect::<Vec<_>>()
                    .join(" "),
            )
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(Self::parse(&text)?)
    }

    /// Canonical TOML: every key written, in a fixed order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config sections serialize to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let e = &self.engine;
        if e.capacity < 2 {
            return invalid(format!(
                "engine.capacity = {} (must be at least 2)",
                e.capacity
            ));
        }
        if e.generations < 1 {
            return invalid("engine.generations must be at least 1".into());
        }
        if !(e.similarity_threshold >= 0.0) {
            return invalid(format!(
                "engine.similarity_threshold = {}",
                e.similarity_threshold
            ));
        }
        if e.selection == SelectionKind::Tournament && e.tournament_size < 1 {
            return invalid("engine.tournament_size must be at least 1".into());
        }
        if e.blend == BlendKind::Fixed {
            let sum: f64 = e.blend_weights.iter().sum();
            if e.blend_weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
                return invalid("engine.blend_weights must be nonnegative and sum to 1".into());
            }
        }
        if e.max_depth_cap < 1 || e.max_parts_cap < 1 || e.transition_window < 1 {
            return invalid("engine caps and transition_window must be at least 1".into());
        }
        let r = &self.rates;
        for (name, v) in [
            ("trait_change", r.trait_change),
            ("part_deletion", r.part_deletion),
            ("part_duplication", r.part_duplication),
            ("repro_mechanism", r.repro_mechanism),
            ("fission_fusion_mechanism", r.fission_fusion_mechanism),
            ("enforcement_mechanism", r.enforcement_mechanism),
        ] {
            check(&format!("rates.{name}"), v, (0.0..=1.0).contains(&v)).or_else(invalid)?;
        }
        for (name, v) in [("sigma_trait", r.sigma_trait), ("sigma_mech", r.sigma_mech)] {
            check(&format!("rates.{name}"), v, v >= 0.0 && v.is_finite()).or_else(invalid)?;
        }
        let m = &self.mechanisms;
        if m.n_parents < 2 {
            return invalid(format!(
                "mechanisms.n_parents = {} (must be at least 2)",
                m.n_parents
            ));
        }
        for (name, v) in [
            ("fission_rate", m.fission_rate),
            ("fusion_affinity", m.fusion_affinity),
            ("enforcement_strength", m.enforcement_strength),
        ] {
            check(&format!("mechanisms.{name}"), v, (0.0..=1.0).contains(&v)).or_else(invalid)?;
        }
        self.scenario.validate().or_else(invalid)
    }

    fn sections<S: Scalar>(
        c: &EngineConfig<S>,
    ) -> (
        EngineSection,
        OperatorsSection,
        RatesSection,
        MechanismsSection,
    ) {
        let (selection, tournament_size) = match c.selection {
            SelectionScheme::FitnessProportional => (SelectionKind::FitnessProportional, 2),
            SelectionScheme::Tournament(k) => (SelectionKind::Tournament, k),
        };
        let (blend, blend_weights) = match &c.blend {
            BlendWeights::Uniform => (BlendKind::Uniform, Vec::new()),
            BlendWeights::Fixed(w) => (BlendKind::Fixed, w.iter().map(|x| x.as_f64()).collect()),
            BlendWeights::RandomConvex => (BlendKind::RandomConvex, Vec::new()),
            BlendWeights::PerCoordinate => (BlendKind::PerCoordinate, Vec::new()),
        };
        let engine = EngineSection {
            capacity: c.capacity,
            generations: c.generations,
            seed: c.seed,
            similarity_threshold: c.similarity_threshold.as_f64(),
            selection,
            tournament_size,
            blend,
            blend_weights,
            max_depth_cap: c.max_depth_cap,
            max_parts_cap: c.max_parts_cap,
            transition_window: c.transition_window,
            stop_on_goal: c.stop_on_goal,
        };
        let v = |k: VariationKind| c.enables.variation_enabled(k);
        let operators = OperatorsSection {
            asexual: c.enables.asexual,
            multiparent: c.enables.multiparent,
            fission: c.enables.fission,
            fusion: c.enables.fusion,
            cooperation: c.enables.cooperation,
            trait_change: v(VariationKind::TraitChange),
            part_deletion: v(VariationKind::PartDeletion),
            part_duplication: v(VariationKind::PartDuplication),
            repro_mechanism: v(VariationKind::ReproMechanism),
            fission_fusion_mechanism: v(VariationKind::FissionFusionMechanism),
            enforcement_mechanism: v(VariationKind::EnforcementMechanism),
        };
        let rate = |k: VariationKind| c.initial.mutation_rates.get(k).as_f64();
        let rates = RatesSection {
            trait_change: rate(VariationKind::TraitChange),
            part_deletion: rate(VariationKind::PartDeletion),
            part_duplication: rate(VariationKind::PartDuplication),
            repro_mechanism: rate(VariationKind::ReproMechanism),
            fission_fusion_mechanism: rate(VariationKind::FissionFusionMechanism),
            enforcement_mechanism: rate(VariationKind::EnforcementMechanism),
            sigma_trait: c.sigma_trait.as_f64(),
            sigma_mech: c.sigma_mech.as_f64(),
        };
        let mechanisms = MechanismsSection {
            repro_mode: c.initial.repro_mode,
            n_parents: c.initial.n_parents,
            fission_rate: c.initial.fission_rate.as_f64(),
            fusion_affinity: c.initial.fusion_affinity.as_f64(),
            enforcement_strength: c.initial.enforcement_strength.as_f64(),
        };
        (engine, operators, rates, mechanisms)
    }

    pub fn from_engine_config<S: Scalar>(
        config: &EngineConfig<S>,
        scenario: ScenarioSection,
    ) -> Self {
        let (engine, operators, rates, mechanisms) = Self::sections(config);
        ConfigFile {
            scenario,
            engine,
            operators,
            rates,
            mechanisms,
            output: OutputSection::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        fn with<S: Scalar>(c: EngineConfig<S>, s: ScenarioSection) -> ConfigFile {
            ConfigFile::from_engine_config(&c, s)
        }
        Ok(match name {
            "full_featured" => {
                let (c, s) = presets::full_featured::<f64>();
                with(c, ScenarioSection::DivisionOfLabor(s.params))
            }
            "brandon" => {
                let (c, s) = presets::brandon::<f64>();
                with(c, ScenarioSection::DivisionOfLabor(s.params))
            }
            "hypercycle_compartments" => {
                let (c, s) = presets::hypercycle_compartments::<f64>();
                with(c, ScenarioSection::Hypercycle(s.params))
            }
            "hypercycle_well_mixed" => {
                let (c, s) = presets::hypercycle_well_mixed::<f64>();
                with(c, ScenarioSection::Hypercycle(s.params))
            }
            "linkage" => {
                let (c, s) = presets::linkage::<f64>();
                with(c, ScenarioSection::Linkage(s.params))
            }
            "division_of_labor" => {
                let (c, s) = presets::division_of_labor::<f64>();
                with(c, ScenarioSection::DivisionOfLabor(s.params))
            }
            "fisher_muller_asexual" => {
                let (c, s) = presets::fisher_muller_asexual::<f64>();
                with(c, ScenarioSection::FisherMuller(s.params))
            }
            "fisher_muller_multiparent" => {
                let (c, s) = presets::fisher_muller_multiparent::<f64>();
                with(c, ScenarioSection::FisherMuller(s.params))
            }
            other => return Err(ConfigError::UnknownPreset(other.to_string())),
        })
    }

    pub fn engine_config<S: Scalar>(&self) -> EngineConfig<S> {
        let e = &self.engine;
        let o = &self.operators;
        let r = &self.rates;
        let m = &self.mechanisms;
        EngineConfig {
            capacity: e.capacity,
            generations: e.generations,
            similarity_threshold: S::lit(e.similarity_threshold),
            selection: match e.selection {
                SelectionKind::FitnessProportional => SelectionScheme::FitnessProportional,
                SelectionKind::Tournament => SelectionScheme::Tournament(e.tournament_size),
            },
            blend: match e.blend {
                BlendKind::Uniform => BlendWeights::Uniform,
                BlendKind::Fixed => {
                    BlendWeights::Fixed(e.blend_weights.iter().map(|&w| S::lit(w)).collect())
                }
                BlendKind::RandomConvex => BlendWeights::RandomConvex,
                BlendKind::PerCoordinate => BlendWeights::PerCoordinate,
            },
            enables: Enables {
                asexual: o.asexual,
                multiparent: o.multiparent,
                fission: o.fission,
                fusion: o.fusion,
                cooperation: o.cooperation,
                variation: [
                    o.trait_change,
                    o.part_deletion,
                    o.part_duplication,
                    o.repro_mechanism,
                    o.fission_fusion_mechanism,
                    o.enforcement_mechanism,
                ],
            },
            sigma_trait: S::lit(r.sigma_trait),
            sigma_mech: S::lit(r.sigma_mech),
            max_depth_cap: e.max_depth_cap,
            max_parts_cap: e.max_parts_cap,
            seed: e.seed,
            transition_window: e.transition_window,
            stop_on_goal: e.stop_on_goal,
            initial: Mechanisms {
                repro_mode: m.repro_mode,
                n_parents: m.n_parents,
                fission_rate: S::lit(m.fission_rate),
                fusion_affinity: S::lit(m.fusion_affinity),
                enforcement_strength: S::lit(m.enforcement_strength),
                mutation_rates: MutationRates(
                    [
                        r.trait_change,
                        r.part_deletion,
                        r.part_duplication,
                        r.repro_mechanism,
                        r.fission_fusion_mechanism,
                        r.enforcement_mechanism,
                    ]
                    .map(S::lit),
                ),
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.engine.seed = seed;
        self
    }

    pub fn engine<S: Scalar>(&self) -> Result<Engine<S>, crate::engine::EngineError> {
        Engine::new(self.engine_config(), self.scenario.build())
    }

    pub fn writes(&self, format: OutputFormat) -> bool {
        self.output.formats.contains(&format)
    }
}

/// Columns of `metrics.csv`. The trailing columns count this generation's
/// events by type.
pub const METRICS_COLUMNS: [&str; 23] = [
    "generation",
    "pop_size",
    "max_depth",
    "modal_depth",
    "mean_depth",
    "mean_fitness",
    "fitness_variance",
    "diversity",
    "parasite_freq",
    "mean_enforcement",
    "births",
    "deaths",
    "fissions",
    "fusions",
    "mutations_5a",
    "mutations_5b",
    "mutations_5c",
    "mutations_5d",
    "mutations_5e",
    "mutations_5f",
    "suppressions",
    "transitions",
    "cap_hits",
];

pub fn metrics_csv_schema() -> &'static [&'static str] {
    &METRICS_COLUMNS
}

fn metrics_row(m: &GenerationMetrics) -> Vec<String> {
    let c = &m.counts;
    let mut row = vec![
        m.generation.to_string(),
        m.pop_size.to_string(),
        m.max_depth.to_string(),
        m.modal_depth.to_string(),
        m.mean_depth.to_string(),
        m.mean_fitness.to_string(),
        m.fitness_variance.to_string(),
        m.diversity.to_string(),
        m.parasite_freq.map(|p| p.to_string()).unwrap_or_default(),
        m.mean_enforcement.to_string(),
        c.births.to_string(),
        c.deaths.to_string(),
        c.fissions.to_string(),
        c.fusions.to_string(),
    ];
    row.extend(c.mutations.iter().map(u64::to_string));
    row.extend([
        c.suppressions.to_string(),
        c.transitions.to_string(),
        c.cap_hits.to_string(),
    ]);
    row
}

pub fn write_metrics_csv<W: Write>(out: W, metrics: &[GenerationMetrics]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for m in metrics {
        w.write_record(metrics_row(m))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<GenerationMetrics>, ArtifactError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format_err(path, e))?;
    let header = r.headers().map_err(|e| format_err(path, e))?;
    if header.iter().ne(METRICS_COLUMNS) {
        return Err(format_err(path, "unexpected metrics.csv header"));
    }
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| format_err(path, e))?;
        let bad = |col: &str| format_err(path, format!("row {}: bad {col}", line + 1));
        let field = |i: usize| record.get(i).unwrap_or("");
        macro_rules! num {
            ($i:expr) => {
                field($i).parse().map_err(|_| bad(METRICS_COLUMNS[$i]))?
            };
        }
        let parasite = field(8);
        let mut counts = EventCounts {
            births: num!(10),
            deaths: num!(11),
            fissions: num!(12),
            fusions: num!(13),
            ..EventCounts::default()
        };
        for k in 0..6 {
            counts.mutations[k] = num!(14 + k);
        }
        counts.suppressions = num!(20);
        counts.transitions = num!(21);
        counts.cap_hits = num!(22);
        out.push(GenerationMetrics {
            generation: num!(0),
            pop_size: num!(1),
            max_depth: num!(2),
            modal_depth: num!(3),
            mean_depth: num!(4),
            mean_fitness: num!(5),
            fitness_variance: num!(6),
            diversity: num!(7),
            parasite_freq: if parasite.is_empty() {
                None
            } else {
                Some(parasite.parse().map_err(|_| bad("parasite_freq"))?)
            },
            mean_enforcement: num!(9),
            counts,
        });
    }
    Ok(out)
}

pub fn write_events_jsonl<W: Write>(mut out: W, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_events_jsonl(path: &Path) -> Result<Vec<Event>, ArtifactError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| format_err(path, format!("line {}: {e}", i + 1)))?;
        out.push(event);
    }
    Ok(out)
}

/// End-of-run digest used by replicate reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub status: RunStatus,
    pub generations_run: u64,
    pub enables: Enables,
    /// Generation the scenario goal was first met, if it was.
    pub goal_generation: Option<u64>,
    pub initial_mean_enforcement: f64,
    pub final_mean_enforcement: f64,
    pub initial_modal_depth: usize,
    pub final_modal_depth: usize,
    pub max_depth_range: (usize, usize),
    pub peak_parasite_freq: Option<f64>,
    /// Peak parasite frequency reached the scenario's fixation threshold.
    pub parasite_fixed: Option<bool>,
    /// `(start generation, old depth, new depth)` of each detected transition.
    pub transitions: Vec<(u64, usize, usize)>,
    pub conditions_exercised: BTreeMap<String, bool>,
    /// Scenario observables of the final population.
    pub observables: BTreeMap<String, f64>,
}

impl RunSummary {
    pub fn from_engine<S: Scalar>(engine: &Engine<S>, scenario: &ScenarioSection) -> Self {
        let state = engine.state();
        let metrics = &state.metrics;
        let first = metrics.first();
        let last = metrics.last();
        let fitness_variances: Vec<f64> = metrics.iter().map(|m| m.fitness_variance).collect();
        let audit = condition_audit(&state.events, &fitness_variances);
        let peak = metrics
            .iter()
            .filter_map(|m| m.parasite_freq)
            .fold(None, |acc: Option<f64>, p| {
                Some(acc.map_or(p, |a| a.max(p)))
            });
        let parasite_fixed = match scenario {
            ScenarioSection::Hypercycle(p) => Some(peak.unwrap_or(0.0) >= p.fixation_threshold),
            _ => None,
        };
        let depths = metrics.iter().map(|m| m.max_depth);
        RunSummary {
            scenario: scenario.name().to_string(),
            seed: engine.config().seed,
            status: state.status,
            generations_run: state.generation,
            enables: engine.config().enables,
            goal_generation: match state.status {
                RunStatus::GoalReached { generation } => Some(generation),
                _ => None,
            },
            initial_mean_enforcement: first.map_or(0.0, |m| m.mean_enforcement),
            final_mean_enforcement: last.map_or(0.0, |m| m.mean_enforcement),
            initial_modal_depth: first.map_or(0, |m| m.modal_depth),
            final_modal_depth: last.map_or(0, |m| m.modal_depth),
            max_depth_range: (depths.clone().min().unwrap_or(0), depths.max().unwrap_or(0)),
            peak_parasite_freq: peak,
            parasite_fixed,
            transitions: state
                .events
                .iter()
                .filter_map(|e| match e.kind {
                    EventKind::TransitionDetected {
                        start,
                        old_depth,
                        new_depth,
                        ..
                    } => Some((start, old_depth, new_depth)),
                    _ => None,
                })
                .collect(),
            conditions_exercised: audit
                .exercised()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            observables: engine.scenario().observables(&state.population),
        }
    }
}

const SNAPSHOT_MAGIC: &str = "holon-evo-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Everything needed to resume a run: its config and engine state.
///
/// On disk: a header line `holon-evo-snapshot <version>`, then one JSON
/// document. Floats are written in shortest round-trip form, so restoring
/// reproduces the state bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Snapshot<S> {
    pub config: ConfigFile,
    pub state: EngineState<S>,
}

impl<S: Scalar> Snapshot<S> {
    pub fn capture(config: &ConfigFile, engine: &Engine<S>) -> Self {
        Snapshot {
            config: config.clone(),
            state: engine.state().clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let body = serde_json::to_string(self).expect("snapshot serializes");
        format!("{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}\n{body}\n")
    }

    pub fn from_text(text: &str) -> Result<Self, String> {
        let (header, body) = text.split_once('\n').ok_or("missing snapshot header")?;
        let version = header
            .strip_prefix(SNAPSHOT_MAGIC)
            .map(str::trim)
            .ok_or("not a holon-evo snapshot")?;
        if version != SNAPSHOT_VERSION.to_string() {
            return Err(format!("unsupported snapshot version {version}"));
        }
        let snap: Snapshot<S> = serde_json::from_str(body).map_err(|e| e.to_string())?;
        snap.config.validate().map_err(|e| e.to_string())?;
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        fs::write(path, self.to_text()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_text(&text).map_err(|m| format_err(path, m))
    }

    pub fn resume(self) -> Result<Engine<S>, crate::engine::EngineError> {
        Engine::from_state(
            self.config.engine_config(),
            self.config.scenario.build(),
            self.state,
        )
    }
}

pub fn snapshot_file_name(generation: u64) -> String {
    format!("snapshot-{generation}.json")
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), ArtifactError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

/// Writes `config.toml`, `summary.json` and the configured artifact formats.
pub fn write_run<S: Scalar>(
    dir: &Path,
    config: &ConfigFile,
    engine: &Engine<S>,
) -> Result<RunSummary, ArtifactError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let state = engine.state();
    let config = config.clone().with_seed(engine.config().seed);
    let path = dir.join("config.toml");
    fs::write(&path, config.to_toml()).map_err(io_err(&path))?;
    if config.writes(OutputFormat::MetricsCsv) {
        let path = dir.join("metrics.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        write_metrics_csv(BufWriter::new(file), &state.metrics)
            .map_err(|e| format_err(&path, e))?;
    }
    if config.writes(OutputFormat::EventsJsonl) {
        write_file(&dir.join("events.jsonl"), |w| {
            write_events_jsonl(w, &state.events)
        })?;
    }
    if config.writes(OutputFormat::AuditJson) {
        write_json(&dir.join("audit.json"), &audit_state(state))?;
    }
    let summary = RunSummary::from_engine(engine, &config.scenario);
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn audit_state<S>(state: &EngineState<S>) -> AuditReport {
    let variances: Vec<f64> = state.metrics.iter().map(|m| m.fitness_variance).collect();
    condition_audit(&state.events, &variances)
}

/// Recomputes the audit of a finished run directory from its event log and
/// metrics, and records whether the run used the Brandon subset.
pub fn audit_run_dir(dir: &Path) -> Result<AuditReport, ArtifactError> {
    let events = read_events_jsonl(&dir.join("events.jsonl"))?;
    let metrics = read_metrics_csv(&dir.join("metrics.csv"))?;
    let variances: Vec<f64> = metrics.iter().map(|m| m.fitness_variance).collect();
    let mut report = condition_audit(&events, &variances);
    let config = ConfigFile::load(&dir.join("config.toml"))?;
    report.brandon_subset_only = config.engine_config::<f64>().enables.is_brandon();
    Ok(report)
}

pub fn write_audit(dir: &Path, report: &AuditReport) -> Result<(), ArtifactError> {
    write_json(&dir.join("audit.json"), report)
}

pub fn read_summary(dir: &Path) -> Result<RunSummary, ArtifactError> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| format_err(&path, e))
}
