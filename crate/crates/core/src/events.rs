//! Typed, append-only run log.

use serde::{Deserialize, Serialize};

use crate::holon::{HolonId, Origin, VariationKind};
use crate::operators::Cap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub generation: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeathCause {
    /// Generation turnover: the parent generation gives way to its offspring.
    Replaced,
    /// Removed by the uniform cull back down to capacity.
    Culled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum EventKind {
    Birth {
        child: HolonId,
        parents: Vec<HolonId>,
        origin: Origin,
        /// Set when the birth is a part replicating inside a whole.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        within: Option<HolonId>,
    },
    Death {
        id: HolonId,
        cause: DeathCause,
    },
    Fission {
        parent: HolonId,
        fragments: Vec<HolonId>,
    },
    Fusion {
        composite: HolonId,
        inputs: Vec<HolonId>,
    },
    Mutation {
        kind: VariationKind,
        root: HolonId,
        node: HolonId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        part: Option<HolonId>,
    },
    EnforcementSuppression {
        part: HolonId,
        whole: HolonId,
    },
    TransitionDetected {
        start: u64,
        old_depth: usize,
        new_depth: usize,
        window: usize,
    },
    CapHit {
        cap: Cap,
        holon: HolonId,
    },
}

/// Event counts for one generation (or any slice of the log).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub births: u64,
    pub deaths: u64,
    pub fissions: u64,
    pub fusions: u64,
    pub mutations: [u64; 6],
    pub suppressions: u64,
    pub transitions: u64,
    pub cap_hits: u64,
}

impl EventCounts {
    pub fn tally<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut c = EventCounts::default();
        for e in events {
            c.add(&e.kind);
        }
        c
    }

    pub fn add(&mut self, kind: &EventKind) {
        match kind {
            EventKind::Birth { .. } => self.births += 1,
            EventKind::Death { .. } => self.deaths += 1,
            EventKind::Fission { .. } => self.fissions += 1,
            EventKind::Fusion { .. } => self.fusions += 1,
            EventKind::Mutation { kind, .. } => self.mutations[kind.index()] += 1,
            EventKind::EnforcementSuppression { .. } => self.suppressions += 1,
            EventKind::TransitionDetected { .. } => self.transitions += 1,
            EventKind::CapHit { .. } => self.cap_hits += 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_is_flat_and_tagged() {
        let e = Event {
            generation: 3,
            kind: EventKind::Fusion {
                composite: HolonId(9),
                inputs: vec![HolonId(1), HolonId(2)],
            },
        };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(
            s,
            r#"{"generation":3,"type":"Fusion","composite":9,"inputs":[1,2]}"#
        );
        let back: Event = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn tally_counts_mutation_kinds() {
        let m = |kind| Event {
            generation: 1,
            kind: EventKind::Mutation {
                kind,
                root: HolonId(0),
                node: HolonId(0),
                part: None,
            },
        };
        let log = vec![
            m(VariationKind::TraitChange),
            m(VariationKind::TraitChange),
            m(VariationKind::EnforcementMechanism),
        ];
        let c = EventCounts::tally(&log);
        assert_eq!(c.mutations, [2, 0, 0, 0, 0, 1]);
    }
}
