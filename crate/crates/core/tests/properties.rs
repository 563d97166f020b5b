//! Operator and engine laws, at least 1000 random cases each.

mod support;

use holon_evo::holon::validate;
use holon_evo::scenarios::presets;
use support::laws;

#[test]
fn fusion_depth_law() {
    laws::fusion_depth_law().unwrap();
}

#[test]
fn fission_undoes_fusion() {
    laws::fission_undoes_fusion().unwrap();
}

#[test]
fn multiparent_child_stays_in_parent_hull() {
    laws::multiparent_child_stays_in_parent_hull().unwrap();
}

#[test]
fn proportional_selection_matches_exact_probabilities() {
    laws::proportional_selection_matches_exact_probabilities().unwrap();
}

#[test]
fn tournament_selection_matches_exact_probabilities() {
    laws::tournament_selection_matches_exact_probabilities().unwrap();
}

#[test]
fn selection_ignores_fitness_scale() {
    laws::selection_ignores_fitness_scale().unwrap();
}

#[test]
fn offspring_resemble_their_parents() {
    laws::offspring_resemble_their_parents().unwrap();
}

#[test]
fn mutation_reports_each_applied_kind() {
    laws::mutation_reports_each_applied_kind().unwrap();
}

#[test]
fn engine_mutation_events_match_metrics() {
    laws::engine_mutation_events_match_metrics().unwrap();
}

#[test]
fn single_precision_engine_runs() {
    let (config, scenario) = presets::full_featured::<f32>();
    let mut config = config;
    config.generations = 30;
    let mut engine = holon_evo::EngineF32::new(config, Box::new(scenario)).unwrap();
    engine.run_to_end().unwrap();
    assert_eq!(engine.state().generation, 30);
    assert!(engine
        .state()
        .population
        .iter()
        .all(|h| validate(h).is_empty()));
}
