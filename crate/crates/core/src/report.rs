//! Replicate-level verdicts for the scenario experiments.
//!
//! Every verdict is computed from [`RunSummary`] values, so the same code
//! judges in-memory replicates and run directories read back from disk.

use serde::{Deserialize, Serialize};

use crate::engine::Enables;
use crate::io::RunSummary;
use crate::stats::{
    median, paired_t_greater, two_proportion_greater, wilcoxon_signed_rank_greater,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    /// Test statistic or observed proportion.
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub detail: String,
}

impl Verdict {
    /// `name: PASS|FAIL (detail)`
    pub fn line(&self) -> String {
        format!(
            "{}: {} ({})",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

/// A set of replicate runs under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDigest {
    pub label: String,
    pub scenario: String,
    pub runs: usize,
    pub extinct: usize,
    pub goal_reached: usize,
    pub runs_with_transition: usize,
    pub all_conditions_exercised: usize,
    pub median_generations_run: f64,
    pub median_final_enforcement: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parasite_fixed: Option<usize>,
}

fn fraction(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

pub fn digest(arm: &Arm) -> ArmDigest {
    let runs = &arm.runs;
    let gens: Vec<f64> = runs.iter().map(|r| r.generations_run as f64).collect();
    let enf: Vec<f64> = runs.iter().map(|r| r.final_mean_enforcement).collect();
    let fixed: Vec<bool> = runs.iter().filter_map(|r| r.parasite_fixed).collect();
    ArmDigest {
        label: arm.label.clone(),
        scenario: runs.first().map(|r| r.scenario.clone()).unwrap_or_default(),
        runs: runs.len(),
        extinct: runs
            .iter()
            .filter(|r| matches!(r.status, crate::engine::RunStatus::Extinct { .. }))
            .count(),
        goal_reached: runs.iter().filter(|r| r.goal_generation.is_some()).count(),
        runs_with_transition: runs.iter().filter(|r| !r.transitions.is_empty()).count(),
        all_conditions_exercised: runs
            .iter()
            .filter(|r| r.conditions_exercised.values().all(|&b| b))
            .count(),
        median_generations_run: median(&gens).unwrap_or(0.0),
        median_final_enforcement: median(&enf).unwrap_or(0.0),
        parasite_fixed: (!fixed.is_empty()).then(|| fixed.iter().filter(|&&b| b).count()),
    }
}

/// Brandon mode: max depth constant and no transition in every run.
pub fn depth_invariance(runs: &[RunSummary]) -> Verdict {
    let held = runs
        .iter()
        .filter(|r| r.max_depth_range.0 == r.max_depth_range.1 && r.transitions.is_empty())
        .count();
    Verdict {
        name: "depth invariance".into(),
        pass: !runs.is_empty() && held == runs.len(),
        statistic: fraction(held, runs.len()),
        p_value: None,
        detail: format!(
            "{held}/{} runs with constant max depth and no transition",
            runs.len()
        ),
    }
}

/// Every audited condition exercised in at least `min_fraction` of runs.
pub fn realizability(runs: &[RunSummary], min_fraction: f64) -> Verdict {
    let ok = runs
        .iter()
        .filter(|r| r.conditions_exercised.values().all(|&b| b))
        .count();
    let p = fraction(ok, runs.len());
    let mut missing: Vec<String> = runs
        .iter()
        .flat_map(|r| {
            r.conditions_exercised
                .iter()
                .filter(|(_, &b)| !b)
                .map(|(k, _)| k.clone())
        })
        .collect();
    missing.sort();
    missing.dedup();
    Verdict {
        name: "condition realizability".into(),
        pass: p >= min_fraction,
        statistic: p,
        p_value: None,
        detail: format!(
            "{ok}/{} runs exercised every condition (need {:.0}%); ever missing: [{}]",
            runs.len(),
            min_fraction * 100.0,
            missing.join(", ")
        ),
    }
}

/// Parasite fixation lower in `treatment` than in `control` (one-sided
/// pooled two-proportion test).
pub fn parasite_fixation(treatment: &[RunSummary], control: &[RunSummary], alpha: f64) -> Verdict {
    let fixed = |runs: &[RunSummary]| {
        runs.iter()
            .filter(|r| r.parasite_fixed == Some(true))
            .count()
    };
    let (t, c) = (fixed(treatment), fixed(control));
    let (nt, nc) = (treatment.len(), control.len());
    let test = two_proportion_greater(c, nc, t, nt);
    let (statistic, p) = test.map_or((0.0, 1.0), |r| (r.statistic, r.p_value));
    Verdict {
        name: "parasite fixation lower with compartments".into(),
        pass: p < alpha && fraction(t, nt) < fraction(c, nc),
        statistic,
        p_value: Some(p),
        detail: format!("fixed {t}/{nt} with compartments vs {c}/{nc} well-mixed, z = {statistic:.3}, p = {p:.3e}"),
    }
}

/// At least `min_fraction` of runs detect a modal-depth transition from
/// `from` to `to`.
pub fn transitions(runs: &[RunSummary], from: usize, to: usize, min_fraction: f64) -> Verdict {
    let hit = runs
        .iter()
        .filter(|r| r.transitions.iter().any(|&(_, a, b)| a == from && b == to))
        .count();
    let p = fraction(hit, runs.len());
    Verdict {
        name: format!("modal depth transition {from}->{to}"),
        pass: p >= min_fraction,
        statistic: p,
        p_value: None,
        detail: format!(
            "{hit}/{} runs (need {:.0}%)",
            runs.len(),
            min_fraction * 100.0
        ),
    }
}

/// Scenario observable `key` strictly above `level` in at least
/// `min_fraction` of runs.
pub fn observable_majority(
    runs: &[RunSummary],
    key: &str,
    level: f64,
    min_fraction: f64,
) -> Verdict {
    let hit = runs
        .iter()
        .filter(|r| r.observables.get(key).is_some_and(|&v| v > level))
        .count();
    let p = fraction(hit, runs.len());
    Verdict {
        name: format!("{key} > {level}"),
        pass: p >= min_fraction,
        statistic: p,
        p_value: None,
        detail: format!(
            "{hit}/{} runs (need {:.0}%)",
            runs.len(),
            min_fraction * 100.0
        ),
    }
}

/// Mean enforcement higher at the end than at the start (paired one-sided
/// t-test).
pub fn enforcement_ratchet(runs: &[RunSummary], alpha: f64) -> Verdict {
    let end: Vec<f64> = runs.iter().map(|r| r.final_mean_enforcement).collect();
    let start: Vec<f64> = runs.iter().map(|r| r.initial_mean_enforcement).collect();
    let (statistic, p) =
        paired_t_greater(&end, &start).map_or((0.0, 1.0), |r| (r.statistic, r.p_value));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    Verdict {
        name: "enforcement rises".into(),
        pass: p < alpha,
        statistic,
        p_value: Some(p),
        detail: format!(
            "mean enforcement {:.3} -> {:.3} over {} runs, t = {statistic:.3}, p = {p:.3e}",
            mean(&start),
            mean(&end),
            runs.len()
        ),
    }
}

/// Generations until the goal, or the generations run when it was never met.
pub fn time_to_goal(run: &RunSummary) -> f64 {
    run.goal_generation.unwrap_or(run.generations_run) as f64
}

/// Shorter time-to-goal under `fast` than under `slow`, paired by seed:
/// one-sided Wilcoxon signed-rank test plus a lower median.
pub fn faster_goal(fast: &[RunSummary], slow: &[RunSummary], alpha: f64) -> Verdict {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for f in fast {
        if let Some(s) = slow.iter().find(|s| s.seed == f.seed) {
            pairs.push((time_to_goal(s), time_to_goal(f)));
        }
    }
    let slow_t: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let fast_t: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (statistic, p) = wilcoxon_signed_rank_greater(&slow_t, &fast_t)
        .map_or((0.0, 1.0), |r| (r.statistic, r.p_value));
    let (mf, ms) = (
        median(&fast_t).unwrap_or(0.0),
        median(&slow_t).unwrap_or(0.0),
    );
    Verdict {
        name: "multiparent combines alleles faster".into(),
        pass: !pairs.is_empty() && p < alpha && mf < ms,
        statistic,
        p_value: Some(p),
        detail: format!(
            "median generations {mf} multiparent vs {ms} asexual over {} paired seeds, W+ = {statistic}, p = {p:.3e}",
            pairs.len()
        ),
    }
}

fn is_multiparent_only(e: &Enables) -> bool {
    e.multiparent && !e.asexual
}

/// All verdicts that apply to the given arms, judged by scenario and the
/// conditions each arm enabled.
pub fn verdicts(arms: &[Arm], alpha: f64) -> Vec<Verdict> {
    let mut out = Vec::new();
    for arm in arms {
        let Some(first) = arm.runs.first() else {
            continue;
        };
        if first.enables.is_brandon() {
            out.push(depth_invariance(&arm.runs));
        } else if first.enables == Enables::all() {
            out.push(realizability(&arm.runs, 0.95));
        }
        match first.scenario.as_str() {
            "linkage" => out.push(observable_majority(&arm.runs, "linked_freq", 0.5, 0.7)),
            "division_of_labor" if first.enables.cooperation => {
                out.push(enforcement_ratchet(&arm.runs, alpha))
            }
            "hypercycle" if first.enables.fusion => out.push(transitions(&arm.runs, 1, 2, 0.5)),
            _ => {}
        }
    }
    let by = |scenario: &str, pick: &dyn Fn(&Enables) -> bool| {
        arms.iter().find(|a| {
            a.runs
                .first()
                .is_some_and(|r| r.scenario == scenario && pick(&r.enables))
        })
    };
    if let (Some(t), Some(c)) = (
        by("hypercycle", &|e| e.fusion),
        by("hypercycle", &|e| !e.fusion),
    ) {
        out.push(parasite_fixation(&t.runs, &c.runs, alpha));
    }
    if let (Some(m), Some(a)) = (
        by("fisher_muller", &is_multiparent_only),
        by("fisher_muller", &|e| !is_multiparent_only(e)),
    ) {
        out.push(faster_goal(&m.runs, &a.runs, alpha));
    }
    out
}
