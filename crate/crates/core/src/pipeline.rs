//! Orchestrates the four phases — select, route, build transmission sets,
//! optimize schedule — with the feedback loop that ejects troublesome links
//! back into selection whenever the transmission set collection exceeds the
//! threshold. If avoiding those links would disconnect previously connected
//! nodes, the additions are rolled back and the longer schedule accepted.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::netmodel::{link_key, DirectedLink, LinkKey, NodeId, Topology};
use crate::routing::{compute_mdst, RoutingConfig};
use crate::scheduler::{
    optimize_schedule, primary_eval_paths, worst_case_delay, AnnealConfig, DelayReport, Schedule,
};
use crate::selection::{
    select_active_links, weight_links, ActiveTopology, AvoidList, SelectionConfig,
};
use crate::tsgen::{
    build_transmission_sets, schedule_weights, TransmissionSetCollection, TsgenOptions,
};

/// One of the four evaluation strategies: bipartite/free-form topology
/// crossed with single-link/all-sector selection in transmission sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub bipartite: bool,
    pub sector_fill: bool,
}

impl Strategy {
    pub const BS: Strategy = Strategy {
        bipartite: true,
        sector_fill: false,
    };
    pub const BA: Strategy = Strategy {
        bipartite: true,
        sector_fill: true,
    };
    pub const FS: Strategy = Strategy {
        bipartite: false,
        sector_fill: false,
    };
    pub const FA: Strategy = Strategy {
        bipartite: false,
        sector_fill: true,
    };

    pub fn all() -> [Strategy; 4] {
        [Strategy::BS, Strategy::BA, Strategy::FS, Strategy::FA]
    }

    pub fn name(&self) -> &'static str {
        match (self.bipartite, self.sector_fill) {
            (true, false) => "BS",
            (true, true) => "BA",
            (false, false) => "FS",
            (false, true) => "FA",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Strategy, String> {
        match s.to_ascii_uppercase().as_str() {
            "BS" => Ok(Strategy::BS),
            "BA" => Ok(Strategy::BA),
            "FS" => Ok(Strategy::FS),
            "FA" => Ok(Strategy::FA),
            other => Err(format!(
                "unknown strategy `{other}` (expected BS, BA, FS, or FA)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    pub selection: SelectionConfig,
    /// Feedback fires when `|TSS|` exceeds this.
    pub tss_threshold: usize,
    pub max_feedback_rounds: u32,
    pub anneal: AnnealConfig,
    /// Optimize the pre-feedback schedule too, for before/after comparisons.
    pub diagnostics: bool,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            strategy: Strategy::FS,
            selection: SelectionConfig::default(),
            tss_threshold: 8,
            max_feedback_rounds: 8,
            anneal: AnnealConfig::default(),
            diagnostics: false,
        }
    }
}

/// What one feedback round did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundDiagnostics {
    pub round: u32,
    pub avoid_added: usize,
    pub links_before: usize,
    pub links_after: usize,
    pub tss_before: usize,
    pub tss_after: usize,
    /// Optimized worst-case primary delay before/after the round
    /// (diagnostics mode only).
    pub pre_worst: Option<u32>,
    pub post_worst: Option<u32>,
    pub rolled_back: bool,
}

/// Complete network configuration: active links, routing trees, transmission
/// sets, and the optimized cyclic schedule with its delay report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfiguration {
    pub active: ActiveTopology,
    pub routing: RoutingConfig,
    pub tss: TransmissionSetCollection,
    pub schedule: Schedule,
    pub delays: DelayReport,
    pub feedback_rounds: u32,
    pub avoid_final: AvoidList,
    pub rounds: Vec<RoundDiagnostics>,
    pub warnings: Vec<String>,
}

struct PhaseOutput {
    active: ActiveTopology,
    routing: RoutingConfig,
    tss: TransmissionSetCollection,
}

fn run_phases(
    topology: &Topology,
    config: &PipelineConfig,
    avoid: &AvoidList,
) -> Result<PhaseOutput, Error> {
    let weights = weight_links(topology, None)?;
    let selection = SelectionConfig {
        bipartite: config.strategy.bipartite,
        ..config.selection.clone()
    };
    let active = select_active_links(topology, &weights, &selection, avoid)?;
    let routing = compute_mdst(&active, None)?;
    let link_weights = schedule_weights(&active, &routing);
    let tss = build_transmission_sets(
        &active,
        &link_weights,
        TsgenOptions {
            per_node_sector_fill: config.strategy.sector_fill,
        },
    )?;
    Ok(PhaseOutput {
        active,
        routing,
        tss,
    })
}

fn optimized_worst(output: &PhaseOutput, anneal: &AnnealConfig) -> Result<u32, Error> {
    let paths = primary_eval_paths(&output.routing);
    let (_, report) = optimize_schedule(&output.tss, &paths, anneal)?;
    Ok(report.worst_case)
}

/// Runs select → route → tsgen, looping through the feedback channel while
/// the transmission set collection is longer than the threshold, then
/// optimizes the final schedule and evaluates primary delays.
pub fn run_pipeline(
    topology: &Topology,
    config: &PipelineConfig,
) -> Result<NetworkConfiguration, Error> {
    let mut avoid = AvoidList::new();
    let mut warnings = Vec::new();
    let mut rounds = Vec::new();
    let mut feedback_rounds = 0u32;
    let mut current = run_phases(topology, config, &avoid)?;
    let mut current_worst: Option<u32> = None;

    while current.tss.len() > config.tss_threshold {
        if feedback_rounds >= config.max_feedback_rounds {
            warnings.push(format!(
                "feedback budget exhausted after {feedback_rounds} rounds; accepting |TSS| = {}",
                current.tss.len()
            ));
            break;
        }
        let troublesome = current.tss.troublesome_when_exceeding(config.tss_threshold);
        let added: Vec<LinkKey> = troublesome
            .into_iter()
            .filter(|key| !avoid.contains(key))
            .collect();
        if added.is_empty() {
            break;
        }
        for &(a, b) in &added {
            avoid.insert(a, b);
        }
        let candidate = run_phases(topology, config, &avoid)?;

        let newly_lost: BTreeSet<NodeId> = candidate
            .active
            .unconnected
            .difference(&current.active.unconnected)
            .copied()
            .collect();
        if !newly_lost.is_empty() {
            // avoiding these links severs previously connected nodes; roll
            // them back and accept the longer schedule
            for key in &added {
                avoid.remove(key);
            }
            warnings.push(format!(
                "feedback round {} rolled back: avoiding {} links would disconnect {} nodes",
                feedback_rounds + 1,
                added.len(),
                newly_lost.len()
            ));
            rounds.push(RoundDiagnostics {
                round: feedback_rounds + 1,
                avoid_added: added.len(),
                links_before: current.active.active_links.len(),
                links_after: candidate.active.active_links.len(),
                tss_before: current.tss.len(),
                tss_after: candidate.tss.len(),
                pre_worst: None,
                post_worst: None,
                rolled_back: true,
            });
            break;
        }

        let (pre_worst, post_worst) = if config.diagnostics {
            let pre = match current_worst {
                Some(w) => w,
                None => optimized_worst(&current, &config.anneal)?,
            };
            let post = optimized_worst(&candidate, &config.anneal)?;
            (Some(pre), Some(post))
        } else {
            (None, None)
        };
        rounds.push(RoundDiagnostics {
            round: feedback_rounds + 1,
            avoid_added: added.len(),
            links_before: current.active.active_links.len(),
            links_after: candidate.active.active_links.len(),
            tss_before: current.tss.len(),
            tss_after: candidate.tss.len(),
            pre_worst,
            post_worst,
            rolled_back: false,
        });
        current = candidate;
        current_worst = post_worst;
        feedback_rounds += 1;
    }

    if !current.active.unconnected.is_empty() {
        warnings.push(format!(
            "{} nodes unreachable from any gateway were excluded from routing",
            current.active.unconnected.len()
        ));
    }

    let paths = primary_eval_paths(&current.routing);
    let (schedule, delays) = optimize_schedule(&current.tss, &paths, &config.anneal)?;
    Ok(NetworkConfiguration {
        active: current.active,
        routing: current.routing,
        tss: current.tss,
        schedule,
        delays,
        feedback_rounds,
        avoid_final: avoid,
        rounds,
        warnings,
    })
}

/// Cross-phase consistency checks; one entry per violation.
pub fn validate_configuration(config: &NetworkConfiguration) -> Vec<String> {
    let mut out = Vec::new();
    let active_keys: BTreeSet<LinkKey> = config
        .active
        .active_links
        .iter()
        .map(|l| l.key())
        .collect();

    // primary paths ride active links
    for primary in &config.routing.primary {
        for pair in primary.path.windows(2) {
            let key = link_key(pair[0], pair[1]);
            if !active_keys.contains(&key) {
                out.push(format!(
                    "primary path of node {} uses inactive link {}-{}",
                    primary.node, key.0, key.1
                ));
            }
        }
    }

    // both directions of every active link appear in some set
    let mut scheduled: BTreeSet<DirectedLink> = BTreeSet::new();
    for set in &config.tss.sets {
        scheduled.extend(set.links.iter().copied());
    }
    for &(a, b) in &active_keys {
        for dl in [DirectedLink::new(a, b), DirectedLink::new(b, a)] {
            if !scheduled.contains(&dl) {
                out.push(format!(
                    "direction {dl} of an active link is never scheduled"
                ));
            }
        }
    }

    // schedule is a permutation of the collection
    let mut order = config.schedule.order.clone();
    order.sort_unstable();
    if config.schedule.length != config.tss.len()
        || order != (0..config.tss.len()).collect::<Vec<_>>()
    {
        out.push(format!(
            "schedule order is not a permutation of 0..{}",
            config.tss.len()
        ));
    }

    // colors two-color every active link when present
    if let Some(colors) = &config.active.colors {
        for &(a, b) in &active_keys {
            if colors.get(&a) == colors.get(&b) {
                out.push(format!("active link {a}-{b} joins same-colored endpoints"));
            }
        }
    }

    // delays were computed from this schedule
    let paths = primary_eval_paths(&config.routing);
    match worst_case_delay(&config.schedule, &config.tss, &paths) {
        Ok(report) => {
            if report.worst_case != config.delays.worst_case
                || (report.mean - config.delays.mean).abs() > 1e-9
            {
                out.push("delay report does not match the stored schedule".into());
            }
        }
        Err(err) => out.push(format!("delay report cannot be recomputed: {err}")),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn strategy_names_roundtrip() {
        for strategy in Strategy::all() {
            assert_eq!(strategy.name().parse::<Strategy>().unwrap(), strategy);
        }
        assert!(Strategy::BS.bipartite && !Strategy::BS.sector_fill);
        assert!(Strategy::BA.bipartite && Strategy::BA.sector_fill);
        assert!(!Strategy::FS.bipartite && !Strategy::FS.sector_fill);
        assert!(!Strategy::FA.bipartite && Strategy::FA.sector_fill);
        assert!("XX".parse::<Strategy>().is_err());
    }

    #[test]
    fn diamond_runs_without_feedback() {
        let topo = fixtures::diamond();
        let config = PipelineConfig::default();
        let result = run_pipeline(&topo, &config).unwrap();
        assert_eq!(result.feedback_rounds, 0);
        assert!(result.rounds.is_empty());
        assert!(result.avoid_final.is_empty());
        assert!(result.tss.len() <= config.tss_threshold);
        assert!(validate_configuration(&result).is_empty());

        // identical to running the four phases once
        let phases = run_phases(&topo, &config, &AvoidList::new()).unwrap();
        assert_eq!(phases.active, result.active);
        assert_eq!(phases.routing, result.routing);
        assert_eq!(phases.tss, result.tss);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let topo = fixtures::diamond();
        let config = PipelineConfig {
            strategy: Strategy::BA,
            ..PipelineConfig::default()
        };
        let a = serde_json::to_string(&run_pipeline(&topo, &config).unwrap()).unwrap();
        let b = serde_json::to_string(&run_pipeline(&topo, &config).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn diagnostics_flag_does_not_change_the_result() {
        let topo = fixtures::diamond();
        let plain = run_pipeline(&topo, &PipelineConfig::default()).unwrap();
        let diag = run_pipeline(
            &topo,
            &PipelineConfig {
                diagnostics: true,
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        assert_eq!(plain.schedule, diag.schedule);
        assert_eq!(plain.delays, diag.delays);
    }

    #[test]
    fn tight_threshold_triggers_feedback_and_terminates() {
        let topo = fixtures::diamond();
        for strategy in Strategy::all() {
            let config = PipelineConfig {
                strategy,
                tss_threshold: 2,
                diagnostics: true,
                ..PipelineConfig::default()
            };
            let result = run_pipeline(&topo, &config).unwrap();
            assert!(result.feedback_rounds <= config.max_feedback_rounds);
            for round in &result.rounds {
                if !round.rolled_back {
                    assert!(round.avoid_added > 0);
                    // reduction in selected links is bounded by the avoid size
                    assert!(
                        round.links_before as i64 - round.links_after as i64
                            <= round.avoid_added as i64,
                        "selected-link reduction exceeds the avoided count"
                    );
                }
            }
            assert!(validate_configuration(&result).is_empty());
        }
    }
}
