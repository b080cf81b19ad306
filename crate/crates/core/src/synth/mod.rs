//! Synthetic scenario generation with planted ground truth, plus the
//! brute-force oracles that power the verification suites.

mod generator;
pub mod oracle;

pub use generator::{
    generate, write_scenario, CohortConfig, ConcentrationConfig, CorrelatedTopicConfig,
    CorrelatedTopicManifest, EvacuationConfig, EvacuationManifest, GroundTruthManifest,
    HotspotProcessConfig, MobilityBehaviorConfig, RegionGridConfig, Scenario, ScenarioConfig,
    ScenarioPaths, ScenarioTotals, SynthError, TopicConfig, WeeklyHotspotCounts,
};
