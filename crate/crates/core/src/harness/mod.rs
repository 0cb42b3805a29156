//! Deterministic attack scenarios over an in-memory transport.
//!
//! Each scenario builds a fresh [`World`] from its seed, runs one or more
//! phases (always including an honest baseline), and reports what each phase
//! observed against what it expected.

mod channel;
mod scenarios;
mod weakened;
mod world;

use serde::{Deserialize, Serialize};

pub use channel::{
    Action, ChannelError, Interceptor, Message, Recorder, SimChannel, TranscriptEntry,
};
pub use world::{
    aa_actor, fixture_schema, john_record, mallory_record, rp_trust, sim_endpoint, HonestFlow, Rp,
    SimTransport, WalletOutcome, Who, World, JOHN, JOHN_SSN, MALLORY, WORLD_START,
};

use crate::canonical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    AttackBlocked,
    AttackSucceeds,
    FlowCompletes,
}

impl std::fmt::Display for Expectation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Expectation::AttackBlocked => "attack_blocked",
            Expectation::AttackSucceeds => "attack_succeeds",
            Expectation::FlowCompletes => "flow_completes",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub name: String,
    pub expectation: Expectation,
    pub observed: Expectation,
    pub detail: String,
}

impl PhaseReport {
    pub fn new(name: &str, expectation: Expectation, observed: Expectation, detail: String) -> Self {
        PhaseReport {
            name: name.to_string(),
            expectation,
            observed,
            detail,
        }
    }

    pub fn matches(&self) -> bool {
        self.expectation == self.observed
    }
}

/// `expectation` and `observed` are those of the headline phase; `pass`
/// additionally requires every other phase, baselines included, to match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub expectation: Expectation,
    pub observed: Expectation,
    pub pass: bool,
    pub phases: Vec<PhaseReport>,
    pub transcript: Vec<TranscriptEntry>,
    pub seed: u64,
}

impl ScenarioReport {
    pub fn to_canonical(&self) -> Vec<u8> {
        canonical::encode(self).expect("reports encode")
    }

    pub fn phase(&self, name: &str) -> Option<&PhaseReport> {
        self.phases.iter().find(|p| p.name == name)
    }

    /// A few human-readable lines.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} [{}] expected {} observed {} (seed {}, {} messages)\n",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.expectation,
            self.observed,
            self.seed,
            self.transcript.len()
        );
        for p in &self.phases {
            out.push_str(&format!(
                "  {} {:<28} expected {:<16} observed {:<16} {}\n",
                if p.matches() { "ok " } else { "BAD" },
                p.name,
                p.expectation.to_string(),
                p.observed.to_string(),
                p.detail
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub name: String,
    /// The threat being exercised.
    pub threat: String,
    pub expectation: Expectation,
}

pub type ScenarioFn = fn(&mut World) -> Vec<PhaseReport>;

#[derive(Clone, Copy)]
pub struct ScenarioSpec {
    pub name: &'static str,
    pub threat: &'static str,
    pub expectation: Expectation,
    /// The phase whose outcome is the scenario's headline.
    pub headline: &'static str,
    pub run: ScenarioFn,
}

impl ScenarioSpec {
    pub fn info(&self) -> ScenarioInfo {
        ScenarioInfo {
            name: self.name.to_string(),
            threat: self.threat.to_string(),
            expectation: self.expectation,
        }
    }

    pub fn execute(&self, seed: u64) -> ScenarioReport {
        let mut world = World::new(seed);
        let phases = (self.run)(&mut world);
        let observed = phases
            .iter()
            .find(|p| p.name == self.headline)
            .map(|p| p.observed);
        let pass = observed == Some(self.expectation) && phases.iter().all(PhaseReport::matches);
        ScenarioReport {
            name: self.name.to_string(),
            expectation: self.expectation,
            // a missing headline phase is reported as the opposite outcome
            observed: observed.unwrap_or(match self.expectation {
                Expectation::AttackBlocked => Expectation::AttackSucceeds,
                _ => Expectation::AttackBlocked,
            }),
            pass,
            phases,
            transcript: world.recorder.take(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scenario {0:?}")]
pub struct UnknownScenario(pub String);

pub fn catalog() -> &'static [ScenarioSpec] {
    scenarios::CATALOG
}

pub fn list_scenarios() -> Vec<ScenarioInfo> {
    catalog().iter().map(ScenarioSpec::info).collect()
}

pub fn run_scenario(name: &str, seed: u64) -> Result<ScenarioReport, UnknownScenario> {
    catalog()
        .iter()
        .find(|s| s.name == name)
        .map(|s| s.execute(seed))
        .ok_or_else(|| UnknownScenario(name.to_string()))
}

#[derive(Debug, Clone)]
pub struct RunAll {
    pub reports: Vec<ScenarioReport>,
}

impl RunAll {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    /// Zero iff every report passes.
    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }
}

pub fn run_all(seed: u64) -> RunAll {
    run_all_from(catalog(), seed)
}

pub fn run_all_from(specs: &[ScenarioSpec], seed: u64) -> RunAll {
    RunAll {
        reports: specs.iter().map(|s| s.execute(seed)).collect(),
    }
}
