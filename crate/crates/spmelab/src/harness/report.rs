//! Report types serialized into the per-run JSON artifact.

use serde::Serialize;

use crate::barriers::SupersolutionReport;
use crate::bounds::BoundRecord;
use crate::entropy::{ContainmentCertificate, EntropyFit, EntropyPoint};
use crate::solver::LinfReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The check could not decide (for example a zero support threshold
    /// makes regularization tails count as support).
    Inconclusive,
}

impl Verdict {
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

/// One bound checked against a measured series.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub bound: BoundRecord,
    /// Whether the bound's hypotheses hold for this run (the unperturbed
    /// bound does not apply under noise; it is still reported).
    pub applies: bool,
    pub verdict: Verdict,
    /// Worst `measured - (schedule - slack)` over the valid horizon
    /// (negative = violation).
    pub worst_margin: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HoleFillSeedReport {
    pub seed: u64,
    pub h_transformed: f64,
    pub h_raw: f64,
    /// Time the center cell first exceeds τ (None if never).
    pub center_vanish_time: Option<f64>,
    pub checks: Vec<BoundCheck>,
    /// Supersolution certification of the barrier behind the small-ball
    /// bound (on the half ball, against the transformed solve).
    pub barrier_certification: SupersolutionReport,
    /// Final-snapshot support as run-length-encoded cell runs.
    pub final_support_rle: Vec<[usize; 2]>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct HoleFillReport {
    pub seeds: Vec<HoleFillSeedReport>,
    pub tau: f64,
    pub slack: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagationSeedReport {
    pub seed: u64,
    pub h_transformed: f64,
    pub h_raw: f64,
    /// First time the support reaches the boundary margin (checks are
    /// suspended afterwards).
    pub boundary_touch_time: Option<f64>,
    /// Initial and final supports as run-length-encoded cell runs.
    pub initial_support_rle: Vec<[usize; 2]>,
    pub final_support_rle: Vec<[usize; 2]>,
    /// Rows `(s, h, T_h, clamped, worst containment margin, verdict)`.
    pub horizon_checks: Vec<PropagationHorizonCheck>,
    /// Worst margin of the radius-schedule containment checks.
    pub radius_check: PropagationRadiusCheck,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagationHorizonCheck {
    pub s: f64,
    pub h: f64,
    pub t_h: f64,
    pub clamped: bool,
    pub c_h: f64,
    pub worst_margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagationRadiusCheck {
    pub worst_margin: f64,
    pub checks: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagationReport {
    pub seeds: Vec<PropagationSeedReport>,
    pub tau: f64,
    pub slack: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyCaseReport {
    /// "zero" or the driving seed.
    pub case: String,
    pub points: Vec<EntropyPoint>,
    pub kappa_used: Vec<f64>,
    pub certificates: Vec<Vec<ContainmentCertificate>>,
    pub separation_ok: bool,
    pub fit: EntropyFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub cases: Vec<EntropyCaseReport>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub snapshots: usize,
    pub sup_norm: f64,
    pub final_mass: f64,
    pub linf: LinfReport,
    pub trajectory_file: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub suites: Vec<SuiteResult>,
    pub verdict: Verdict,
}

/// Envelope written to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub report_version: u32,
    pub kind: &'static str,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub config: crate::harness::ExperimentConfig,
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(
        kind: &'static str,
        config: &crate::harness::ExperimentConfig,
        body: T,
    ) -> crate::error::Result<Self> {
        Ok(Report {
            report_version: 1,
            kind,
            config_hash: crate::harness::config_hash(config)?,
            seeds: config.noise.seeds.clone(),
            config: config.clone(),
            body,
        })
    }

    pub fn to_json(&self) -> crate::error::Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::Config(format!("report serialization: {e}")))
    }
}
