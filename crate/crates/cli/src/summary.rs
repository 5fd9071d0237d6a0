//! JSON summary emitted by `run` and embedded in sweep rows.

use serde::Serialize;

use kssm_core::comparison::DominationReport;
use kssm_core::constants::TheoryConstants;
use kssm_core::diagnostics::{BoundReport, Regime};
use kssm_core::model::AssumptionReport;
use kssm_core::scenario::{PeakFunctionals, RunSummary};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct ComparisonSummary {
    /// `||v||_inf` trace against the dominating ODE `V`.
    pub v_domination: Option<DominationReport<f64>>,
    /// `||u||_inf` trace against the dominating ODE `U`.
    pub u_domination: Option<DominationReport<f64>>,
    /// Whether the recorded signal trace ever exceeded `s*` (the ODE then
    /// sees a self-referential coefficient; flagged, never absorbed).
    pub v_trace_exceeded_sstar: Option<bool>,
}

/// Self-contained run report: reproducible from `config` + seed alone.
#[derive(Debug, Serialize)]
pub struct CliRunSummary {
    pub name: String,
    pub classification: Regime,
    pub steps: usize,
    pub final_time: f64,
    pub peak: PeakFunctionals<f64>,
    pub mass_law_max_defect: f64,
    pub records: usize,
    pub constants: Option<TheoryConstants<f64>>,
    pub constants_note: Option<String>,
    pub assumptions: AssumptionReport,
    pub bound_report: Option<BoundReport<f64>>,
    pub comparison: Option<ComparisonSummary>,
    pub wall_clock_sec: f64,
    pub config: RunConfig,
    pub outputs: OutputPaths,
}

#[derive(Debug, Default, Serialize)]
pub struct OutputPaths {
    pub config: Option<String>,
    pub diagnostics_csv: Option<String>,
    pub summary_json: Option<String>,
    pub snapshots: Vec<String>,
}

impl CliRunSummary {
    pub fn from_parts(
        summary: &RunSummary<f64>,
        assumptions: &AssumptionReport,
        records: usize,
        name: String,
        config: RunConfig,
    ) -> Self {
        Self {
            name,
            classification: summary.classification,
            steps: summary.steps,
            final_time: summary.final_time,
            peak: summary.peak,
            mass_law_max_defect: summary.mass_law_max_defect,
            records,
            constants: summary.constants.clone(),
            constants_note: summary.constants_note.clone(),
            assumptions: assumptions.clone(),
            bound_report: None,
            comparison: None,
            wall_clock_sec: 0.0,
            config,
            outputs: OutputPaths::default(),
        }
    }
}
