//! Fully-specified simulation scenarios and the run loop that drives them:
//! constants, stepping, diagnostics, classification.

use serde::{Deserialize, Serialize};

use crate::constants::{compute_constants, ScanConfig, TheoryConstants};
use crate::diagnostics::{
    classify_regime, record_with_solver, ClassifierConfig, DiagnosticsRecord, DiagnosticsSink,
    Regime,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{
    check_assumptions, init_field, AssumptionReport, InitialConditionSpec, MotilitySpec,
    SourceSpec,
};
use crate::scalar::Real;
use crate::stepper::{State, StepConfig, Stepper};

/// Everything needed to reproduce one run (no output paths, all numbers).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "R: Real + serde::Deserialize<'de>"))]
pub struct Scenario<R> {
    pub name: String,
    pub grid: Grid<R>,
    pub motility: MotilitySpec<R>,
    pub source: SourceSpec<R>,
    pub initial: InitialConditionSpec<R>,
    pub step: StepConfig<R>,
    pub classifier: ClassifierConfig<R>,
    /// Final time.
    pub horizon: R,
    /// Seed for randomized initial conditions.
    pub seed: u64,
    /// Whether the harness should run the comparison ODEs afterwards.
    pub comparison: bool,
    /// Times at which to emit binary snapshots.
    pub snapshot_times: Vec<R>,
}

impl<R: Real> Scenario<R> {
    pub fn validate(&self) -> Result<()> {
        self.motility.validate()?;
        self.source.validate()?;
        self.initial.validate()?;
        self.step.validate()?;
        if self.horizon < R::zero() || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(
                "horizon must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Extremes reached over a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeakFunctionals<R> {
    pub u_max: R,
    pub v_max: R,
    pub mass_max: R,
}

/// Condensed result of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary<R> {
    pub classification: Regime,
    pub steps: usize,
    pub final_time: R,
    pub peak: PeakFunctionals<R>,
    /// Worst per-step relative defect of the discrete mass law.
    pub mass_law_max_defect: R,
    /// Constructive constants used by the bound checks, when the source
    /// admits them.
    pub constants: Option<TheoryConstants<R>>,
    /// Why `constants` is absent, when it is.
    pub constants_note: Option<String>,
}

/// Full in-memory result of one run.
#[derive(Debug, Clone)]
pub struct RunOutput<R> {
    pub summary: RunSummary<R>,
    pub assumptions: AssumptionReport,
    pub records: Vec<DiagnosticsRecord<R>>,
    pub final_state: State<R>,
}

/// Drive a scenario from `t = 0` to the horizon (or overflow), streaming
/// diagnostics to `sink` every `diagnostics_stride` steps and collecting them
/// for classification. Single-threaded and deterministic for a fixed
/// scenario.
pub fn run_scenario<R: Real>(
    scn: &Scenario<R>,
    sink: &mut dyn DiagnosticsSink<R>,
) -> Result<RunOutput<R>> {
    scn.validate()?;
    let assumptions = check_assumptions(&scn.motility, &scn.source, R::lit(50.0), 256)?;

    let u0 = init_field(&scn.initial, &scn.grid, scn.seed)?;
    let mut stepper = Stepper::new(scn.grid, scn.motility, scn.source, scn.step)?;
    let mut state = State::initial(u0, stepper.helmholtz())?;

    let (constants, constants_note) = if scn.source.diverges() {
        match compute_constants(
            &scn.motility,
            &scn.source,
            state.v.max(),
            &ScanConfig::default(),
        ) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(format!("constant set unavailable: {e}"))),
        }
    } else {
        (
            None,
            Some("source does not diverge; constructive constants are undefined".into()),
        )
    };

    let mut records = Vec::new();
    let first = record_with_solver(&state, &scn.motility, &scn.source, None, stepper.helmholtz())?;
    sink.on_record(&first)?;
    records.push(first);

    let mut snapshots: Vec<R> = scn.snapshot_times.clone();
    snapshots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut next_snapshot = 0usize;
    while next_snapshot < snapshots.len() && snapshots[next_snapshot] <= R::zero() {
        sink.on_snapshot(&state)?;
        next_snapshot += 1;
    }

    let mut peak = PeakFunctionals {
        u_max: records[0].u_max,
        v_max: records[0].v_max,
        mass_max: records[0].mass,
    };
    let mut max_defect = R::zero();
    let mut steps = 0usize;
    let mut overflowed = false;
    let mut next = state.clone();
    let mut prev_for_record: Option<State<R>> = None;
    let stride = scn.step.diagnostics_stride;

    while state.t < scn.horizon {
        let dt_cap = scn.horizon - state.t;
        if !(dt_cap > R::zero()) {
            break;
        }
        let record_due = (steps + 1) % stride == 0;
        if record_due {
            match &mut prev_for_record {
                Some(p) => p.clone_from(&state),
                None => prev_for_record = Some(state.clone()),
            }
        }
        let stats = match stepper.step_into(&state, &mut next, dt_cap) {
            Ok(s) => s,
            Err(Error::NonFinite(_)) => {
                overflowed = true;
                break;
            }
            Err(e) => return Err(Error::Step(format!("step {}: {e}", steps + 1))),
        };
        std::mem::swap(&mut state, &mut next);
        steps += 1;
        max_defect = max_defect.max(stats.mass_defect_rel);

        let u_max = state.u.max();
        let v_max = state.v.max();
        peak.u_max = peak.u_max.max(u_max);
        peak.v_max = peak.v_max.max(v_max);
        if !u_max.is_finite() || u_max >= scn.classifier.overflow_cap {
            overflowed = true;
        }

        let emit = record_due || overflowed || state.t >= scn.horizon;
        if emit {
            let prev = if record_due { prev_for_record.as_ref() } else { None };
            let rec = record_with_solver(
                &state,
                &scn.motility,
                &scn.source,
                prev,
                stepper.helmholtz(),
            )?;
            peak.mass_max = peak.mass_max.max(rec.mass);
            sink.on_record(&rec)?;
            records.push(rec);
        }

        while next_snapshot < snapshots.len() && snapshots[next_snapshot] <= state.t {
            sink.on_snapshot(&state)?;
            next_snapshot += 1;
        }

        if overflowed {
            break;
        }
    }

    let classification = if overflowed {
        Regime::Overflowed
    } else {
        classify_regime(&records, &scn.classifier)
    };

    Ok(RunOutput {
        summary: RunSummary {
            classification,
            steps,
            final_time: state.t,
            peak,
            mass_law_max_defect: max_defect,
            constants,
            constants_note,
        },
        assumptions,
        records,
        final_state: state,
    })
}

/// Named scenario presets pinning the narrative cases to runnable configs.
pub mod presets {
    use super::*;

    /// `f(s) = log(1+s) - log 2`: logarithmic degradation with growth below
    /// the equilibrium density 1, so suppressed runs settle to a state the
    /// plateau checks can certify.
    fn log_source() -> SourceSpec<f64> {
        SourceSpec::LogPower {
            lambda: 1.0,
            alpha: 1.0,
            mu: std::f64::consts::LN_2,
        }
    }

    fn classifier() -> ClassifierConfig<f64> {
        ClassifierConfig::default()
    }

    /// Decaying motility with a sharp 1D bump and logarithmic degradation.
    pub fn suppress1d() -> Scenario<f64> {
        Scenario {
            name: "suppress1d".into(),
            grid: Grid::new_1d(1.5, 256).unwrap(),
            motility: MotilitySpec::ExpDecay { chi: 1.0 },
            source: log_source(),
            initial: InitialConditionSpec::GaussianBump {
                center: vec![0.75],
                width: 0.08,
                amplitude: 30.0,
                floor: 0.1,
            },
            step: StepConfig {
                diagnostics_stride: 1000,
                ..StepConfig::default()
            },
            classifier: classifier(),
            horizon: 50.0,
            seed: 7,
            comparison: false,
            snapshot_times: vec![],
        }
    }

    /// Bounded decaying motility with a seeded rough start; exercises the
    /// bounded-motility signal cap.
    pub fn boundedgamma1d() -> Scenario<f64> {
        Scenario {
            name: "boundedgamma1d".into(),
            grid: Grid::new_1d(1.5, 256).unwrap(),
            motility: MotilitySpec::ExpDecay { chi: 0.5 },
            source: SourceSpec::LogPower {
                lambda: 2.0,
                alpha: 1.0,
                mu: 1.0,
            },
            initial: InitialConditionSpec::PerturbedConstant {
                value: 2.0,
                amplitude: 0.5,
                modes: vec![1, 3, 5],
            },
            step: StepConfig {
                diagnostics_stride: 500,
                ..StepConfig::default()
            },
            classifier: classifier(),
            horizon: 20.0,
            seed: 11,
            comparison: false,
            snapshot_times: vec![],
        }
    }

    /// Non-decreasing concave motility; the explicit density cap
    /// `max(u_in_max, beta1)` applies and the U comparison runs.
    pub fn concave1d() -> Scenario<f64> {
        Scenario {
            name: "concave1d".into(),
            grid: Grid::new_1d(2.5, 256).unwrap(),
            motility: MotilitySpec::LogGrowth { c: 1.0 },
            source: log_source(),
            initial: InitialConditionSpec::GaussianBump {
                center: vec![1.25],
                width: 0.1,
                amplitude: 9.9,
                floor: 0.1,
            },
            step: StepConfig {
                diagnostics_stride: 1000,
                ..StepConfig::default()
            },
            classifier: classifier(),
            horizon: 50.0,
            seed: 7,
            comparison: true,
            snapshot_times: vec![],
        }
    }

    /// Oscillating unbounded motility (derivative changes sign); the V
    /// comparison runs against `s*`.
    pub fn nonmono1d() -> Scenario<f64> {
        Scenario {
            name: "nonmono1d".into(),
            grid: Grid::new_1d(3.0, 256).unwrap(),
            motility: MotilitySpec::AffineOsc { a: 1.3, b: 1.2 },
            source: log_source(),
            initial: InitialConditionSpec::GaussianBump {
                center: vec![1.5],
                width: 0.12,
                amplitude: 0.8,
                floor: 0.02,
            },
            step: StepConfig {
                diagnostics_stride: 1000,
                ..StepConfig::default()
            },
            classifier: classifier(),
            horizon: 50.0,
            seed: 7,
            comparison: true,
            snapshot_times: vec![],
        }
    }

    /// Source-free aggregation with decaying motility on a 2D grid: the bump
    /// mass is supercritical, so the density concentrates without bound at
    /// finite resolution.
    pub fn blowup2d() -> Scenario<f64> {
        Scenario {
            name: "blowup2d".into(),
            grid: Grid::new_2d(4.0, 4.0, 128, 128).unwrap(),
            motility: MotilitySpec::ExpDecay { chi: 1.0 },
            source: SourceSpec::Zero,
            initial: InitialConditionSpec::GaussianBump {
                center: vec![2.0, 2.0],
                width: 0.65,
                amplitude: 15.0,
                floor: 0.3,
            },
            step: StepConfig {
                diagnostics_stride: 100,
                ..StepConfig::default()
            },
            classifier: classifier(),
            horizon: 130.0,
            seed: 7,
            comparison: false,
            snapshot_times: vec![],
        }
    }

    /// Identical to [`blowup2d`] except for the logarithmic degradation,
    /// which suppresses the aggregation.
    pub fn suppress2d() -> Scenario<f64> {
        let mut scn = blowup2d();
        scn.name = "suppress2d".into();
        scn.source = log_source();
        scn
    }

    /// Preset names with one-line descriptions, in a fixed order.
    pub fn catalog() -> Vec<(&'static str, &'static str)> {
        vec![
            ("suppress1d", "1D bump, decaying motility, log degradation"),
            (
                "boundedgamma1d",
                "1D rough start, bounded motility branch of the signal cap",
            ),
            (
                "concave1d",
                "1D bump, growing concave motility, explicit density cap",
            ),
            (
                "nonmono1d",
                "1D bump, oscillating unbounded motility, V comparison",
            ),
            ("blowup2d", "2D source-free aggregation (grows/overflows)"),
            ("suppress2d", "same as blowup2d plus log degradation (bounded)"),
        ]
    }

    pub fn by_name(name: &str) -> Option<Scenario<f64>> {
        match name {
            "suppress1d" => Some(suppress1d()),
            "boundedgamma1d" => Some(boundedgamma1d()),
            "concave1d" => Some(concave1d()),
            "nonmono1d" => Some(nonmono1d()),
            "blowup2d" => Some(blowup2d()),
            "suppress2d" => Some(suppress2d()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::NullSink;

    #[test]
    fn zero_horizon_yields_initial_diagnostics_only() {
        let mut scn = presets::suppress1d();
        scn.horizon = 0.0;
        let out = run_scenario(&scn, &mut NullSink).unwrap();
        assert_eq!(out.summary.steps, 0);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.summary.classification, Regime::Inconclusive);
        assert!(out.summary.constants.is_some());
    }

    #[test]
    fn fixed_point_run_stays_constant() {
        let c = 2.0f64;
        let mu = (1.0 + c).ln();
        // Pin dt below the CFL limit so the horizon is exactly 1000 steps.
        let h = 1.0 / 32.0;
        let dt = 0.9 * h * h / 2.0;
        let scn = Scenario {
            name: "fixed-point".into(),
            grid: Grid::new_1d(1.0, 32).unwrap(),
            motility: MotilitySpec::ExpDecay { chi: 1.0 },
            source: SourceSpec::LogPower {
                lambda: 1.0,
                alpha: 1.0,
                mu,
            },
            initial: InitialConditionSpec::Constant { value: c },
            step: StepConfig {
                diagnostics_stride: 100,
                dt_max: dt,
                ..StepConfig::default()
            },
            classifier: ClassifierConfig::default(),
            horizon: 1000.0 * dt,
            seed: 0,
            comparison: false,
            snapshot_times: vec![],
        };
        let out = run_scenario(&scn, &mut NullSink).unwrap();
        assert!(out.summary.steps >= 999);
        for v in out.final_state.u.values() {
            assert!((v - c).abs() <= 1e-10);
        }
    }

    #[test]
    fn presets_all_resolve() {
        for (name, _) in presets::catalog() {
            let scn = presets::by_name(name).unwrap();
            assert_eq!(scn.name, name);
            scn.validate().unwrap();
        }
        assert!(presets::by_name("nope").is_none());
    }
}
