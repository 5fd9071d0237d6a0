//! Implementations of the CLI subcommands.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;

use kssm_core::comparison::{check_domination, integrate_u, integrate_v, ScalarSeries};
use kssm_core::constants::compute_constants;
use kssm_core::diagnostics::{
    check_theory_bounds, CsvSink, DiagnosticsRecord, DiagnosticsSink, Regime, DEFAULT_BOUND_TOL,
};
use kssm_core::elliptic::HelmholtzSolver;
use kssm_core::error::Error as CoreError;
use kssm_core::model::{check_assumptions, init_field};
use kssm_core::scenario::{run_scenario, RunOutput, Scenario};
use kssm_core::stepper::State;

use crate::config::{apply_sweep_param, RunConfig, SweepSection};
use crate::summary::{CliRunSummary, ComparisonSummary, OutputPaths};

/// Exit code for configuration or assumption failures.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical failures (solver, stepping, overflow of floats).
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit code for an overflow classification under `--fail-on-overflow`.
pub const EXIT_OVERFLOW: i32 = 4;

/// Map a core error to the process exit code contract.
pub fn exit_code_for(err: &CoreError) -> i32 {
    match err {
        CoreError::InvalidParameter(_)
        | CoreError::Domain(_)
        | CoreError::Assumption(_)
        | CoreError::Branch(_)
        | CoreError::Grid(_)
        | CoreError::Input(_)
        | CoreError::ScanDiverged(_) => EXIT_CONFIG,
        CoreError::SolverDiverged { .. }
        | CoreError::Step(_)
        | CoreError::NonFinite(_)
        | CoreError::Io(_) => EXIT_NUMERICAL,
    }
}

pub fn core_exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CoreError>() {
        Some(e) => exit_code_for(e),
        None => EXIT_CONFIG,
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Sink writing diagnostics CSV and binary snapshots under an output
/// directory; without one, records are counted and dropped.
struct FileSink {
    csv: Option<CsvSink<BufWriter<fs::File>>>,
    snapshot_dir: Option<PathBuf>,
    snapshots: Vec<String>,
    records: usize,
}

impl FileSink {
    fn new(out: Option<&Path>) -> anyhow::Result<Self> {
        let (csv, snapshot_dir) = match out {
            Some(dir) => {
                ensure_dir(dir)?;
                let file = fs::File::create(dir.join("diagnostics.csv"))?;
                (
                    Some(CsvSink::new(BufWriter::new(file))),
                    Some(dir.join("snapshots")),
                )
            }
            None => (None, None),
        };
        Ok(Self {
            csv,
            snapshot_dir,
            snapshots: Vec::new(),
            records: 0,
        })
    }

    fn finish(mut self) -> anyhow::Result<(usize, Vec<String>)> {
        if let Some(csv) = self.csv.take() {
            csv.into_inner().flush()?;
        }
        Ok((self.records, self.snapshots))
    }
}

impl DiagnosticsSink<f64> for FileSink {
    fn on_record(&mut self, rec: &DiagnosticsRecord<f64>) -> kssm_core::Result<()> {
        self.records += 1;
        if let Some(csv) = &mut self.csv {
            csv.on_record(rec)?;
        }
        Ok(())
    }

    fn on_snapshot(&mut self, state: &State<f64>) -> kssm_core::Result<()> {
        if let Some(dir) = &self.snapshot_dir {
            fs::create_dir_all(dir)?;
            let name = format!("t_{:.6}.bin", state.t);
            let mut file = fs::File::create(dir.join(&name))?;
            state.u.write_snapshot(state.t, &mut file)?;
            self.snapshots.push(format!("snapshots/{name}"));
        }
        Ok(())
    }
}

/// Compute and print the constant set for a configuration.
pub fn cmd_constants(scn: &Scenario<f64>, out: Option<&Path>) -> anyhow::Result<()> {
    scn.validate()?;
    let flags = check_assumptions(&scn.motility, &scn.source, 50.0, 256)?;
    for w in &flags.warnings {
        eprintln!("warning: {w}");
    }
    if !flags.f_diverges {
        anyhow::bail!(CoreError::Assumption(
            "source does not diverge; the constant set is undefined".into()
        ));
    }
    if !flags.f_sublog {
        eprintln!("warning: f/log tail unbounded; uniform-boundedness checks disabled");
    }

    // Honest v_in: realize the initial condition and solve the signal once.
    let u0 = init_field(&scn.initial, &scn.grid, scn.seed)?;
    let mut solver = HelmholtzSolver::new(scn.grid);
    let state = State::initial(u0, &mut solver)?;
    let vin_max = state.v.max();

    let constants = compute_constants(
        &scn.motility,
        &scn.source,
        vin_max,
        &kssm_core::constants::ScanConfig::default(),
    )?;

    println!("constants for `{}`:", scn.name);
    println!("  vin_max   = {:.12}", constants.vin_max);
    println!("  beta1     = {:.12}", constants.beta1);
    println!(
        "  branch    = {}",
        if constants.bounded_motility {
            "bounded motility"
        } else {
            "unbounded motility"
        }
    );
    match constants.sstar {
        Some(s) => println!("  sstar     = {s:.12}"),
        None => println!("  sstar     = (bounded branch, undefined)"),
    }
    println!("  vstar     = {:.12}", constants.vstar);
    println!("  gamma_lo  = {:.12}", constants.gamma_lo);
    println!("  gamma_hi  = {:.12}", constants.gamma_hi);
    println!("  k_gamma   = {:.12}", constants.k_gamma);
    println!(
        "  scan      = step {:.1e}, tol {:.1e}, {} refinement rounds",
        constants.scan.step, constants.scan.tol, constants.scan.refine_rounds
    );
    let json = serde_json::to_string_pretty(&constants)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        fs::write(dir.join("constants.json"), &json)?;
        println!("written to {}", dir.join("constants.json").display());
    } else {
        println!("{json}");
    }
    Ok(())
}

/// Outcome of `cmd_run` the caller uses for exit codes.
pub struct RunOutcome {
    pub classification: Regime,
}

/// Full pipeline: constants, run, diagnostics, bound checks, comparison ODEs,
/// summary.
pub fn cmd_run(scn: &Scenario<f64>, out: Option<&Path>) -> anyhow::Result<RunOutcome> {
    let started = Instant::now();
    let config = RunConfig::from_scenario(scn);
    if let Some(dir) = out {
        ensure_dir(dir)?;
        fs::write(dir.join("config.toml"), config.to_toml()?)?;
    }

    let mut sink = FileSink::new(out)?;
    let output = run_scenario(scn, &mut sink)?;
    let (records_written, snapshots) = sink.finish()?;

    let mut summary = CliRunSummary::from_parts(
        &output.summary,
        &output.assumptions,
        records_written,
        scn.name.clone(),
        config,
    );
    summary.outputs = OutputPaths {
        config: out.map(|_| "config.toml".into()),
        diagnostics_csv: out.map(|_| "diagnostics.csv".into()),
        summary_json: out.map(|_| "summary.json".into()),
        snapshots,
    };

    if let Some(constants) = &output.summary.constants {
        summary.bound_report = Some(check_theory_bounds(
            &output.records,
            constants,
            &output.assumptions,
            DEFAULT_BOUND_TOL,
        )?);
    }

    if scn.comparison {
        summary.comparison = Some(run_comparisons(scn, &output)?);
    }

    summary.wall_clock_sec = started.elapsed().as_secs_f64();

    let json = serde_json::to_string_pretty(&summary)?;
    if let Some(dir) = out {
        fs::write(dir.join("summary.json"), &json)?;
    }
    print_run_summary(&summary, out);
    Ok(RunOutcome {
        classification: output.summary.classification,
    })
}

fn trace_of(
    records: &[DiagnosticsRecord<f64>],
    pick: impl Fn(&DiagnosticsRecord<f64>) -> f64,
) -> anyhow::Result<ScalarSeries<f64>> {
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let values: Vec<f64> = records.iter().map(&pick).collect();
    Ok(ScalarSeries::new(times, values)?)
}

fn run_comparisons(
    scn: &Scenario<f64>,
    output: &RunOutput<f64>,
) -> anyhow::Result<ComparisonSummary> {
    let mut cmp = ComparisonSummary {
        v_domination: None,
        u_domination: None,
        v_trace_exceeded_sstar: None,
    };
    let constants = match &output.summary.constants {
        Some(c) => c,
        None => return Ok(cmp),
    };
    if output.records.len() < 2 || output.summary.final_time <= 0.0 {
        return Ok(cmp);
    }
    let t_end = output.summary.final_time;

    if let Some(sstar) = constants.sstar {
        let vinf = trace_of(&output.records, |r| r.v_max)?;
        cmp.v_trace_exceeded_sstar = Some(vinf.values().iter().any(|&v| v > sstar));
        let v_series = integrate_v(&scn.motility, constants, &vinf, t_end)?;
        cmp.v_domination = Some(check_domination(&vinf, &v_series, 0.02)?);
    }
    if output.assumptions.density_cap_applicable() {
        let uinf = trace_of(&output.records, |r| r.u_max)?;
        let u0 = output.records[0].u_max;
        let u_series = integrate_u(&scn.motility, constants.beta1, &uinf, u0, t_end)?;
        cmp.u_domination = Some(check_domination(&uinf, &u_series, 0.02)?);
    }
    Ok(cmp)
}

fn print_run_summary(s: &CliRunSummary, out: Option<&Path>) {
    println!(
        "{}: {:?} after {} steps to t = {:.4} ({:.1} s)",
        s.name, s.classification, s.steps, s.final_time, s.wall_clock_sec
    );
    println!(
        "  peaks: u_max {:.6e}, v_max {:.6e}, mass {:.6e}; mass-law defect {:.2e}",
        s.peak.u_max, s.peak.v_max, s.peak.mass_max, s.mass_law_max_defect
    );
    if let Some(b) = &s.bound_report {
        if let Some(v) = &b.v_bound {
            println!(
                "  v-bound: worst {:.4} vs cap {:.4} ({}; margin {:+.2}%)",
                v.worst,
                v.cap,
                if v.pass { "pass" } else { "FAIL" },
                100.0 * v.margin
            );
        }
        if let Some(u) = &b.u_cap {
            println!(
                "  u-cap:   worst {:.4} vs cap {:.4} ({}; margin {:+.2}%)",
                u.worst,
                u.cap,
                if u.pass { "pass" } else { "FAIL" },
                100.0 * u.margin
            );
        }
    }
    if let Some(c) = &s.comparison {
        if let Some(v) = &c.v_domination {
            println!(
                "  V domination: max violation {:.3e} at t = {:.3} ({})",
                v.max_violation,
                v.worst_time,
                if v.pass { "pass" } else { "FAIL" }
            );
        }
        if let Some(u) = &c.u_domination {
            println!(
                "  U domination: max violation {:.3e} at t = {:.3} ({})",
                u.max_violation,
                u.worst_time,
                if u.pass { "pass" } else { "FAIL" }
            );
        }
    }
    for w in &s.assumptions.warnings {
        println!("  warning: {w}");
    }
    if let Some(note) = &s.constants_note {
        println!("  note: {note}");
    }
    if let Some(dir) = out {
        println!("  outputs in {}", dir.display());
    }
}

struct SweepRow {
    index: usize,
    values: Vec<f64>,
    status: String,
    classification: Option<Regime>,
    peak_u_max: f64,
    peak_v_max: f64,
    v_margin: Option<f64>,
    u_margin: Option<f64>,
}

/// Cartesian-product sweep; rows are emitted in axis order regardless of
/// worker completion order.
pub fn cmd_sweep(
    base: &Scenario<f64>,
    sweep: &SweepSection,
    out: Option<&Path>,
    threads: usize,
) -> anyhow::Result<()> {
    if sweep.axes.is_empty() {
        anyhow::bail!("sweep needs at least one axis");
    }
    let total: usize = sweep.axes.iter().map(|a| a.values.len()).product();
    if total == 0 {
        anyhow::bail!("sweep axes must be non-empty");
    }
    if total > sweep.max_runs {
        anyhow::bail!("sweep of {total} runs exceeds max_runs = {}", sweep.max_runs);
    }

    // Enumerate the cartesian product, last axis fastest.
    let mut combos: Vec<Vec<f64>> = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let mut combo = vec![0.0; sweep.axes.len()];
        for (a, axis) in sweep.axes.iter().enumerate().rev() {
            combo[a] = axis.values[rest % axis.values.len()];
            rest /= axis.values.len();
        }
        combos.push(combo);
    }

    if let Some(dir) = out {
        ensure_dir(dir)?;
    }

    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new((0..total).map(|_| None).collect());
    let workers = threads.max(1).min(total);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= total {
                    break;
                }
                let row = sweep_one(base, sweep, idx, &combos[idx], out);
                rows.lock().unwrap()[idx] = Some(row);
            });
        }
    });

    let rows = rows.into_inner().unwrap();
    let mut csv = String::new();
    let names: Vec<&str> = sweep.axes.iter().map(|a| a.param.as_str()).collect();
    csv.push_str("run,");
    csv.push_str(&names.join(","));
    csv.push_str(",status,classification,peak_u_max,peak_v_max,v_bound_margin,u_cap_margin\n");
    for row in rows.iter().flatten() {
        let class = row
            .classification
            .map(|c| format!("{c:?}"))
            .unwrap_or_default();
        let fmt_opt = |m: Option<f64>| m.map(|v| format!("{v}")).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.index,
            row.values
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(","),
            row.status,
            class,
            row.peak_u_max,
            row.peak_v_max,
            fmt_opt(row.v_margin),
            fmt_opt(row.u_margin),
        ));
    }
    match out {
        Some(dir) => {
            fs::write(dir.join("sweep.csv"), &csv)?;
            println!("{total} runs; table in {}", dir.join("sweep.csv").display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn sweep_one(
    base: &Scenario<f64>,
    sweep: &SweepSection,
    index: usize,
    values: &[f64],
    out: Option<&Path>,
) -> SweepRow {
    let mut row = SweepRow {
        index,
        values: values.to_vec(),
        status: "ok".into(),
        classification: None,
        peak_u_max: f64::NAN,
        peak_v_max: f64::NAN,
        v_margin: None,
        u_margin: None,
    };
    let mut scn = base.clone();
    for (axis, &v) in sweep.axes.iter().zip(values) {
        if let Err(e) = apply_sweep_param(&mut scn, &axis.param, v) {
            row.status = format!("config error: {e}");
            return row;
        }
    }
    scn.name = format!("{}-{index:03}", base.name);
    let run_dir = out.map(|d| d.join("runs").join(format!("{index:03}")));
    let result = cmd_run_quiet(&scn, run_dir.as_deref());
    match result {
        Ok(summary) => {
            row.classification = Some(summary.classification);
            row.peak_u_max = summary.peak.u_max;
            row.peak_v_max = summary.peak.v_max;
            if let Some(b) = &summary.bound_report {
                row.v_margin = b.v_bound.as_ref().map(|c| c.margin);
                row.u_margin = b.u_cap.as_ref().map(|c| c.margin);
            }
        }
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

/// `cmd_run` without console output; sweep rows carry the result instead.
fn cmd_run_quiet(scn: &Scenario<f64>, out: Option<&Path>) -> anyhow::Result<CliRunSummary> {
    let started = Instant::now();
    let config = RunConfig::from_scenario(scn);
    if let Some(dir) = out {
        ensure_dir(dir)?;
        fs::write(dir.join("config.toml"), config.to_toml()?)?;
    }
    let mut sink = FileSink::new(out)?;
    let output = run_scenario(scn, &mut sink)?;
    let (records, snapshots) = sink.finish()?;
    let mut summary = CliRunSummary::from_parts(
        &output.summary,
        &output.assumptions,
        records,
        scn.name.clone(),
        config,
    );
    summary.outputs.snapshots = snapshots;
    if let Some(constants) = &output.summary.constants {
        summary.bound_report = Some(check_theory_bounds(
            &output.records,
            constants,
            &output.assumptions,
            DEFAULT_BOUND_TOL,
        )?);
    }
    if scn.comparison {
        summary.comparison = Some(run_comparisons(scn, &output)?);
    }
    summary.wall_clock_sec = started.elapsed().as_secs_f64();
    if let Some(dir) = out {
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(summary)
}
