//! Monitored functionals, the key-identity consistency residual, checks of
//! the constructive bounds, and the bounded/growing classifier.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constants::TheoryConstants;
use crate::elliptic::{grad_sq_norm, integrate, integrate_by, HelmholtzSolver};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::{AssumptionReport, MotilitySpec, SourceSpec};
use crate::scalar::Real;
use crate::stepper::State;

/// Default slack for the numeric bound checks.
pub const DEFAULT_BOUND_TOL: f64 = 0.05;

/// Absolute epsilon used by plateau verdicts.
pub const PLATEAU_ABS_EPS: f64 = 1e-9;

/// One time-stamped row of all monitored functionals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiagnosticsRecord<R> {
    pub t: R,
    /// `int u`.
    pub mass: R,
    pub u_max: R,
    pub u_min: R,
    pub v_max: R,
    /// `int u log u` with `0 log 0 := 0`.
    pub entropy: R,
    /// `int (|grad v|^2 + v^2)`.
    pub dirichlet: R,
    /// `int u f(u)`.
    pub uf_int: R,
    /// Max-norm defect of `v_t + gamma(v) u = A^{-1}[gamma(v) u - u f(u)]`;
    /// absent without a predecessor state.
    pub ki_residual: Option<R>,
    /// Step size that produced this state (0 for the initial record).
    pub dt: R,
}

impl<R: Real> DiagnosticsRecord<R> {
    pub const CSV_HEADER: &'static str =
        "t,mass,u_max,u_min,v_max,entropy,dirichlet,uf_int,ki_residual,dt";

    pub fn to_csv_row(&self) -> String {
        let ki = match self.ki_residual {
            Some(r) => format!("{r}"),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.mass,
            self.u_max,
            self.u_min,
            self.v_max,
            self.entropy,
            self.dirichlet,
            self.uf_int,
            ki,
            self.dt
        )
    }
}

/// Compute all monitored functionals for a state. `prev`, when given, must be
/// the state exactly one step earlier and enables the key-identity residual.
pub fn record<R: Real>(
    state: &State<R>,
    m: &MotilitySpec<R>,
    f: &SourceSpec<R>,
    prev: Option<&State<R>>,
) -> Result<DiagnosticsRecord<R>> {
    let mut solver = HelmholtzSolver::new(*state.grid());
    record_with_solver(state, m, f, prev, &mut solver)
}

/// As [`record`], reusing a caller-owned Helmholtz solver.
pub fn record_with_solver<R: Real>(
    state: &State<R>,
    m: &MotilitySpec<R>,
    f: &SourceSpec<R>,
    prev: Option<&State<R>>,
    solver: &mut HelmholtzSolver<R>,
) -> Result<DiagnosticsRecord<R>> {
    let (ki_residual, dt) = match prev {
        Some(p) => (
            Some(key_identity_residual_with_solver(p, state, m, f, solver)?),
            state.t - p.t,
        ),
        None => (None, R::zero()),
    };
    Ok(DiagnosticsRecord {
        t: state.t,
        mass: integrate(&state.u),
        u_max: state.u.max(),
        u_min: state.u.min(),
        v_max: state.v.max(),
        entropy: integrate_by(&state.u, |x| if x > R::zero() { x * x.ln() } else { R::zero() }),
        dirichlet: grad_sq_norm(&state.v) + integrate_by(&state.v, |x| x * x),
        uf_int: integrate_by(&state.u, |x| x * f.eval_unchecked(x)),
        ki_residual,
        dt,
    })
}

/// Max-norm defect of the reformulated signal equation between two
/// consecutive states, evaluated explicitly at the earlier time:
/// `(v1 - v0)/dt + gamma(v0) u0 - A^{-1}[gamma(v0) u0 - u0 f(u0)]`.
pub fn key_identity_residual<R: Real>(
    prev: &State<R>,
    next: &State<R>,
    m: &MotilitySpec<R>,
    f: &SourceSpec<R>,
) -> Result<R> {
    let mut solver = HelmholtzSolver::new(*prev.grid());
    key_identity_residual_with_solver(prev, next, m, f, &mut solver)
}

pub fn key_identity_residual_with_solver<R: Real>(
    prev: &State<R>,
    next: &State<R>,
    m: &MotilitySpec<R>,
    f: &SourceSpec<R>,
    solver: &mut HelmholtzSolver<R>,
) -> Result<R> {
    if prev.grid() != next.grid() {
        return Err(Error::Input("states live on different grids".into()));
    }
    let dt = next.t - prev.t;
    if !(dt > R::zero()) {
        return Err(Error::Input(
            "key-identity residual needs consecutive states with dt > 0".into(),
        ));
    }
    let n = prev.grid().total_cells();
    let u0 = prev.u.values();
    let v0 = prev.v.values();
    let v1 = next.v.values();
    let mut rhs = Field::zeros(*prev.grid());
    {
        let r = rhs.values_mut();
        for i in 0..n {
            let w = m.eval_unchecked(v0[i]) * u0[i];
            r[i] = w - u0[i] * f.eval_unchecked(u0[i]);
        }
    }
    let z = solver.solve(&rhs)?;
    let zv = z.values();
    let mut worst = R::zero();
    for i in 0..n {
        let w = m.eval_unchecked(v0[i]) * u0[i];
        let defect = (v1[i] - v0[i]) / dt + w - zv[i];
        worst = worst.max(defect.abs());
    }
    Ok(worst)
}

/// Classifier verdict for a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Bounded,
    Growing,
    Overflowed,
    Inconclusive,
}

/// Thresholds for [`classify_regime`]. These are reporting conventions, not
/// model constants, and are echoed into every summary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "R: Real + serde::Deserialize<'de>"))]
pub struct ClassifierConfig<R> {
    /// Trajectories shorter than this are inconclusive.
    pub min_time: R,
    /// Relative variation of `u_max` over the final half that still counts
    /// as a plateau.
    pub plateau_tol: R,
    /// Overall growth of `u_max` that counts as growing.
    pub growth_factor: R,
    /// `u_max` level treated as a finite-resolution blowup.
    pub overflow_cap: R,
}

impl<R: Real> Default for ClassifierConfig<R> {
    fn default() -> Self {
        Self {
            min_time: R::one(),
            plateau_tol: R::lit(0.01),
            growth_factor: R::lit(5.0),
            overflow_cap: R::lit(1e12),
        }
    }
}

/// Relative plateau test on a min/max pair, with a small absolute epsilon so
/// quantities that decay to zero still count as settled.
pub fn is_plateau<R: Real>(min: R, max: R, tol: R) -> bool {
    (max - min) <= tol * max.abs().max(min.abs()) + R::lit(PLATEAU_ABS_EPS)
}

/// Classify a trajectory: `Bounded` when `u_max` plateaus over the final half
/// without ever tripping the overflow cap, `Growing` on a sustained rise of
/// at least `growth_factor`, `Overflowed` when the cap tripped, otherwise
/// `Inconclusive`.
pub fn classify_regime<R: Real>(
    records: &[DiagnosticsRecord<R>],
    cfg: &ClassifierConfig<R>,
) -> Regime {
    if records.is_empty() {
        return Regime::Inconclusive;
    }
    if records
        .iter()
        .any(|r| !r.u_max.is_finite() || r.u_max >= cfg.overflow_cap)
    {
        return Regime::Overflowed;
    }
    let t0 = records[0].t;
    let t1 = records[records.len() - 1].t;
    let span = t1 - t0;
    if span < cfg.min_time {
        return Regime::Inconclusive;
    }

    let half = t0 + span * R::lit(0.5);
    let mut hmin = R::infinity();
    let mut hmax = R::neg_infinity();
    for r in records.iter().filter(|r| r.t >= half) {
        hmin = hmin.min(r.u_max);
        hmax = hmax.max(r.u_max);
    }
    if is_plateau(hmin, hmax, cfg.plateau_tol) {
        return Regime::Bounded;
    }

    let start = records[0].u_max.max(R::lit(1e-300));
    let growth = records[records.len() - 1].u_max / start;
    let quarter = t0 + span * R::lit(0.75);
    let quarter_start = records
        .iter()
        .find(|r| r.t >= quarter)
        .map(|r| r.u_max)
        .unwrap_or(hmax);
    let trending_up = records[records.len() - 1].u_max > quarter_start;
    if growth >= cfg.growth_factor && trending_up {
        return Regime::Growing;
    }
    Regime::Inconclusive
}

/// Single numeric cap check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundCheck<R> {
    /// The cap being enforced.
    pub cap: R,
    /// Worst observed value.
    pub worst: R,
    /// `worst / cap - 1`; negative means the bound held with room.
    pub margin: R,
    pub pass: bool,
}

impl<R: Real> BoundCheck<R> {
    fn new(cap: R, worst: R, tol: R) -> Self {
        Self {
            cap,
            worst,
            margin: worst / cap - R::one(),
            pass: worst <= cap * (R::one() + tol),
        }
    }
}

/// Finiteness and plateau verdict for one monitored functional.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FunctionalVerdict<R> {
    pub finite: bool,
    pub plateau: bool,
    pub final_half_min: R,
    pub final_half_max: R,
}

/// Per-bound verdicts for one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport<R> {
    /// `v_max <= v* (1 + tol)`; present whenever the source diverges.
    pub v_bound: Option<BoundCheck<R>>,
    /// `u_max <= max(u_in_max, beta1) (1 + tol)`; present for a
    /// non-decreasing concave motility.
    pub u_cap: Option<BoundCheck<R>>,
    pub mass: FunctionalVerdict<R>,
    pub entropy: FunctionalVerdict<R>,
    pub dirichlet: FunctionalVerdict<R>,
    pub uf_int: FunctionalVerdict<R>,
    pub tol: R,
}

fn functional_verdict<R: Real>(
    records: &[DiagnosticsRecord<R>],
    half: R,
    tol: R,
    pick: impl Fn(&DiagnosticsRecord<R>) -> R,
) -> FunctionalVerdict<R> {
    let mut finite = true;
    let mut fmin = R::infinity();
    let mut fmax = R::neg_infinity();
    for r in records {
        let v = pick(r);
        finite &= v.is_finite();
        if r.t >= half {
            fmin = fmin.min(v);
            fmax = fmax.max(v);
        }
    }
    FunctionalVerdict {
        finite,
        plateau: finite && is_plateau(fmin, fmax, tol),
        final_half_min: fmin,
        final_half_max: fmax,
    }
}

/// Check a trajectory against the constructive caps and the plateau
/// expectations. Which caps apply is decided by the assumption flags.
pub fn check_theory_bounds<R: Real>(
    records: &[DiagnosticsRecord<R>],
    constants: &TheoryConstants<R>,
    flags: &AssumptionReport,
    tol: R,
) -> Result<BoundReport<R>> {
    if records.is_empty() {
        return Err(Error::Input("empty trajectory".into()));
    }
    let t0 = records[0].t;
    let t1 = records[records.len() - 1].t;
    let half = t0 + (t1 - t0) * R::lit(0.5);

    let v_bound = if flags.f_diverges && flags.gamma_positive {
        let worst = records
            .iter()
            .map(|r| r.v_max)
            .fold(R::neg_infinity(), R::max);
        Some(BoundCheck::new(constants.vstar, worst, tol))
    } else {
        None
    };

    let u_cap = if flags.density_cap_applicable() {
        let cap = records[0].u_max.max(constants.beta1);
        let worst = records
            .iter()
            .map(|r| r.u_max)
            .fold(R::neg_infinity(), R::max);
        Some(BoundCheck::new(cap, worst, tol))
    } else {
        None
    };

    let plateau_tol = R::lit(0.01);
    Ok(BoundReport {
        v_bound,
        u_cap,
        mass: functional_verdict(records, half, plateau_tol, |r| r.mass),
        entropy: functional_verdict(records, half, plateau_tol, |r| r.entropy),
        dirichlet: functional_verdict(records, half, plateau_tol, |r| r.dirichlet),
        uf_int: functional_verdict(records, half, plateau_tol, |r| r.uf_int),
        tol,
    })
}

/// Receives diagnostics rows and snapshot requests during a run.
pub trait DiagnosticsSink<R: Real> {
    fn on_record(&mut self, rec: &DiagnosticsRecord<R>) -> Result<()>;
    fn on_snapshot(&mut self, _state: &State<R>) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl<R: Real> DiagnosticsSink<R> for NullSink {
    fn on_record(&mut self, _rec: &DiagnosticsRecord<R>) -> Result<()> {
        Ok(())
    }
}

/// Streams records as CSV with the fixed column order.
pub struct CsvSink<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            header_written: false,
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<R: Real, W: Write> DiagnosticsSink<R> for CsvSink<W> {
    fn on_record(&mut self, rec: &DiagnosticsRecord<R>) -> Result<()> {
        if !self.header_written {
            writeln!(self.out, "{}", DiagnosticsRecord::<R>::CSV_HEADER)?;
            self.header_written = true;
        }
        writeln!(self.out, "{}", rec.to_csv_row())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::stepper::{advance, StepConfig};
    use approx::assert_relative_eq;

    fn mk_state(values: Vec<f64>, grid: Grid<f64>) -> State<f64> {
        let u = Field::from_values(grid, values).unwrap();
        let mut solver = HelmholtzSolver::new(grid);
        State::initial(u, &mut solver).unwrap()
    }

    #[test]
    fn constant_state_functionals() {
        let g = Grid::new_1d(1.0f64, 32).unwrap();
        let c = 3.0;
        let st = mk_state(vec![c; 32], g);
        let m = MotilitySpec::Constant { c: 1.0 };
        let f = SourceSpec::Zero;
        let r = record(&st, &m, &f, None).unwrap();
        assert_relative_eq!(r.mass, c, max_relative = 1e-13);
        assert_relative_eq!(r.entropy, c * c.ln(), max_relative = 1e-12);
        assert_relative_eq!(r.u_max, c, max_relative = 1e-14);
        assert!(r.ki_residual.is_none());
    }

    #[test]
    fn entropy_is_zero_at_unit_density_and_jensen_holds() {
        let g = Grid::new_1d(1.0f64, 32).unwrap();
        let st = mk_state(vec![1.0; 32], g);
        let r = record(&st, &MotilitySpec::Constant { c: 1.0 }, &SourceSpec::Zero, None).unwrap();
        assert!(r.entropy.abs() < 1e-14);

        // Jensen: int u log u >= mass log(mass / |domain|).
        let bump: Vec<f64> = (0..32)
            .map(|i| {
                let x = (i as f64 + 0.5) / 32.0;
                0.05 + 20.0 * (-(x - 0.5) * (x - 0.5) / 0.01).exp()
            })
            .collect();
        let st = mk_state(bump, g);
        let r = record(&st, &MotilitySpec::Constant { c: 1.0 }, &SourceSpec::Zero, None).unwrap();
        assert!(r.entropy >= r.mass * (r.mass / 1.0).ln() - 1e-12);
    }

    #[test]
    fn stationary_fixed_point_has_tiny_residual() {
        let g = Grid::new_1d(1.0f64, 64).unwrap();
        let c = 2.0f64;
        // mu chosen so f(c) evaluates to exactly zero.
        let mu = (1.0 + c).ln();
        let f = SourceSpec::LogPower {
            lambda: 1.0,
            alpha: 1.0,
            mu,
        };
        let m = MotilitySpec::ExpDecay { chi: 1.0 };
        let st = mk_state(vec![c; 64], g);
        let next = advance(&st, &m, &f, &StepConfig::default()).unwrap();
        let res = key_identity_residual(&st, &next, &m, &f).unwrap();
        assert!(res <= 1e-10, "residual {res}");
    }

    #[test]
    fn residual_requires_consecutive_states() {
        let g = Grid::new_1d(1.0f64, 16).unwrap();
        let st = mk_state(vec![1.0; 16], g);
        let same = st.clone();
        assert!(key_identity_residual(
            &st,
            &same,
            &MotilitySpec::Constant { c: 1.0 },
            &SourceSpec::Zero
        )
        .is_err());
    }

    fn rec(t: f64, u_max: f64) -> DiagnosticsRecord<f64> {
        DiagnosticsRecord {
            t,
            mass: 1.0,
            u_max,
            u_min: 0.0,
            v_max: 1.0,
            entropy: 0.0,
            dirichlet: 1.0,
            uf_int: 0.5,
            ki_residual: None,
            dt: 0.1,
        }
    }

    #[test]
    fn classifier_on_canonical_shapes() {
        let cfg = ClassifierConfig::default();
        let flat: Vec<_> = (0..100).map(|i| rec(i as f64 * 0.1, 2.0)).collect();
        assert_eq!(classify_regime(&flat, &cfg), Regime::Bounded);

        // Doubling every unit of time for 5 units: 32x overall.
        let doubling: Vec<_> = (0..=50)
            .map(|i| {
                let t = i as f64 * 0.1;
                rec(t, 2.0f64.powf(t))
            })
            .collect();
        assert_eq!(classify_regime(&doubling, &cfg), Regime::Growing);

        let mut capped = flat.clone();
        capped.push(rec(10.1, 1e12));
        assert_eq!(classify_regime(&capped, &cfg), Regime::Overflowed);

        let short: Vec<_> = (0..3).map(|i| rec(i as f64 * 0.1, 2.0)).collect();
        assert_eq!(classify_regime(&short, &cfg), Regime::Inconclusive);
    }

    #[test]
    fn csv_rows_follow_the_fixed_header() {
        let mut sink = CsvSink::new(Vec::new());
        DiagnosticsSink::<f64>::on_record(&mut sink, &rec(0.0, 1.0)).unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,mass,u_max,u_min,v_max,entropy,dirichlet,uf_int,ki_residual,dt"
        );
        // ki_residual slot stays empty without a predecessor.
        assert_eq!(lines.next().unwrap(), "0,1,1,0,1,0,1,0.5,,0.1");
    }

    #[test]
    fn bound_report_flags_margins() {
        use crate::constants::{compute_constants, ScanConfig};
        use crate::model::check_assumptions;
        let m = MotilitySpec::LogGrowth { c: 1.0 };
        let f = SourceSpec::LogPower {
            lambda: 1.0,
            alpha: 1.0,
            mu: 0.0,
        };
        let constants = compute_constants(&m, &f, 2.0, &ScanConfig::default()).unwrap();
        let flags = check_assumptions(&m, &f, 50.0, 64).unwrap();
        let records: Vec<_> = (0..=100)
            .map(|i| {
                let mut r = rec(i as f64 * 0.1, 3.0);
                r.v_max = constants.vstar * 0.5;
                r
            })
            .collect();
        let report = check_theory_bounds(&records, &constants, &flags, 0.05).unwrap();
        let v = report.v_bound.unwrap();
        assert!(v.pass);
        assert!(v.margin < -0.4);
        let u = report.u_cap.unwrap();
        // Constant u_max trace equals its own cap: margin 0 within rounding.
        assert!(u.pass);
        assert!(u.margin.abs() < 1e-12);
        assert!(report.mass.plateau);
    }
}
