//! Positivity-preserving time stepping for the coupled system.
//!
//! One step, from `(u, v)` at time `t`:
//!
//! 1. `w = gamma(v) u`, `d = laplace_h(w)` with the Neumann stencil;
//! 2. split the source pointwise, `f(u) = f_plus - f_minus`, and update
//!    `u_new = (u + dt d + dt u f_minus) / (1 + dt f_plus)` (degradation
//!    implicit, growth explicit);
//! 3. re-solve the elliptic constraint `v_new - laplace(v_new) = u_new`.
//!
//! Under the diffusion CFL `dt <= cfl h^2 / (2 dim max gamma(v))` every term
//! of the numerator is non-negative, so the update preserves positivity
//! unconditionally in the degradation. Diffusion moves mass through shared
//! face fluxes and therefore contributes exactly zero to the discrete mass
//! balance, which makes the per-step mass law verifiable to near machine
//! precision.

use serde::{Deserialize, Serialize};

use crate::elliptic::{laplacian_kernel_into, HelmholtzSolver};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{MotilitySpec, SourceSpec};
use crate::scalar::{kahan_sum, Real};

/// How the source term is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityMode {
    /// Degradation implicit, growth explicit; unconditionally positive under
    /// the diffusion CFL.
    ImplicitDegradation,
    /// Fully explicit source, with a hard error on any negative cell. Used
    /// for consistency-residual convergence studies.
    FullyExplicit,
}

/// Time-stepping configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "R: Real + serde::Deserialize<'de>"))]
pub struct StepConfig<R> {
    /// Safety factor in `(0, 1]` multiplying the diffusion CFL limit.
    pub cfl_safety: R,
    /// Absolute cap on the step size.
    pub dt_max: R,
    pub positivity_mode: PositivityMode,
    /// Emit a diagnostics record every this many steps.
    pub diagnostics_stride: usize,
}

impl<R: Real> Default for StepConfig<R> {
    fn default() -> Self {
        Self {
            cfl_safety: R::lit(0.9),
            dt_max: R::infinity(),
            positivity_mode: PositivityMode::ImplicitDegradation,
            diagnostics_stride: 1,
        }
    }
}

impl<R: Real> StepConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > R::zero() && self.cfl_safety <= R::one()) {
            return Err(Error::InvalidParameter(
                "cfl_safety must lie in (0, 1]".into(),
            ));
        }
        if !(self.dt_max > R::zero()) {
            return Err(Error::InvalidParameter("dt_max must be positive".into()));
        }
        if self.diagnostics_stride == 0 {
            return Err(Error::InvalidParameter(
                "diagnostics_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The pair `(u, v)` at a time `t`; `v` is always the Helmholtz image of `u`
/// up to solver tolerance, and both fields are non-negative.
#[derive(Debug, Clone)]
pub struct State<R> {
    pub t: R,
    pub u: Field<R>,
    pub v: Field<R>,
}

impl<R: Real> State<R> {
    /// Build the initial state from a density field, solving for the signal.
    pub fn initial(u: Field<R>, solver: &mut HelmholtzSolver<R>) -> Result<Self> {
        if !u.is_finite() {
            return Err(Error::NonFinite("initial density".into()));
        }
        if u.min() < R::zero() {
            return Err(Error::Assumption("initial density has negative cells".into()));
        }
        let mut v = Field::zeros(*u.grid());
        solver.solve_into(&u, &mut v)?;
        clamp_tiny_negatives(&mut v);
        Ok(Self {
            t: R::zero(),
            u,
            v,
        })
    }

    pub fn grid(&self) -> &Grid<R> {
        self.u.grid()
    }
}

/// The solved signal is non-negative by the discrete maximum principle; CG
/// noise at the solver tolerance may undershoot, so tiny negatives are
/// floored before the motility sees them.
fn clamp_tiny_negatives<R: Real>(v: &mut Field<R>) {
    for x in v.values_mut() {
        if *x < R::zero() {
            *x = R::zero();
        }
    }
}

fn active_inv_h2_sum<R: Real>(grid: &Grid<R>) -> R {
    let [nx, ny] = grid.cells();
    let h = grid.spacing();
    let mut sum = R::zero();
    if nx > 1 {
        sum = sum + R::one() / (h[0] * h[0]);
    }
    if ny > 1 {
        sum = sum + R::one() / (h[1] * h[1]);
    }
    sum
}

fn cfl_dt<R: Real>(grid: &Grid<R>, gamma_max: R, cfg: &StepConfig<R>) -> R {
    let dt = cfg.cfl_safety / (R::lit(2.0) * gamma_max * active_inv_h2_sum(grid));
    dt.min(cfg.dt_max)
}

/// Largest step keeping the explicit diffusion of `gamma(v) u` positive:
/// `cfl_safety * h^2 / (2 dim max gamma(v))`, clamped by `dt_max`.
pub fn adaptive_dt<R: Real>(
    state: &State<R>,
    m: &MotilitySpec<R>,
    cfg: &StepConfig<R>,
) -> Result<R> {
    cfg.validate()?;
    let mut gmax = R::zero();
    for &v in state.v.values() {
        gmax = gmax.max(m.eval(v)?);
    }
    Ok(cfl_dt(state.grid(), gmax, cfg))
}

/// Per-step bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct StepStats<R> {
    pub dt: R,
    /// Relative defect of the discrete mass law
    /// `int(u_new) - int(u) = -dt int(u_new f_plus(u) - u f_minus(u))`.
    pub mass_defect_rel: R,
}

/// Reusable stepper bound to one grid and one model; holds the Helmholtz
/// solver and all work buffers so the time loop allocates nothing.
pub struct Stepper<R> {
    grid: Grid<R>,
    m: MotilitySpec<R>,
    f: SourceSpec<R>,
    cfg: StepConfig<R>,
    helmholtz: HelmholtzSolver<R>,
    w: Vec<R>,
    lap: Vec<R>,
    f_plus: Vec<R>,
    f_minus: Vec<R>,
}

impl<R: Real> Stepper<R> {
    pub fn new(
        grid: Grid<R>,
        m: MotilitySpec<R>,
        f: SourceSpec<R>,
        cfg: StepConfig<R>,
    ) -> Result<Self> {
        m.validate()?;
        f.validate()?;
        cfg.validate()?;
        let n = grid.total_cells();
        Ok(Self {
            grid,
            m,
            f,
            cfg,
            helmholtz: HelmholtzSolver::new(grid),
            w: vec![R::zero(); n],
            lap: vec![R::zero(); n],
            f_plus: vec![R::zero(); n],
            f_minus: vec![R::zero(); n],
        })
    }

    pub fn config(&self) -> &StepConfig<R> {
        &self.cfg
    }

    pub fn helmholtz(&mut self) -> &mut HelmholtzSolver<R> {
        &mut self.helmholtz
    }

    /// Advance `state` by one step into `next`, with `dt` additionally capped
    /// by `dt_cap` (the runner uses this to land exactly on the horizon).
    pub fn step_into(
        &mut self,
        state: &State<R>,
        next: &mut State<R>,
        dt_cap: R,
    ) -> Result<StepStats<R>> {
        if !(dt_cap > R::zero()) {
            return Err(Error::Step("dt cap must be positive".into()));
        }
        let n = self.grid.total_cells();
        let u = state.u.values();
        let v = state.v.values();

        // Motility field and its maximum drive both w and the CFL limit.
        let mut gmax = R::zero();
        for i in 0..n {
            let g = self.m.eval_unchecked(v[i]);
            self.w[i] = g * u[i];
            gmax = gmax.max(g);
        }
        if !gmax.is_finite() {
            return Err(Error::NonFinite("motility field".into()));
        }
        let dt = cfl_dt(&self.grid, gmax, &self.cfg).min(dt_cap);

        laplacian_kernel_into(&self.grid, &self.w, &mut self.lap);

        let explicit = self.cfg.positivity_mode == PositivityMode::FullyExplicit;
        let unew = next.u.values_mut();
        for i in 0..n {
            let fs = self.f.eval_unchecked(u[i]);
            let fp = fs.max(R::zero());
            let fm = (-fs).max(R::zero());
            self.f_plus[i] = fp;
            self.f_minus[i] = fm;
            let mut val = if explicit {
                u[i] + dt * (self.lap[i] - u[i] * fs)
            } else {
                (u[i] + dt * self.lap[i] + dt * u[i] * fm) / (R::one() + dt * fp)
            };
            if val < R::zero() {
                if explicit {
                    return Err(Error::Step(format!(
                        "explicit source drove cell {i} negative ({}); reduce dt",
                        val.as_f64()
                    )));
                }
                // CFL guarantees non-negativity in exact arithmetic; anything
                // below is rounding at the last ulp.
                if val >= -R::lit(1e-13) * (R::one() + u[i]) {
                    val = R::zero();
                } else {
                    return Err(Error::Step(format!(
                        "positivity lost at cell {i}: {}",
                        val.as_f64()
                    )));
                }
            }
            unew[i] = val;
        }

        let mut umax_new = R::zero();
        for &x in unew.iter() {
            umax_new = umax_new.max(x);
        }
        if !umax_new.is_finite() {
            return Err(Error::NonFinite("density overflow".into()));
        }

        // Discrete mass law defect, relative to the mass scale.
        let vol = self.grid.cell_volume();
        let mass_old = kahan_sum(u) * vol;
        let mass_new = kahan_sum(unew) * vol;
        let mut src = R::zero();
        let mut comp = R::zero();
        for i in 0..n {
            let term = unew[i] * self.f_plus[i] - u[i] * self.f_minus[i];
            let y = term - comp;
            let t = src + y;
            comp = (t - src) - y;
            src = t;
        }
        let src_int = src * vol;
        let defect = mass_new - mass_old + dt * src_int;
        let scale = mass_old.abs().max(mass_new.abs()).max(R::lit(1e-300));
        let stats = StepStats {
            dt,
            mass_defect_rel: (defect / scale).abs(),
        };

        self.helmholtz.solve_into(&next.u, &mut next.v)?;
        clamp_tiny_negatives(&mut next.v);
        next.t = state.t + dt;
        Ok(stats)
    }
}

/// One-shot advance; build a [`Stepper`] for time loops.
pub fn advance<R: Real>(
    state: &State<R>,
    m: &MotilitySpec<R>,
    f: &SourceSpec<R>,
    cfg: &StepConfig<R>,
) -> Result<State<R>> {
    let mut stepper = Stepper::new(*state.grid(), *m, *f, *cfg)?;
    let mut next = state.clone();
    stepper.step_into(state, &mut next, R::infinity())?;
    Ok(next)
}
