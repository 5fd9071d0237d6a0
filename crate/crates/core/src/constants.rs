//! Constructive constants for the boundedness bounds.
//!
//! Every constant that the comparison arguments make explicit is computed
//! here by dense scan with adaptive refinement: the lower-bound constant
//! `b1(a1, alpha, beta)` with `s^alpha f(s) log^beta s >= a1 s^alpha - b1`,
//! its special case `beta1` (so `s <= s f(s) + beta1`), the running-max level
//! `s*` of an unbounded motility, the uniform signal cap `v*`, the motility
//! range `[gamma_lo, gamma_hi]` on `[0, v*]` together with
//! `k_gamma = max |gamma'|^2 / (2 gamma)`, and the increasing/decreasing
//! splitting `gamma_i`, `gamma_d`, `Gamma_d` anchored at `s*`.
//!
//! Scans only ever certify what they see; ranges auto-extend until the tail
//! predicate holds and give up with a divergence error otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MotilitySpec, SourceSpec};
use crate::scalar::Real;

/// Scan resolution for the constant calculators.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanConfig<R> {
    /// Coarse scan step (absolute).
    pub step: R,
    /// Number of 10x refinement rounds around the located extremum.
    pub refine_rounds: usize,
    /// Refinement shrink factor per round.
    pub refine_factor: usize,
    /// Absolute tolerance for located levels.
    pub tol: R,
    /// Upper limit for auto-extended bracket searches.
    pub max_range: R,
}

impl<R: Real> Default for ScanConfig<R> {
    fn default() -> Self {
        Self {
            step: R::lit(1e-4),
            refine_rounds: 3,
            refine_factor: 10,
            tol: R::lit(1e-6),
            max_range: R::lit(1e10),
        }
    }
}

/// Dense scan for a maximum with refinement rounds around the argmax.
fn scan_max<R: Real>(g: impl Fn(R) -> R, lo: R, hi: R, cfg: &ScanConfig<R>) -> (R, R) {
    debug_assert!(hi >= lo);
    if hi == lo {
        return (lo, g(lo));
    }
    let span = hi - lo;
    let mut n = (span / cfg.step).as_f64().ceil() as usize;
    n = n.clamp(64, 400_000);
    let mut step = span / R::from_usize(n).unwrap();
    let mut best_x = lo;
    let mut best = g(lo);
    for i in 1..=n {
        let x = if i == n {
            hi
        } else {
            lo + step * R::from_usize(i).unwrap()
        };
        let v = g(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    for _ in 0..cfg.refine_rounds {
        let wlo = (best_x - step).max(lo);
        let whi = (best_x + step).min(hi);
        let m = 2 * cfg.refine_factor;
        let fine = (whi - wlo) / R::from_usize(m).unwrap();
        for i in 0..=m {
            let x = wlo + fine * R::from_usize(i).unwrap();
            let v = g(x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        step = fine;
    }
    (best_x, best)
}

fn scan_min<R: Real>(g: impl Fn(R) -> R, lo: R, hi: R, cfg: &ScanConfig<R>) -> (R, R) {
    let (x, v) = scan_max(|s| -g(s), lo, hi, cfg);
    (x, -v)
}

/// `log^beta s` for integer `beta >= 0`; the `beta = 0` power is 1 even at
/// `s = 0` where the logarithm itself is singular.
fn log_pow<R: Real>(s: R, beta: i32) -> R {
    if beta == 0 {
        R::one()
    } else {
        s.ln().powi(beta)
    }
}

fn validate_beta<R: Real>(beta: R) -> Result<i32> {
    if beta < R::zero() || !beta.is_finite() || beta.fract() != R::zero() {
        return Err(Error::InvalidParameter(format!(
            "beta must be a non-negative integer value, got {beta}"
        )));
    }
    Ok(beta.as_f64() as i32)
}

/// Smallest `b1 >= 0` with `s^alpha f(s) log^beta s >= a1 s^alpha - b1` on
/// the scanned range, i.e. `b1 = max(0, sup_s [a1 s^alpha - s^alpha f(s) log^beta s])`.
///
/// The supremum is taken over `[0, s0]` where `s0` is the first bracket point
/// past which `f(s) log^beta s` clears `a1` with a factor-two margin; the
/// bracket auto-extends and fails with a divergence error if the source never
/// gets there (violating its divergence assumption).
pub fn compute_b1<R: Real>(
    f: &SourceSpec<R>,
    a1: R,
    alpha: R,
    beta: R,
    scan: &ScanConfig<R>,
) -> Result<R> {
    if !(a1 > R::zero()) || !(alpha > R::zero()) {
        return Err(Error::InvalidParameter(
            "compute_b1 needs a1 > 0 and alpha > 0".into(),
        ));
    }
    let beta = validate_beta(beta)?;
    f.validate()?;

    let margin = a1 * R::lit(2.0);
    let phi = |s: R| f.eval_unchecked(s) * log_pow(s, beta);
    let mut s0 = R::lit(2.0);
    loop {
        if phi(s0) >= margin
            && phi(s0 * R::lit(4.0)) >= margin
            && phi(s0 * R::lit(16.0)) >= margin
        {
            break;
        }
        s0 = s0 * R::lit(2.0);
        if s0 > scan.max_range {
            return Err(Error::ScanDiverged(format!(
                "source never exceeds a1 = {} on [0, {:.1e}]; divergence assumption fails",
                a1.as_f64(),
                scan.max_range.as_f64()
            )));
        }
    }

    // g(0) = 0: s^alpha kills both the source and the log power.
    let g = |s: R| {
        if s <= R::zero() {
            R::zero()
        } else {
            s.powf(alpha) * (a1 - f.eval_unchecked(s) * log_pow(s, beta))
        }
    };
    let (_, sup) = scan_max(g, R::zero(), s0, scan);
    Ok(sup.max(R::zero()))
}

/// The constant `beta1` with `s <= s f(s) + beta1` for all `s >= 0`:
/// [`compute_b1`] at `a1 = 1`, `alpha = 1`, `beta = 0`.
pub fn compute_beta1<R: Real>(f: &SourceSpec<R>) -> Result<R> {
    compute_b1(f, R::one(), R::one(), R::zero(), &ScanConfig::default())
}

/// The level `s* >= max(vin_max, beta1)` at which an unbounded motility
/// attains its running maximum: `gamma(s*) = max_{[0, s*]} gamma`.
///
/// Monotone non-decreasing presets attain the running maximum everywhere, so
/// the result is exactly `max(vin_max, beta1)`; otherwise the level is located
/// by an upward scan that tracks the running maximum.
pub fn compute_sstar<R: Real>(
    m: &MotilitySpec<R>,
    vin_max: R,
    beta1: R,
    scan: &ScanConfig<R>,
) -> Result<R> {
    m.validate()?;
    if m.bounded_at_infinity() {
        return Err(Error::Branch(
            "s* is defined only for motilities unbounded at infinity".into(),
        ));
    }
    if vin_max < R::zero() || beta1 < R::zero() {
        return Err(Error::InvalidParameter(
            "vin_max and beta1 must be non-negative".into(),
        ));
    }
    let lower = vin_max.max(beta1);
    if m.monotone_nondecreasing() {
        return Ok(lower);
    }

    let mut running_max = R::neg_infinity();
    let n0 = ((lower / scan.step).as_f64().ceil() as usize).clamp(64, 400_000);
    let pre_step = if lower > R::zero() {
        lower / R::from_usize(n0).unwrap()
    } else {
        R::zero()
    };
    for i in 0..=n0 {
        let s = if lower > R::zero() {
            (pre_step * R::from_usize(i).unwrap()).min(lower)
        } else {
            R::zero()
        };
        running_max = running_max.max(m.eval_unchecked(s));
        if lower == R::zero() {
            break;
        }
    }

    let mut s = lower;
    loop {
        let g = m.eval_unchecked(s);
        if g >= running_max - scan.tol {
            return Ok(s);
        }
        running_max = running_max.max(g);
        s = s + scan.step;
        if s > scan.max_range {
            return Err(Error::ScanDiverged(
                "running maximum of gamma never recovered".into(),
            ));
        }
    }
}

/// Uniform signal cap `v*`.
///
/// Unbounded motility: `v* = s*`. Bounded motility: the signal obeys the
/// scalar inequality `v' + v <= C` where `C` is `b1` evaluated at
/// `a1 = sup gamma + 1` (the Helmholtz image of a constant is that constant),
/// so `v* = max(vin_max, b1(sup gamma + 1, 1, 0))`.
pub fn compute_vstar<R: Real>(m: &MotilitySpec<R>, f: &SourceSpec<R>, vin_max: R) -> Result<R> {
    let scan = ScanConfig::default();
    Ok(compute_constants(m, f, vin_max, &scan)?.vstar)
}

/// Motility range on `[0, v*]` plus the gradient-control constant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaBounds<R> {
    /// `gamma_lo = min_{[0, v*]} gamma`, positive.
    pub lo: R,
    /// `gamma_hi = max_{[0, v*]} gamma`.
    pub hi: R,
    /// `k_gamma = max_{[0, v*]} |gamma'|^2 / (2 gamma)`.
    pub k_gamma: R,
}

/// Scan the motility range and `k_gamma` on `[0, vstar]`.
pub fn gamma_bounds<R: Real>(m: &MotilitySpec<R>, vstar: R) -> Result<GammaBounds<R>> {
    m.validate()?;
    if !(vstar > R::zero()) {
        return Err(Error::InvalidParameter("vstar must be positive".into()));
    }
    let scan = ScanConfig::default();
    let (_, lo) = scan_min(|s| m.eval_unchecked(s), R::zero(), vstar, &scan);
    let (_, hi) = scan_max(|s| m.eval_unchecked(s), R::zero(), vstar, &scan);
    let (_, k_gamma) = scan_max(
        |s| {
            let p = m.prime_unchecked(s);
            p * p / (R::lit(2.0) * m.eval_unchecked(s))
        },
        R::zero(),
        vstar,
        &scan,
    );
    if !(lo > R::zero()) {
        return Err(Error::Assumption(
            "gamma is not positive on [0, v*]".into(),
        ));
    }
    Ok(GammaBounds { lo, hi, k_gamma })
}

/// Increasing/decreasing splitting of the motility anchored at `s*`:
/// `gamma_i(s) = int_{s*}^{s} (gamma')_+`, `gamma_d(s) = int_{s*}^{s} min(gamma', 0)`
/// for `s >= s*` and zero below, together with the antiderivative
/// `Gamma_d(s) = int_{s*}^{s} gamma_d`.
///
/// On `[s*, inf)` the splitting satisfies `gamma_i >= 0 >= gamma_d`,
/// `gamma(s) = gamma(s*) + gamma_i(s) + gamma_d(s)`, and the chain
/// `0 >= Gamma_d(s) >= (s - s*) gamma_d(s) >= s gamma_d(s)`.
pub struct GammaSplit<R> {
    m: MotilitySpec<R>,
    sstar: R,
    gamma_at_sstar: R,
    monotone: bool,
    step: R,
    s_max: R,
    gi: Vec<R>,
    gd: Vec<R>,
    big_gd: Vec<R>,
}

impl<R: Real> GammaSplit<R> {
    /// Tabulate the splitting on `[sstar, s_max]` by cumulative trapezoid
    /// quadrature of the signed derivative parts. Monotone non-decreasing
    /// presets skip the table: their splitting is closed-form.
    pub fn new(m: &MotilitySpec<R>, sstar: R, s_max: R) -> Result<Self> {
        m.validate()?;
        if sstar < R::zero() {
            return Err(Error::InvalidParameter("sstar must be >= 0".into()));
        }
        let monotone = m.monotone_nondecreasing();
        let s_max = s_max.max(sstar);
        let (step, gi, gd, big_gd) = if monotone {
            (R::one(), Vec::new(), Vec::new(), Vec::new())
        } else {
            let span = (s_max - sstar).max(R::lit(1e-3));
            let n = ((span / R::lit(2e-5)).as_f64().ceil() as usize).clamp(1_000, 2_000_000);
            let step = span / R::from_usize(n).unwrap();
            let mut gi = Vec::with_capacity(n + 1);
            let mut gd = Vec::with_capacity(n + 1);
            let mut big_gd = Vec::with_capacity(n + 1);
            gi.push(R::zero());
            gd.push(R::zero());
            big_gd.push(R::zero());
            let half = R::lit(0.5);
            let mut prev = m.prime_unchecked(sstar);
            for k in 1..=n {
                let s = sstar + step * R::from_usize(k).unwrap();
                let p = m.prime_unchecked(s);
                let gi_prev = gi[k - 1];
                let gd_prev = gd[k - 1];
                gi.push(gi_prev + step * half * (prev.max(R::zero()) + p.max(R::zero())));
                let gd_next = gd_prev + step * half * (prev.min(R::zero()) + p.min(R::zero()));
                gd.push(gd_next);
                big_gd.push(big_gd[k - 1] + step * half * (gd_prev + gd_next));
                prev = p;
            }
            (step, gi, gd, big_gd)
        };
        Ok(Self {
            m: *m,
            sstar,
            gamma_at_sstar: m.eval_unchecked(sstar),
            monotone,
            step,
            s_max,
            gi,
            gd,
            big_gd,
        })
    }

    pub fn sstar(&self) -> R {
        self.sstar
    }

    /// `gamma(s*)`.
    pub fn gamma_at_sstar(&self) -> R {
        self.gamma_at_sstar
    }

    /// `(gamma_i(s), gamma_d(s), Gamma_d(s))`.
    pub fn eval(&self, s: R) -> Result<(R, R, R)> {
        if s < R::zero() {
            return Err(Error::Domain(format!("splitting evaluated at s = {s}")));
        }
        if s < self.sstar {
            return Ok((R::zero(), R::zero(), R::zero()));
        }
        if self.monotone {
            // (gamma')_- vanishes: gamma_i is just the increment of gamma.
            return Ok((
                self.m.eval_unchecked(s) - self.gamma_at_sstar,
                R::zero(),
                R::zero(),
            ));
        }
        if s > self.s_max + self.step {
            return Err(Error::Input(format!(
                "splitting table covers [{}, {}], got s = {}",
                self.sstar.as_f64(),
                self.s_max.as_f64(),
                s.as_f64()
            )));
        }
        let u = (s - self.sstar) / self.step;
        let last = self.gi.len() - 1;
        let k = (u.as_f64().floor() as usize).min(last - 1);
        let frac = u - R::from_usize(k).unwrap();
        let gi = self.gi[k] + (self.gi[k + 1] - self.gi[k]) * frac;
        let gd_node = self.gd[k];
        let gd = gd_node + (self.gd[k + 1] - gd_node) * frac;
        // Trapezoid-consistent interpolation keeps the chain inequalities
        // exact between nodes.
        let ds = frac * self.step;
        let half = R::lit(0.5);
        let big_gd = self.big_gd[k] + ds * half * (gd_node + gd);
        Ok((gi, gd, big_gd))
    }

    pub fn gamma_i(&self, s: R) -> Result<R> {
        Ok(self.eval(s)?.0)
    }

    pub fn gamma_d(&self, s: R) -> Result<R> {
        Ok(self.eval(s)?.1)
    }

    pub fn big_gamma_d(&self, s: R) -> Result<R> {
        Ok(self.eval(s)?.2)
    }
}

/// One-shot splitting evaluation; build a [`GammaSplit`] for repeated use.
pub fn gamma_split<R: Real>(m: &MotilitySpec<R>, sstar: R, s: R) -> Result<(R, R, R)> {
    GammaSplit::new(m, sstar, s.max(sstar) + R::one())?.eval(s)
}

/// Every constructive constant of the boundedness analysis, with the scan
/// resolution that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryConstants<R> {
    /// `s <= s f(s) + beta1` for all `s >= 0`.
    pub beta1: R,
    /// Uniform signal cap.
    pub vstar: R,
    /// Running-max level of gamma; only defined on the unbounded branch.
    pub sstar: Option<R>,
    /// `min_{[0, v*]} gamma`.
    pub gamma_lo: R,
    /// `max_{[0, v*]} gamma`.
    pub gamma_hi: R,
    /// `max_{[0, v*]} |gamma'|^2 / (2 gamma)`.
    pub k_gamma: R,
    /// Which branch produced `v*`.
    pub bounded_motility: bool,
    /// Sup norm of the initial signal, the anchor of both branches.
    pub vin_max: R,
    /// Scan resolution used throughout.
    pub scan: ScanConfig<R>,
}

/// Compute the full constant set for a motility/source pair and initial
/// signal level `vin_max = ||v_in||_inf`.
pub fn compute_constants<R: Real>(
    m: &MotilitySpec<R>,
    f: &SourceSpec<R>,
    vin_max: R,
    scan: &ScanConfig<R>,
) -> Result<TheoryConstants<R>> {
    m.validate()?;
    f.validate()?;
    if !(vin_max > R::zero()) {
        return Err(Error::Assumption(
            "vin_max must be positive: an identically zero initial density is excluded".into(),
        ));
    }
    let beta1 = compute_b1(f, R::one(), R::one(), R::zero(), scan)?;
    let bounded = m.bounded_at_infinity();
    let (sstar, vstar) = if bounded {
        // Exact supremum for the closed-form presets; equals the tail scan
        // value on [0, 1e8].
        let sup = m
            .sup_gamma()
            .expect("bounded presets expose their supremum");
        let cap = compute_b1(f, sup + R::one(), R::one(), R::zero(), scan)?;
        (None, vin_max.max(cap))
    } else {
        let sstar = compute_sstar(m, vin_max, beta1, scan)?;
        (Some(sstar), sstar)
    };
    let gb = gamma_bounds(m, vstar)?;
    Ok(TheoryConstants {
        beta1,
        vstar,
        sstar,
        gamma_lo: gb.lo,
        gamma_hi: gb.hi,
        k_gamma: gb.k_gamma,
        bounded_motility: bounded,
        vin_max,
        scan: *scan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn log1 () -> SourceSpec<f64> {
        SourceSpec::LogPower {
            lambda: 1.0,
            alpha: 1.0,
            mu: 0.0,
        }
    }

    /// Independent brute-force oracle: plain scan plus one 10x refinement.
    fn oracle_sup(g: impl Fn(f64) -> f64, hi: f64, step: f64) -> f64 {
        let n = (hi / step).ceil() as usize;
        let mut best = 0.0f64;
        let mut best_x = 0.0f64;
        for i in 0..=n {
            let s = (i as f64 * step).min(hi);
            let v = g(s);
            if v > best {
                best = v;
                best_x = s;
            }
        }
        let fine = step / 10.0;
        let mut x = (best_x - step).max(0.0);
        while x <= (best_x + step).min(hi) {
            best = best.max(g(x));
            x += fine;
        }
        best
    }

    #[test]
    fn beta1_matches_refined_scan_oracle() {
        let b = compute_beta1(&log1()).unwrap();
        let oracle = oracle_sup(|s| s * (1.0 - (1.0 + s).ln()), 10.0, 1e-4);
        assert_relative_eq!(b, oracle, max_relative = 1e-6);
        assert!((0.3302..0.3306).contains(&b), "beta1 = {b}");
    }

    #[test]
    fn b1_is_zero_when_the_bound_already_holds() {
        // f(s) = log(1+s) + 1 >= 1, so s - s f(s) <= 0 everywhere.
        let f = SourceSpec::LogPower {
            lambda: 1.0,
            alpha: 1.0,
            mu: -1.0,
        };
        assert_eq!(compute_beta1(&f).unwrap(), 0.0);
    }

    #[test]
    fn b1_alpha2_matches_oracle() {
        let b = compute_b1(&log1(), 1.0, 2.0, 0.0, &ScanConfig::default()).unwrap();
        let oracle = oracle_sup(|s| s * s * (1.0 - (1.0 + s).ln()), 10.0, 1e-4);
        assert_relative_eq!(b, oracle, max_relative = 1e-6);
    }

    #[test]
    fn b1_rejects_sources_that_never_diverge() {
        let err = compute_b1(
            &SourceSpec::Zero,
            1.0,
            1.0,
            0.0,
            &ScanConfig {
                max_range: 1e6,
                ..ScanConfig::default()
            },
        );
        assert!(matches!(err, Err(Error::ScanDiverged(_))));
        assert!(compute_b1(&log1(), 1.0, 1.0, 0.5, &ScanConfig::default()).is_err());
    }

    #[test]
    fn lower_bound_witness_survives_denser_scan() {
        for (a1, alpha, beta) in [(1.0, 1.0, 0.0), (1.0, 1.0, 1.0), (2.0, 2.0, 0.0)] {
            let b1 = compute_b1(&log1(), a1, alpha, beta, &ScanConfig::default()).unwrap();
            let f = log1();
            let mut s = 0.0f64;
            while s <= 30.0 {
                if s > 0.0 {
                    let lhs = s.powf(alpha)
                        * f.eval(s).unwrap()
                        * if beta == 0.0 { 1.0 } else { s.ln() };
                    assert!(
                        lhs >= a1 * s.powf(alpha) - b1 - 1e-9,
                        "violated at s = {s} for (a1, alpha, beta) = ({a1}, {alpha}, {beta})"
                    );
                }
                s += 1e-5 * 30.0;
            }
        }
    }

    #[test]
    fn sstar_shortcut_is_exact_for_monotone_presets() {
        let m = MotilitySpec::LogGrowth { c: 1.0 };
        let cfg = ScanConfig::default();
        assert_eq!(compute_sstar(&m, 2.0, 0.33, &cfg).unwrap(), 2.0);
        assert_eq!(compute_sstar(&m, 0.1, 0.33, &cfg).unwrap(), 0.33);
    }

    #[test]
    fn sstar_scan_finds_the_running_max_recovery() {
        let m = MotilitySpec::AffineOsc { a: 3.0, b: 2.0 };
        let cfg = ScanConfig::default();
        // gamma is still increasing at s = 2, so the running max is attained there.
        let s = compute_sstar(&m, 2.0, 0.0, &cfg).unwrap();
        assert_relative_eq!(s, 2.0, epsilon = 1e-12);

        // From s = 3 the running max sits at the earlier local maximum; the
        // level recovers it near 5.4. Oracle: independent fine walk.
        let s = compute_sstar(&m, 3.0, 0.0, &cfg).unwrap();
        let gamma = |x: f64| 3.0 + x + 2.0 * x.sin();
        let mut run_max = 0.0f64;
        let mut x = 0.0;
        while x < 3.0 {
            run_max = run_max.max(gamma(x));
            x += 1e-6;
        }
        let mut expect = 3.0;
        while gamma(expect) < run_max {
            run_max = run_max.max(gamma(expect));
            expect += 1e-6;
        }
        assert!((s - expect).abs() < 2e-4, "s* = {s}, oracle = {expect}");
        // Defining properties within scan tolerance.
        assert!(gamma(s) >= run_max - 2e-4);
        assert!(s >= 3.0);
    }

    #[test]
    fn sstar_requires_the_unbounded_branch() {
        let m = MotilitySpec::ExpDecay { chi: 1.0 };
        assert!(matches!(
            compute_sstar(&m, 1.0, 0.0, &ScanConfig::default()),
            Err(Error::Branch(_))
        ));
    }

    #[test]
    fn vstar_bounded_branch_takes_the_larger_of_vin_and_cap() {
        let m = MotilitySpec::ExpDecay { chi: 1.0 };
        // b1 at a1 = sup gamma + 1 = 2 is about 1.87 < 5, so vin wins.
        let v = compute_vstar(&m, &log1(), 5.0).unwrap();
        assert_eq!(v, 5.0);
        let oracle = oracle_sup(|s| s * (2.0 - (1.0 + s).ln()), 50.0, 1e-4);
        let v = compute_vstar(&m, &log1(), 0.5).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 1e-6);
    }

    #[test]
    fn vstar_unbounded_branch_equals_sstar() {
        let m = MotilitySpec::LogGrowth { c: 1.0 };
        assert_eq!(compute_vstar(&m, &log1(), 2.0).unwrap(), 2.0);
    }

    #[test]
    fn vstar_rejects_zero_initial_signal() {
        let m = MotilitySpec::Constant { c: 3.0 };
        assert!(matches!(
            compute_vstar(&m, &log1(), 0.0),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn gamma_bounds_match_analytic_oracles() {
        let gb = gamma_bounds(&MotilitySpec::Constant { c: 2.0 }, 10.0).unwrap();
        assert_eq!((gb.lo, gb.hi, gb.k_gamma), (2.0, 2.0, 0.0));

        // exp(-s): range [e^{-1}, 1]; |gamma'|^2/(2 gamma) = e^{-s}/2, max 0.5 at 0.
        let gb = gamma_bounds(&MotilitySpec::ExpDecay { chi: 1.0 }, 1.0).unwrap();
        assert_relative_eq!(gb.lo, (-1.0f64).exp(), max_relative = 1e-6);
        assert_relative_eq!(gb.hi, 1.0, max_relative = 1e-12);
        assert_relative_eq!(gb.k_gamma, 0.5, max_relative = 1e-6);

        // c + log(1+s) on [0, e-1]: range [1, 2]; the ratio is maximal at 0.
        let gb = gamma_bounds(
            &MotilitySpec::LogGrowth { c: 1.0 },
            std::f64::consts::E - 1.0,
        )
        .unwrap();
        assert_relative_eq!(gb.lo, 1.0, max_relative = 1e-12);
        assert_relative_eq!(gb.hi, 2.0, max_relative = 1e-9);
        assert_relative_eq!(gb.k_gamma, 0.5, max_relative = 1e-6);
    }

    #[test]
    fn split_vanishes_below_sstar() {
        let m = MotilitySpec::AffineOsc { a: 3.0, b: 2.0 };
        let split = GammaSplit::new(&m, 2.0, 10.0).unwrap();
        assert_eq!(split.eval(1.0).unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(split.eval(0.0).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn split_is_closed_form_for_monotone_gamma() {
        let m = MotilitySpec::LogGrowth { c: 1.0 };
        let split = GammaSplit::new(&m, 1.5, 30.0).unwrap();
        for s in [1.5, 2.0, 7.0, 25.0] {
            let (gi, gd, big) = split.eval(s).unwrap();
            assert_eq!(gd, 0.0);
            assert_eq!(big, 0.0);
            assert_relative_eq!(
                gi,
                m.eval(s).unwrap() - m.eval(1.5).unwrap(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn split_identity_holds_under_quadrature() {
        let m = MotilitySpec::AffineOsc { a: 3.0, b: 2.0 };
        let sstar = 2.0;
        let split = GammaSplit::new(&m, sstar, sstar + 30.0).unwrap();
        let s = sstar + 2.0 * std::f64::consts::PI;
        let (gi, gd, _) = split.eval(s).unwrap();
        let lhs = m.eval(sstar).unwrap() + gi + gd;
        assert!((lhs - m.eval(s).unwrap()).abs() < 1e-8);
        assert!(gi >= 0.0 && gd <= 0.0);
    }

    #[test]
    fn gamma_d_chain_inequalities_hold_at_random_points() {
        let m = MotilitySpec::AffineOsc { a: 3.0, b: 2.0 };
        let sstar = 2.0;
        let split = GammaSplit::new(&m, sstar, sstar + 40.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20240601);
        for _ in 0..100 {
            let s: f64 = sstar + rng.gen_range(0.0..40.0);
            let (_, gd, big) = split.eval(s).unwrap();
            assert!(big <= 1e-9);
            assert!(big >= (s - sstar) * gd - 1e-9);
            assert!((s - sstar) * gd >= s * gd - 1e-9);
        }
    }

    #[test]
    fn full_constant_set_is_consistent() {
        let m = MotilitySpec::AffineOsc { a: 3.0, b: 2.0 };
        let c = compute_constants(&m, &log1(), 2.5, &ScanConfig::default()).unwrap();
        assert!(!c.bounded_motility);
        let sstar = c.sstar.unwrap();
        assert!(sstar >= c.beta1.max(2.5));
        assert_eq!(c.vstar, sstar);
        assert!(c.gamma_lo > 0.0 && c.gamma_lo <= c.gamma_hi);
        assert!(c.k_gamma >= 0.0);
    }
}
