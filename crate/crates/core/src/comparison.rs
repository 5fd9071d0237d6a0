//! Scalar comparison ODEs dominating the PDE sup norms, and domination
//! checks between recorded traces.
//!
//! `V` dominates the signal in the unbounded-motility branch:
//!
//! ```text
//! V' + gamma(V) V + V = [gamma(s*) + gamma_i(||v||_inf)] V + Gamma_d(V) + s*,   V(0) = s*
//! ```
//!
//! `U` dominates the density for non-decreasing concave motility:
//!
//! ```text
//! U' + U = U gamma'(0) (||u||_inf - U) + beta1,   U(0) = ||u_in||_inf
//! ```
//!
//! Both consume the PDE's recorded sup-norm traces by linear interpolation
//! and integrate with classic fixed-step RK4.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::constants::{GammaSplit, TheoryConstants};
use crate::error::{Error, Result};
use crate::model::MotilitySpec;
use crate::scalar::Real;

/// A sampled scalar trace over strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSeries<R> {
    times: Vec<R>,
    values: Vec<R>,
}

impl<R: Real> ScalarSeries<R> {
    pub fn new(times: Vec<R>, values: Vec<R>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Input("times and values differ in length".into()));
        }
        if times.is_empty() {
            return Err(Error::Input("empty series".into()));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Input("times must be strictly increasing".into()));
            }
        }
        if times.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Input("series contains non-finite entries".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: R, t0: R, t1: R) -> Result<Self> {
        Self::new(vec![t0, t1], vec![value, value])
    }

    pub fn times(&self) -> &[R] {
        &self.times
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn first_time(&self) -> R {
        self.times[0]
    }

    pub fn last_time(&self) -> R {
        self.times[self.times.len() - 1]
    }

    pub fn max_value(&self) -> R {
        self.values.iter().fold(R::neg_infinity(), |a, &b| a.max(b))
    }

    /// Linear interpolation; errors outside the covered range (with a one-ulp
    /// style slack at the ends).
    pub fn value_at(&self, t: R) -> Result<R> {
        let slack = R::lit(1e-9) * (R::one() + self.last_time().abs());
        if t < self.first_time() - slack || t > self.last_time() + slack {
            return Err(Error::Input(format!(
                "t = {} outside series range [{}, {}]",
                t.as_f64(),
                self.first_time().as_f64(),
                self.last_time().as_f64()
            )));
        }
        let t = t.max(self.first_time()).min(self.last_time());
        // Binary search for the bracketing segment.
        let mut lo = 0usize;
        let mut hi = self.times.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.times[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t0 = self.times[lo];
        let t1 = self.times[hi];
        let frac = (t - t0) / (t1 - t0);
        Ok(self.values[lo] + (self.values[hi] - self.values[lo]) * frac)
    }

    /// Two-column CSV export (`t,value`).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }

    /// Two-column CSV import; a `t,value` header line is optional.
    pub fn read_csv<I: BufRead>(input: I) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with('t')) {
                continue;
            }
            let mut parts = line.split(',');
            let (t, v) = match (parts.next(), parts.next()) {
                (Some(t), Some(v)) => (t.trim(), v.trim()),
                _ => return Err(Error::Input(format!("malformed series row: {line}"))),
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad number in series row: {line}")))
            };
            times.push(R::lit(parse(t)?));
            values.push(R::lit(parse(v)?));
        }
        Self::new(times, values)
    }
}

fn rk4<R: Real>(
    mut rhs: impl FnMut(R, R) -> Result<R>,
    y0: R,
    t_end: R,
    steps: usize,
) -> Result<ScalarSeries<R>> {
    if !(t_end > R::zero()) {
        return Err(Error::Input("t_end must be positive".into()));
    }
    let h = t_end / R::from_usize(steps).unwrap();
    let half = R::lit(0.5);
    let sixth = R::one() / R::lit(6.0);
    let two = R::lit(2.0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut y = y0;
    times.push(R::zero());
    values.push(y);
    for k in 0..steps {
        let t = h * R::from_usize(k).unwrap();
        let k1 = rhs(t, y)?;
        let k2 = rhs(t + h * half, y + h * half * k1)?;
        let k3 = rhs(t + h * half, y + h * half * k2)?;
        let k4 = rhs(t + h, y + h * k3)?;
        y = y + h * sixth * (k1 + two * (k2 + k3) + k4);
        times.push(h * R::from_usize(k + 1).unwrap());
        values.push(y);
    }
    ScalarSeries::new(times, values)
}

/// Default RK4 step count; keeps the fixed step at `1e-3 * t_end`.
pub const ODE_STEPS: usize = 1000;

/// Integrate the signal-dominating ODE `V` on `[0, t_end]`, feeding the
/// recorded `||v(t)||_inf` trace. Requires the unbounded-motility branch.
pub fn integrate_v<R: Real>(
    m: &MotilitySpec<R>,
    constants: &TheoryConstants<R>,
    vinf: &ScalarSeries<R>,
    t_end: R,
) -> Result<ScalarSeries<R>> {
    integrate_v_with_steps(m, constants, vinf, t_end, ODE_STEPS)
}

pub fn integrate_v_with_steps<R: Real>(
    m: &MotilitySpec<R>,
    constants: &TheoryConstants<R>,
    vinf: &ScalarSeries<R>,
    t_end: R,
    steps: usize,
) -> Result<ScalarSeries<R>> {
    let sstar = constants.sstar.ok_or_else(|| {
        Error::Branch("the V comparison needs an unbounded motility (s* defined)".into())
    })?;
    if vinf.first_time() > R::zero() || vinf.last_time() < t_end {
        return Err(Error::Input(format!(
            "vinf trace covers [{}, {}], need [0, {}]",
            vinf.first_time().as_f64(),
            vinf.last_time().as_f64(),
            t_end.as_f64()
        )));
    }
    let table_top = sstar.max(vinf.max_value()) + R::one();
    let split = GammaSplit::new(m, sstar, table_top)?;
    let gamma_sstar = split.gamma_at_sstar();
    let rhs = |t: R, v: R| -> Result<R> {
        let trace = vinf.value_at(t)?;
        let gi = split.gamma_i(trace)?;
        let (_, _, big_gd) = split.eval(v)?;
        Ok((gamma_sstar + gi) * v + big_gd + sstar - m.eval(v)? * v - v)
    };
    rk4(rhs, sstar, t_end, steps)
}

/// Integrate the density-dominating ODE `U` on `[0, t_end]`, feeding the
/// recorded `||u(t)||_inf` trace. Requires non-decreasing concave motility.
pub fn integrate_u<R: Real>(
    m: &MotilitySpec<R>,
    beta1: R,
    uinf: &ScalarSeries<R>,
    u0: R,
    t_end: R,
) -> Result<ScalarSeries<R>> {
    integrate_u_with_steps(m, beta1, uinf, u0, t_end, ODE_STEPS)
}

pub fn integrate_u_with_steps<R: Real>(
    m: &MotilitySpec<R>,
    beta1: R,
    uinf: &ScalarSeries<R>,
    u0: R,
    t_end: R,
    steps: usize,
) -> Result<ScalarSeries<R>> {
    if !m.monotone_concave() {
        return Err(Error::Branch(
            "the U comparison needs a non-decreasing concave motility".into(),
        ));
    }
    if uinf.first_time() > R::zero() || uinf.last_time() < t_end {
        return Err(Error::Input(format!(
            "uinf trace covers [{}, {}], need [0, {}]",
            uinf.first_time().as_f64(),
            uinf.last_time().as_f64(),
            t_end.as_f64()
        )));
    }
    let gp0 = m.eval_prime(R::zero())?;
    let rhs = |t: R, u: R| -> Result<R> {
        let trace = uinf.value_at(t)?;
        Ok(-u + u * gp0 * (trace - u) + beta1)
    };
    rk4(rhs, u0, t_end, steps)
}

/// Result of a trace-domination check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DominationReport<R> {
    pub pass: bool,
    pub tol_rel: R,
    /// `max_t (lower(t) - upper(t)) / (1 + |upper(t)|)`.
    pub max_violation: R,
    pub worst_time: R,
    pub samples: usize,
}

/// Check `lower(t) <= upper(t)` in the relative sense over the overlap of the
/// two series, sampling at every recorded time of either series.
pub fn check_domination<R: Real>(
    lower: &ScalarSeries<R>,
    upper: &ScalarSeries<R>,
    tol_rel: R,
) -> Result<DominationReport<R>> {
    let start = lower.first_time().max(upper.first_time());
    let end = lower.last_time().min(upper.last_time());
    if !(end >= start) {
        return Err(Error::Input("series time ranges are disjoint".into()));
    }
    let mut ts: Vec<R> = lower
        .times()
        .iter()
        .chain(upper.times().iter())
        .copied()
        .filter(|&t| t >= start && t <= end)
        .collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    let mut max_violation = R::neg_infinity();
    let mut worst_time = start;
    for &t in &ts {
        let lo = lower.value_at(t)?;
        let up = upper.value_at(t)?;
        let v = (lo - up) / (R::one() + up.abs());
        if v > max_violation {
            max_violation = v;
            worst_time = t;
        }
    }
    Ok(DominationReport {
        pass: max_violation <= tol_rel,
        tol_rel,
        max_violation,
        worst_time,
        samples: ts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{compute_constants, ScanConfig};
    use crate::model::SourceSpec;
    use approx::assert_relative_eq;

    fn constants_for(m: &MotilitySpec<f64>, vin_max: f64) -> TheoryConstants<f64> {
        let f = SourceSpec::LogPower {
            lambda: 1.0,
            alpha: 1.0,
            mu: 0.0,
        };
        compute_constants(m, &f, vin_max, &ScanConfig::default()).unwrap()
    }

    #[test]
    fn v_stays_at_the_fixed_point_when_the_trace_is_below_sstar() {
        let m = MotilitySpec::AffineOsc { a: 3.0, b: 2.0 };
        let c = constants_for(&m, 2.0);
        let sstar = c.sstar.unwrap();
        let vinf = ScalarSeries::constant(0.0, 0.0, 10.0).unwrap();
        let v = integrate_v(&m, &c, &vinf, 10.0).unwrap();
        for &val in v.values() {
            assert!((val - sstar).abs() <= 1e-10, "V drifted to {val}");
        }
    }

    #[test]
    fn v_equilibrium_for_monotone_gamma_with_trace_at_sstar() {
        let m = MotilitySpec::LogGrowth { c: 1.0 };
        let c = constants_for(&m, 2.0);
        let sstar = c.sstar.unwrap();
        let vinf = ScalarSeries::constant(sstar, 0.0, 5.0).unwrap();
        let v = integrate_v(&m, &c, &vinf, 5.0).unwrap();
        for &val in v.values() {
            assert!((val - sstar).abs() <= 1e-10);
        }
    }

    #[test]
    fn v_requires_coverage_and_the_unbounded_branch() {
        let m = MotilitySpec::AffineOsc { a: 3.0, b: 2.0 };
        let c = constants_for(&m, 2.0);
        let short = ScalarSeries::constant(0.0, 0.0, 1.0).unwrap();
        assert!(integrate_v(&m, &c, &short, 10.0).is_err());

        let bounded = MotilitySpec::ExpDecay { chi: 1.0 };
        let cb = constants_for(&bounded, 2.0);
        let vinf = ScalarSeries::constant(0.0, 0.0, 10.0).unwrap();
        assert!(matches!(
            integrate_v(&bounded, &cb, &vinf, 10.0),
            Err(Error::Branch(_))
        ));
    }

    #[test]
    fn u_matches_the_closed_form_for_constant_gamma() {
        // gamma'(0) = 0 gives U(t) = u0 e^{-t} + beta1 (1 - e^{-t}).
        let m = MotilitySpec::Constant { c: 1.0 };
        let beta1 = 0.33;
        let u0 = 3.0;
        let uinf = ScalarSeries::<f64>::constant(10.0, 0.0, 5.0).unwrap();
        let u = integrate_u(&m, beta1, &uinf, u0, 5.0).unwrap();
        for (&t, &val) in u.times().iter().zip(u.values()) {
            let exact = u0 * (-t).exp() + beta1 * (1.0 - (-t).exp());
            assert!((val - exact).abs() <= 1e-8, "t = {t}: {val} vs {exact}");
        }
    }

    #[test]
    fn u_equilibrium_at_beta1() {
        let m = MotilitySpec::Constant { c: 2.0 };
        let uinf = ScalarSeries::<f64>::constant(5.0, 0.0, 4.0).unwrap();
        let u = integrate_u(&m, 0.4, &uinf, 0.4, 4.0).unwrap();
        for &val in u.values() {
            assert!((val - 0.4).abs() <= 1e-12);
        }
    }

    #[test]
    fn u_respects_the_cap_max_u0_beta1() {
        // The cap is a barrier whenever the fed trace stays below it, which
        // is the regime the comparison principle provides.
        let m = MotilitySpec::LogGrowth { c: 1.0 };
        let beta1 = 0.33;
        for u0 in [0.1f64, 1.0, 6.0] {
            let cap = u0.max(beta1);
            let times: Vec<f64> = (0..=80).map(|i| i as f64 * 0.1).collect();
            let values: Vec<f64> = times
                .iter()
                .map(|t| cap * (0.4 + 0.5 * (3.0 * t).sin().abs()))
                .collect();
            let uinf = ScalarSeries::new(times, values).unwrap();
            let u = integrate_u(&m, beta1, &uinf, u0, 8.0).unwrap();
            assert!(u.max_value() <= cap + 1e-8, "u0 = {u0}: {}", u.max_value());
        }
    }

    #[test]
    fn rk4_reaches_fourth_order_on_the_closed_form() {
        let m = MotilitySpec::Constant { c: 1.0 };
        let uinf = ScalarSeries::<f64>::constant(1.0, 0.0, 2.0).unwrap();
        let err = |steps: usize| {
            let u = integrate_u_with_steps(&m, 0.5, &uinf, 4.0, 2.0, steps).unwrap();
            let reference = integrate_u_with_steps(&m, 0.5, &uinf, 4.0, 2.0, steps * 10).unwrap();
            (u.values()[steps] - reference.values()[steps * 10]).abs()
        };
        let e1 = err(8);
        let e2 = err(16);
        assert!(e1 / e2 >= 14.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn domination_trivial_cases() {
        let a = ScalarSeries::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 1.5]).unwrap();
        let r = check_domination(&a, &a, 0.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_violation, 0.0);

        let lower =
            ScalarSeries::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.5]).unwrap();
        let r = check_domination(&lower, &a, 0.0).unwrap();
        assert!(r.pass);

        let above = ScalarSeries::new(vec![0.0, 1.0, 2.0], vec![2.0, 3.0, 2.5]).unwrap();
        let r = check_domination(&above, &a, 0.02).unwrap();
        assert!(!r.pass);
        assert!(r.max_violation > 0.0);
    }

    #[test]
    fn domination_rejects_disjoint_ranges() {
        let a = ScalarSeries::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let b = ScalarSeries::new(vec![2.0, 3.0], vec![1.0, 1.0]).unwrap();
        assert!(check_domination(&a, &b, 0.1).is_err());
    }

    #[test]
    fn series_csv_roundtrip() {
        let s = ScalarSeries::new(vec![0.0, 0.5, 1.25], vec![1.0, -0.25, 3.5]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = ScalarSeries::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn interpolation_is_linear_between_samples() {
        let s = ScalarSeries::new(vec![0.0, 2.0], vec![1.0, 3.0]).unwrap();
        assert_relative_eq!(s.value_at(0.5).unwrap(), 1.5, max_relative = 1e-14);
        assert!(s.value_at(-1.0).is_err());
        assert!(s.value_at(2.5).is_err());
    }
}
