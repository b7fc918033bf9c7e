//! Simulation-based audit of certified sets.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FuzzyModel;
use crate::regions::{DaEstimate, LyapunovFn};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    /// `|x(T)|` below this counts as converged.
    pub converge_tol: f64,
    /// Allowed relative increase of `V` per step.
    pub monotone_slack: f64,
    /// Keep every `sample_stride`-th step in the report.
    pub sample_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 50.0,
            converge_tol: 1e-4,
            monotone_slack: 1e-8,
            sample_stride: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub initial: Vec<f64>,
    /// `(t, x, V(x))`, time ordered.
    pub samples: Vec<(f64, Vec<f64>, Option<f64>)>,
    pub final_state: Vec<f64>,
    pub final_time: f64,
    pub converged: bool,
    pub lyapunov_monotone: bool,
    /// Largest one-step increase of `V`.
    pub max_v_increase: f64,
    pub left_region: bool,
    pub dt: f64,
}

impl TrajectoryReport {
    /// Columns `t, x1..xn, V`.
    pub fn to_csv(&self) -> String {
        let n = self.initial.len();
        let mut s = String::from("t");
        for d in 1..=n {
            let _ = write!(s, ",x{d}");
        }
        s.push_str(",V\n");
        for (t, x, v) in &self.samples {
            let _ = write!(s, "{t}");
            for xi in x {
                let _ = write!(s, ",{xi}");
            }
            match v {
                Some(v) => {
                    let _ = writeln!(s, ",{v}");
                }
                None => s.push_str(",\n"),
            }
        }
        s
    }
}

fn rk4_step(model: &FuzzyModel, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    let f = |y: &DVector<f64>| model.eval_dynamics(y.as_slice());
    let k1 = f(x)?;
    let k2 = f(&(x + &k1 * (dt / 2.0)))?;
    let k3 = f(&(x + &k2 * (dt / 2.0)))?;
    let k4 = f(&(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Integrates `dx/dt = A(alpha(x)) x` by classical fixed-step RK4. The run
/// stops with `left_region` set when a stage leaves the modelling box.
pub fn integrate(
    model: &FuzzyModel,
    x0: &[f64],
    lyap: Option<&LyapunovFn>,
    config: &IntegratorConfig,
) -> Result<TrajectoryReport> {
    if !(config.dt > 0.0 && config.horizon >= 0.0) {
        return Err(Error::InvalidHyper(format!(
            "need dt > 0 and horizon >= 0, got {} and {}",
            config.dt, config.horizon
        )));
    }
    if x0.len() != model.dim() {
        return Err(Error::Dimension(format!("state has {} entries, model {}", x0.len(), model.dim())));
    }
    if !model.region().contains(x0) {
        return Err(Error::OutOfRegion { state: x0.to_vec() });
    }
    let value = |x: &DVector<f64>| -> Result<Option<f64>> { lyap.map(|l| l.value(model, x.as_slice())).transpose() };
    let steps = (config.horizon / config.dt).round() as usize;
    let stride = config.sample_stride.max(1);
    let mut x = DVector::from_column_slice(x0);
    let mut v = value(&x)?;
    let mut samples = vec![(0.0, x0.to_vec(), v)];
    let mut max_inc = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut left_region = false;
    let mut t = 0.0;
    for k in 1..=steps {
        let next = match rk4_step(model, &x, config.dt) {
            Ok(nx) => nx,
            Err(Error::OutOfRegion { .. }) => {
                left_region = true;
                break;
            }
            Err(e) => return Err(e),
        };
        t = k as f64 * config.dt;
        if next.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        if !model.region().contains(next.as_slice()) {
            left_region = true;
            x = next;
            samples.push((t, x.iter().copied().collect(), None));
            break;
        }
        let nv = value(&next)?;
        if let (Some(a), Some(b)) = (v, nv) {
            let inc = b - a;
            max_inc = max_inc.max(inc);
            if inc > config.monotone_slack * (1.0 + a.abs()) {
                monotone = false;
            }
        }
        x = next;
        v = nv;
        if k % stride == 0 || k == steps {
            samples.push((t, x.iter().copied().collect(), v));
        }
    }
    let converged = !left_region && x.norm() < config.converge_tol;
    Ok(TrajectoryReport {
        initial: x0.to_vec(),
        samples,
        final_state: x.iter().copied().collect(),
        final_time: t,
        converged,
        lyapunov_monotone: monotone && !left_region,
        max_v_increase: if max_inc.is_finite() { max_inc } else { 0.0 },
        left_region,
        dt: config.dt,
    })
}

/// `dV/dt` along the flow: exact for quadratic `V`, central difference
/// along `f(x)` otherwise.
pub fn lyapunov_derivative(model: &FuzzyModel, lyap: &LyapunovFn, x: &[f64]) -> Result<f64> {
    let f = model.eval_dynamics(x)?;
    match lyap {
        LyapunovFn::Quadratic(p) => {
            let xv = DVector::from_column_slice(x);
            Ok(2.0 * xv.dot(&(p * f)))
        }
        _ => {
            let fnorm = f.norm();
            if fnorm == 0.0 {
                return Ok(0.0);
            }
            let xn = DVector::from_column_slice(x).norm();
            let h = 1e-6 * (1.0 + xn) / fnorm;
            let shifted = |s: f64| -> Vec<f64> { x.iter().zip(f.iter()).map(|(xi, fi)| xi + s * fi).collect() };
            let vp = lyap.value(model, &shifted(h))?;
            let vm = lyap.value(model, &shifted(-h))?;
            Ok((vp - vm) / (2.0 * h))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditSummary {
    pub level: f64,
    pub samples: usize,
    pub converged_fraction: f64,
    pub monotone_fraction: f64,
    pub left_region: usize,
    pub max_v_increase: f64,
    pub all_converged: bool,
    pub all_monotone: bool,
    pub config: IntegratorConfig,
}

impl AuditSummary {
    pub fn passed(&self) -> bool {
        self.all_converged && self.all_monotone && self.left_region == 0
    }
}

/// Uniform samples of `{x in X : V(x) <= level}` by rejection from the grid
/// bounding box of the sublevel set.
pub fn sample_sublevel(
    model: &FuzzyModel,
    estimate: &DaEstimate,
    level: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let g = &estimate.grid;
    let n = g.counts.len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut any = false;
    for i in 0..g.len() {
        if estimate.values[i] <= level {
            any = true;
            let p = g.point(&g.index(i));
            for d in 0..n {
                lo[d] = lo[d].min(p[d] - g.step(d));
                hi[d] = hi[d].max(p[d] + g.step(d));
            }
        }
    }
    if !any {
        return Err(Error::DegenerateRegion("empty sublevel set".into()));
    }
    for d in 0..n {
        lo[d] = lo[d].max(g.lower[d]);
        hi[d] = hi[d].min(g.upper[d]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let max_tries = 1000 * count.max(1);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > max_tries {
            return Err(Error::DegenerateRegion(format!(
                "rejection sampling found {} of {count} points",
                out.len()
            )));
        }
        let x: Vec<f64> = (0..n).map(|d| rng.gen_range(lo[d]..=hi[d])).collect();
        if estimate.lyapunov.value(model, &x)? <= level {
            out.push(x);
        }
    }
    Ok(out)
}

/// Simulates `sample_count` initial states drawn uniformly from the sublevel
/// set at `level` (the estimate's own level when `None`).
pub fn validate_da(
    model: &FuzzyModel,
    estimate: &DaEstimate,
    level: Option<f64>,
    sample_count: usize,
    config: &IntegratorConfig,
    seed: u64,
) -> Result<AuditSummary> {
    let level = level.unwrap_or(estimate.level);
    let starts = sample_sublevel(model, estimate, level, sample_count, seed)?;
    let mut cfg = config.clone();
    // only the verdict flags are needed, not the sampled path
    cfg.sample_stride = usize::MAX;
    let reports: Vec<TrajectoryReport> = starts
        .par_iter()
        .map(|x0| integrate(model, x0, Some(&estimate.lyapunov), &cfg))
        .collect::<Result<_>>()?;
    let total = reports.len().max(1) as f64;
    let converged = reports.iter().filter(|r| r.converged).count();
    let monotone = reports.iter().filter(|r| r.lyapunov_monotone).count();
    let left = reports.iter().filter(|r| r.left_region).count();
    Ok(AuditSummary {
        level,
        samples: reports.len(),
        converged_fraction: converged as f64 / total,
        monotone_fraction: monotone as f64 / total,
        left_region: left,
        max_v_increase: reports.iter().map(|r| r.max_v_increase).fold(f64::NEG_INFINITY, f64::max),
        all_converged: converged == reports.len(),
        all_monotone: monotone == reports.len(),
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture;
    use std::collections::BTreeMap;

    fn cubic() -> FuzzyModel {
        fixture("cubic", &BTreeMap::new()).unwrap()
    }

    fn closed_form(x0: f64, t: f64) -> f64 {
        x0 / (1.0 + 2.0 * x0 * x0 * t).sqrt()
    }

    fn state_at(report: &TrajectoryReport, t: f64) -> f64 {
        report
            .samples
            .iter()
            .find(|(s, _, _)| (s - t).abs() < 1e-9)
            .map(|(_, x, _)| x[0])
            .unwrap()
    }

    #[test]
    fn origin_stays_put() {
        let r = integrate(&cubic(), &[0.0], None, &IntegratorConfig { horizon: 1.0, ..Default::default() }).unwrap();
        assert!(r.samples.iter().all(|(_, x, _)| x[0] == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn cubic_matches_closed_form() {
        let cfg = IntegratorConfig {
            horizon: 10.0,
            ..Default::default()
        };
        let r = integrate(&cubic(), &[0.5], None, &cfg).unwrap();
        for t in [1.0, 10.0] {
            assert!((state_at(&r, t) - closed_form(0.5, t)).abs() < 1e-6);
        }
        // asymptotic but not exponential: far from the 1e-4 threshold at T = 10
        assert!(!r.converged);
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |dt: f64| {
            let cfg = IntegratorConfig {
                dt,
                horizon: 1.0,
                sample_stride: 1,
                ..Default::default()
            };
            let r = integrate(&cubic(), &[0.9], None, &cfg).unwrap();
            (r.final_state[0] - closed_form(0.9, 1.0)).abs()
        };
        let ratio = err(0.025) / err(0.0125);
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn leaving_the_box_is_flagged() {
        let p: BTreeMap<String, f64> = [("mu".to_string(), 2.0)].into_iter().collect();
        let m = fixture("vdp", &p).unwrap();
        let r = integrate(&m, &[0.5, 0.5], None, &IntegratorConfig::default()).unwrap();
        assert!(r.left_region && !r.converged);
    }

    #[test]
    fn vdp_converges() {
        let p: BTreeMap<String, f64> = [("mu".to_string(), -2.0)].into_iter().collect();
        let m = fixture("vdp", &p).unwrap();
        let r = integrate(&m, &[0.1, -0.1], None, &IntegratorConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.to_csv().starts_with("t,x1,x2,V\n"));
    }

    #[test]
    fn rejects_bad_input() {
        let m = cubic();
        assert!(matches!(
            integrate(&m, &[2.0], None, &IntegratorConfig::default()),
            Err(Error::OutOfRegion { .. })
        ));
        let cfg = IntegratorConfig { dt: 0.0, ..Default::default() };
        assert!(integrate(&m, &[0.1], None, &cfg).is_err());
    }

    #[test]
    fn quadratic_derivative_matches_difference() {
        let m = cubic();
        let lyap = LyapunovFn::Quadratic(nalgebra::DMatrix::from_element(1, 1, 1.0));
        let d = lyapunov_derivative(&m, &lyap, &[0.5]).unwrap();
        assert!((d - 2.0 * 0.5 * -0.125).abs() < 1e-15);
        let fuzzy = LyapunovFn::Fuzzy(vec![nalgebra::DMatrix::from_element(1, 1, 1.0); 2]);
        let df = lyapunov_derivative(&m, &fuzzy, &[0.5]).unwrap();
        assert!((df - d).abs() < 1e-8);
    }
}
