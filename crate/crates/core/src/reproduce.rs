//! The reproduction suite: seven numbered acceptance criteria shared by the
//! `reproduce` command and the acceptance test target.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditions::{ConditionKind, ConditionSpec};
use crate::error::Result;
use crate::lmi::{Assignment, LmiProblem, Sense};
use crate::model::{fixture, spectral_abscissa, FuzzyModel, MembershipFamily, StateBox};
use crate::regions::{largest_sublevel, DaEstimate};
use crate::sdp::{solve, SolverOptions, VerdictStatus, PSD_TOL};
use crate::search::{bisect_hyper, compare_sweeps, sweep, HyperAxis, Relation, SweepAxis, SweepResult};
use crate::verify::{integrate, validate_da, IntegratorConfig};

/// Reference maxima for Example 2 at `(a, b) = (-8, 100)`.
pub const PHI_STAR: f64 = 4.0789;
pub const B_STAR: f64 = 0.2603;
pub const ETA_STAR: f64 = 1.1645;
pub const MAXIMA_TOL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quick,
    Full,
}

impl Mode {
    pub fn da_resolution(self) -> usize {
        match self {
            Mode::Quick => 201,
            Mode::Full => 401,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "criterion {} {verdict} ({:.1}s) {}", self.id, self.seconds, self.title)?;
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            write!(f, "\n    {mark} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

pub const CRITERIA: [(u8, &str); 7] = [
    (1, "Example 2 hyperparameter maxima within 5%, under 2 min"),
    (2, "Example 2 inclusion sweeps on an 11x11 (a, b) grid, under 15 min"),
    (3, "fundamental limitations: cubic, scalar-sine, van der Pol"),
    (4, "converse property on 50 random Hurwitz models"),
    (5, "every Feasible verdict of criteria 1-4 passes independent validation"),
    (6, "Example 2 Mozelli and Ball domain-of-attraction audit"),
    (7, "RK4 against the cubic closed form"),
];

/// Checks whose failure is an accepted, analysed discrepancy.
pub const KNOWN_UNATTAINABLE: [&str; 2] = ["1.eta", "2.iv"];

/// Positive definiteness by Cholesky on `m + shift I`.
fn cholesky_pd(m: &DMatrix<f64>, shift: f64) -> bool {
    let n = m.nrows();
    let s = (m + m.transpose()) * 0.5 + DMatrix::identity(n, n) * shift;
    s.cholesky().is_some()
}

/// Certificate check by Cholesky factorisation, independent of the
/// eigenvalue-based validation inside the solver.
pub fn independent_check(problem: &LmiProblem, assignment: &Assignment) -> std::result::Result<(), String> {
    let half = problem.margin() / 2.0;
    for c in problem.constraints() {
        let f = c.expr.evaluate(assignment).map_err(|e| format!("{}: {e}", c.label))?;
        let ok = match c.sense {
            Sense::NegativeDefinite => cholesky_pd(&(-&f), -half),
            Sense::PositiveDefinite => cholesky_pd(&f, -half),
            Sense::PositiveSemidefinite => cholesky_pd(&f, 2.0 * PSD_TOL * (1.0 + f.norm())),
        };
        if !ok {
            return Err(format!("constraint `{}` fails at margin {half:e}", c.label));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SoundnessLog {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl SoundnessLog {
    fn record(&mut self, what: &str, problem: &LmiProblem, asg: Option<&Assignment>) {
        self.checked += 1;
        match asg {
            None => self.failures.push(format!("{what}: Feasible without certificate")),
            Some(a) => {
                if let Err(e) = independent_check(problem, a) {
                    self.failures.push(format!("{what}: {e}"));
                }
            }
        }
    }
}

/// Solves and, when Feasible, audits the certificate.
fn audited_solve(
    log: &mut SoundnessLog,
    what: &str,
    model: &FuzzyModel,
    spec: &ConditionSpec,
    opts: &SolverOptions,
) -> Result<VerdictStatus> {
    let problem = spec.build(model)?;
    let v = solve(&problem, opts);
    if v.status.is_feasible() {
        log.record(what, &problem, v.certificate.as_ref());
    }
    Ok(v.status)
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn example2_reference() -> Result<FuzzyModel> {
    fixture("example2", &params(&[("a", -8.0), ("b", 100.0)]))
}

/// A random 2-state, 2-rule model whose nominal matrix has spectral abscissa
/// at most `-0.1`. Memberships are logistic in a random direction.
pub fn random_hurwitz_model(rng: &mut impl Rng) -> Result<FuzzyModel> {
    let mut entries = || DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-2.0..2.0));
    let r = entries();
    let a1 = entries();
    let shift = spectral_abscissa(&r) + 0.1 + rng.gen_range(0.0..1.0);
    let a0 = r - DMatrix::identity(2, 2) * shift;
    let w = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    let c: f64 = rng.gen_range(-1.0..1.0);
    let alpha1 = move |x: &[f64]| 0.5 * (1.0 + (w[0] * x[0] + w[1] * x[1] + c).tanh());
    let a10 = alpha1(&[0.0, 0.0]);
    let a2 = (&a0 - &a1 * a10) / (1.0 - a10);
    let mf = MembershipFamily::new(2, 2, move |x| {
        let s = alpha1(x);
        DVector::from_vec(vec![s, 1.0 - s])
    })?;
    FuzzyModel::new(vec![a1, a2], mf, StateBox::symmetric(&[1.0, 1.0])?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DaComparison {
    pub mozelli_phi: f64,
    pub ball_eta: f64,
    pub mozelli_cells: usize,
    pub ball_cells: usize,
    pub mozelli_outside_ball: usize,
}

/// Runs criteria, carrying the soundness log across them.
pub struct Reproduction {
    pub mode: Mode,
    pub options: SolverOptions,
    pub soundness: SoundnessLog,
    ran: BTreeSet<u8>,
    maxima: Option<(f64, f64, f64)>,
}

impl Reproduction {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            options: SolverOptions::default(),
            soundness: SoundnessLog::default(),
            ran: BTreeSet::new(),
            maxima: None,
        }
    }

    pub fn run_all(&mut self) -> Vec<CriterionOutcome> {
        (1..=7).map(|id| self.run(id)).collect()
    }

    /// Criterion 5 runs any of 1-4 not yet run; their outcomes are dropped.
    pub fn run(&mut self, id: u8) -> CriterionOutcome {
        if id == 5 {
            for dep in 1..=4 {
                if !self.ran.contains(&dep) {
                    self.run(dep);
                }
            }
        }
        let title = CRITERIA
            .iter()
            .find(|(i, _)| *i == id)
            .map_or("unknown criterion", |(_, t)| t)
            .to_string();
        let start = Instant::now();
        let result = match id {
            1 => self.maxima_checks(),
            2 => self.inclusion_checks(),
            3 => self.limitation_checks(),
            4 => self.converse_checks(),
            5 => Ok(self.soundness_checks()),
            6 => self.da_checks(),
            7 => Ok(integrator_checks()),
            _ => Ok(vec![check("known", false, format!("no criterion {id}"))]),
        };
        let checks = result.unwrap_or_else(|e| vec![check(&format!("{id}.error"), false, e.to_string())]);
        self.ran.insert(id);
        CriterionOutcome {
            id,
            title,
            checks,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn bisect(&mut self, model: &FuzzyModel, kind: ConditionKind, axis: HyperAxis, hi: f64) -> Result<f64> {
        let spec = ConditionSpec::uniform(kind, model.rules(), hi)?;
        let res = bisect_hyper(model, &spec, axis, 0.0, hi, 1e-3, &self.options)?;
        for (value, status) in &res.trace {
            if status.is_feasible() {
                let s = crate::search::with_axis_value(&spec, axis, *value, model.rules())?;
                audited_solve(&mut self.soundness, &format!("{kind} {axis}={value}"), model, &s, &self.options)?;
            }
        }
        Ok(res.best)
    }

    fn example2_maxima(&mut self) -> Result<(f64, f64, f64)> {
        if let Some(m) = self.maxima {
            return Ok(m);
        }
        let model = example2_reference()?;
        let phi = self.bisect(&model, ConditionKind::Mozelli, HyperAxis::Phi, 8.0)?;
        let b = self.bisect(&model, ConditionKind::Vertex, HyperAxis::B, 0.5)?;
        let eta = self.bisect(&model, ConditionKind::Ball, HyperAxis::Eta, 2.0)?;
        self.maxima = Some((phi, b, eta));
        Ok((phi, b, eta))
    }

    fn maxima_checks(&mut self) -> Result<Vec<Check>> {
        let start = Instant::now();
        let (phi, b, eta) = self.example2_maxima()?;
        let secs = start.elapsed().as_secs_f64();
        let within = |got: f64, want: f64| ((got - want) / want).abs() <= MAXIMA_TOL;
        let line = |got: f64, want: f64| format!("{got:.4} vs {want} ({:+.1}%)", 100.0 * (got - want) / want);
        Ok(vec![
            check("1.phi", within(phi, PHI_STAR), line(phi, PHI_STAR)),
            check("1.b", within(b, B_STAR), line(b, B_STAR)),
            check("1.eta", within(eta, ETA_STAR), line(eta, ETA_STAR)),
            check("1.runtime", secs < 120.0, format!("{secs:.2}s")),
        ])
    }

    fn audit_sweep(&mut self, res: &SweepResult) -> Result<()> {
        for (i, row) in res.verdicts.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_feasible() {
                    continue;
                }
                let mut p = res.base_params.clone();
                p.insert(res.axes[0].name.clone(), res.axes[0].value(i));
                p.insert(res.axes[1].name.clone(), res.axes[1].value(j));
                let model = fixture(&res.fixture, &p)?;
                let problem = res.condition.build(&model)?;
                let what = format!("{} sweep cell ({i}, {j})", res.condition.kind);
                self.soundness.record(&what, &problem, res.certificates[i][j].as_ref());
            }
        }
        Ok(())
    }

    fn inclusion_checks(&mut self) -> Result<Vec<Check>> {
        let start = Instant::now();
        let r = example2_reference()?.rules();
        let axes = [SweepAxis::new("a", -10.0, 0.0, 11), SweepAxis::new("b", 0.0, 200.0, 11)];
        let base = BTreeMap::new();
        let mut run = |spec: ConditionSpec| -> Result<SweepResult> {
            let res = sweep("example2", &base, axes.clone(), &spec, &self.options)?;
            self.audit_sweep(&res)?;
            Ok(res)
        };
        let mozelli = run(ConditionSpec::uniform(ConditionKind::Mozelli, r, 0.85)?)?;
        let others = [
            ("2.i", "Mozelli(0.85) in Vertex(0.1)", ConditionSpec::uniform(ConditionKind::Vertex, r, 0.1)?, Relation::AInB),
            ("2.ii", "Mozelli(0.85) vs Vertex(0.2) neither", ConditionSpec::uniform(ConditionKind::Vertex, r, 0.2)?, Relation::Neither),
            ("2.iii", "Mozelli(0.85) in Overbound(0.1)", ConditionSpec::uniform(ConditionKind::Overbound, r, 0.1)?, Relation::AInB),
            ("2.iv", "Mozelli(0.85) in Ball(0.9)", ConditionSpec::ball(0.9), Relation::AInB),
            ("2.v", "Mozelli(0.85) in Combined(0.85, 0.2)", ConditionSpec::combined(vec![0.85; r], vec![0.2; r]), Relation::AInB),
        ];
        let mut checks = Vec::new();
        for (name, what, spec, want) in others {
            let other = run(spec)?;
            let rep = compare_sweeps(&mozelli, &other)?;
            let passed = match want {
                Relation::AInB => rep.a_in_b.holds,
                _ => rep.relation == want,
            };
            checks.push(check(
                name,
                passed,
                format!(
                    "{what}: feasible {}/{} vs {}/{}, {} cells only in Mozelli, {} only in other, relation {:?}",
                    rep.a_feasible,
                    rep.cells,
                    rep.b_feasible,
                    rep.cells,
                    rep.a_in_b.violations.len(),
                    rep.b_in_a.violations.len(),
                    rep.relation
                ),
            ));
        }
        let secs = start.elapsed().as_secs_f64();
        checks.push(check("2.runtime", secs < 900.0, format!("{secs:.2}s")));
        Ok(checks)
    }

    fn limitation_checks(&mut self) -> Result<Vec<Check>> {
        const SMALL: [f64; 5] = [1e-3, 1e-2, 1e-1, 0.5, 1.0];
        const PHIS: [f64; 3] = [0.1, 1.0, 10.0];
        let mut checks = Vec::new();

        let cubic = fixture("cubic", &BTreeMap::new())?;
        let r = cubic.rules();
        let mut specs = vec![ConditionSpec::qlf()];
        for &phi in &PHIS {
            specs.push(ConditionSpec::tanaka(vec![phi; r]));
            specs.push(ConditionSpec::mozelli(vec![phi; r]));
            for &b in &SMALL {
                specs.push(ConditionSpec::combined(vec![phi; r], vec![b; r]));
            }
        }
        for &v in &SMALL {
            specs.push(ConditionSpec::vertex(vec![v; r]));
            specs.push(ConditionSpec::overbound(vec![v; r]));
            specs.push(ConditionSpec::ball(v));
        }
        let mut feasible = Vec::new();
        for spec in &specs {
            if audited_solve(&mut self.soundness, "cubic", &cubic, spec, &self.options)?.is_feasible() {
                feasible.push(format!("{spec:?}"));
            }
        }
        checks.push(check(
            "3.cubic",
            feasible.is_empty(),
            format!("{} probes, {} Feasible {feasible:?}", specs.len(), feasible.len()),
        ));

        let flf_none = |this: &mut Self, name: &str, model: &FuzzyModel| -> Result<Vec<String>> {
            let r = model.rules();
            let mut hits = Vec::new();
            for &phi in &PHIS {
                for spec in [ConditionSpec::tanaka(vec![phi; r]), ConditionSpec::mozelli(vec![phi; r])] {
                    if audited_solve(&mut this.soundness, name, model, &spec, &this.options)?.is_feasible() {
                        hits.push(format!("{} phi={phi}", spec.kind));
                    }
                }
            }
            Ok(hits)
        };

        let sine = fixture("scalar-sine", &BTreeMap::new())?;
        let hits = flf_none(self, "scalar-sine", &sine)?;
        checks.push(check("3.sine.flf", hits.is_empty(), format!("Feasible: {hits:?}")));
        let v = audited_solve(
            &mut self.soundness,
            "scalar-sine",
            &sine,
            &ConditionSpec::vertex(vec![0.05; sine.rules()]),
            &self.options,
        )?;
        checks.push(check("3.sine.vertex", v.is_feasible(), format!("vertex b=0.05: {v:?}")));

        let vdp = fixture("vdp", &params(&[("mu", -2.0)]))?;
        let hits = flf_none(self, "vdp", &vdp)?;
        checks.push(check("3.vdp.flf", hits.is_empty(), format!("Feasible: {hits:?}")));
        let r = vdp.rules();
        let local = [
            ConditionSpec::vertex(vec![1e-3; r]),
            ConditionSpec::overbound(vec![1e-3; r]),
            ConditionSpec::ball(1e-4),
        ];
        let mut verdicts = Vec::new();
        for spec in &local {
            verdicts.push((spec.kind, audited_solve(&mut self.soundness, "vdp", &vdp, spec, &self.options)?));
        }
        checks.push(check(
            "3.vdp.local",
            verdicts.iter().all(|(_, v)| v.is_feasible()),
            format!("{verdicts:?}"),
        ));
        Ok(checks)
    }

    fn converse_checks(&mut self) -> Result<Vec<Check>> {
        let mut rng = ChaCha8Rng::seed_from_u64(20_241_016);
        let mut failures = Vec::new();
        let mut abscissa_max = f64::NEG_INFINITY;
        for k in 0..50 {
            let model = random_hurwitz_model(&mut rng)?;
            abscissa_max = abscissa_max.max(spectral_abscissa(model.nominal_matrix()));
            let specs = [
                ConditionSpec::vertex(vec![1e-3; 2]),
                ConditionSpec::overbound(vec![1e-3; 2]),
                ConditionSpec::ball(1e-6),
            ];
            for spec in &specs {
                let v = audited_solve(&mut self.soundness, &format!("random model {k}"), &model, spec, &self.options)?;
                if !v.is_feasible() {
                    failures.push(format!("model {k} {}: {v:?}", spec.kind));
                }
            }
        }
        Ok(vec![
            check(
                "4.hurwitz",
                abscissa_max <= -0.1,
                format!("largest nominal spectral abscissa {abscissa_max:.4}"),
            ),
            check(
                "4.feasible",
                failures.is_empty(),
                format!("{} of 150 non-Feasible {failures:?}", failures.len()),
            ),
        ])
    }

    fn soundness_checks(&self) -> Vec<Check> {
        let log = &self.soundness;
        vec![check(
            "5.validated",
            log.checked > 0 && log.failures.is_empty(),
            format!("{} certificates, {} failures {:?}", log.checked, log.failures.len(), log.failures),
        )]
    }

    /// Domain-of-attraction estimate of `spec` on the Example 2 reference model.
    pub fn example2_da(&self, spec: &ConditionSpec) -> Result<DaEstimate> {
        let model = example2_reference()?;
        let problem = spec.build(&model)?;
        let v = solve(&problem, &self.options);
        let cert = v.certificate.filter(|_| v.status.is_feasible()).ok_or_else(|| {
            crate::Error::DegenerateRegion(format!("{} is {:?} on Example 2", spec.kind, v.status))
        })?;
        let lyap = spec.lyapunov(&problem, &cert)?;
        let n = self.mode.da_resolution();
        largest_sublevel(&model, &lyap, &spec.validity_region(), &[n, n])
    }

    fn da_checks(&mut self) -> Result<Vec<Check>> {
        let (phi, _, eta) = self.example2_maxima()?;
        let model = example2_reference()?;
        let moz = self.example2_da(&ConditionSpec::uniform(ConditionKind::Mozelli, model.rules(), phi)?)?;
        let ball = self.example2_da(&ConditionSpec::ball(eta))?;
        let cfg = IntegratorConfig::default();
        let mut checks = Vec::new();
        for (name, est, seed) in [("6.mozelli", &moz, 1), ("6.ball", &ball, 2)] {
            let audit = validate_da(&model, est, None, 500, &cfg, seed)?;
            checks.push(check(
                name,
                audit.passed(),
                format!(
                    "c*={:.4e}: converged {:.1}%, monotone {:.1}%, left box {}, max dV {:.2e}",
                    audit.level,
                    100.0 * audit.converged_fraction,
                    100.0 * audit.monotone_fraction,
                    audit.left_region,
                    audit.max_v_increase
                ),
            ));
        }
        let cmp = compare_da(&moz, &ball, phi, eta);
        checks.push(check(
            "6.containment",
            cmp.mozelli_outside_ball == 0 && cmp.ball_cells > cmp.mozelli_cells,
            format!(
                "Mozelli(phi={phi:.4}) {} cells, Ball(eta={eta:.4}) {} cells, {} Mozelli cells outside Ball",
                cmp.mozelli_cells, cmp.ball_cells, cmp.mozelli_outside_ball
            ),
        ));
        Ok(checks)
    }
}

/// Grid-cell comparison of two estimates on the same grid.
pub fn compare_da(mozelli: &DaEstimate, ball: &DaEstimate, phi: f64, eta: f64) -> DaComparison {
    let n = mozelli.grid.len().min(ball.grid.len());
    let inside = |e: &DaEstimate| (0..e.grid.len()).filter(|&i| e.in_sublevel(i)).count();
    DaComparison {
        mozelli_phi: phi,
        ball_eta: eta,
        mozelli_cells: inside(mozelli),
        ball_cells: inside(ball),
        mozelli_outside_ball: (0..n).filter(|&i| mozelli.in_sublevel(i) && !ball.in_sublevel(i)).count(),
    }
}

fn integrator_checks() -> Vec<Check> {
    let closed = |t: f64| 0.5 / (1.0 + 2.0 * 0.25 * t).sqrt();
    let cfg = IntegratorConfig {
        horizon: 10.0,
        ..Default::default()
    };
    let report = fixture("cubic", &BTreeMap::new()).and_then(|m| integrate(&m, &[0.5], None, &cfg));
    let report = match report {
        Ok(r) => r,
        Err(e) => return vec![check("7.integrate", false, e.to_string())],
    };
    [1.0, 10.0]
        .iter()
        .map(|&t| {
            let got = report
                .samples
                .iter()
                .find(|(s, _, _)| (s - t).abs() < 1e-9)
                .map_or(f64::NAN, |(_, x, _)| x[0]);
            let err = (got - closed(t)).abs();
            check(&format!("7.t={t}"), err < 1e-6, format!("|error| {err:.2e}"))
        })
        .collect()
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}
