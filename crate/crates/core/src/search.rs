//! Hyperparameter bisection and two-parameter feasibility sweeps.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{ConditionKind, ConditionSpec, Hyper};
use crate::error::{Error, Result};
use crate::lmi::Assignment;
use crate::model::{fixture, FuzzyModel};
use crate::sdp::{solve, SolverOptions, VerdictStatus};

/// Environment variable bounding the sweep worker pool.
pub const THREADS_ENV: &str = "TSLYAP_THREADS";

/// Fraction of cells an inclusion claim may violate.
pub const INCLUSION_TOLERANCE: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperAxis {
    Phi,
    B,
    Eta,
}

impl HyperAxis {
    pub fn name(self) -> &'static str {
        match self {
            HyperAxis::Phi => "phi",
            HyperAxis::B => "b",
            HyperAxis::Eta => "eta",
        }
    }

    /// The axis a kind is normally maximised over; `None` for `qlf`.
    pub fn natural(kind: ConditionKind) -> Option<Self> {
        match kind {
            ConditionKind::Qlf => None,
            ConditionKind::Tanaka | ConditionKind::Mozelli => Some(HyperAxis::Phi),
            ConditionKind::Vertex | ConditionKind::Overbound | ConditionKind::Combined => Some(HyperAxis::B),
            ConditionKind::Ball => Some(HyperAxis::Eta),
        }
    }

    /// Upper end of the admissible range.
    fn ceiling(self) -> f64 {
        match self {
            HyperAxis::B => 1.0,
            HyperAxis::Phi | HyperAxis::Eta => f64::INFINITY,
        }
    }
}

impl fmt::Display for HyperAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HyperAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi" => Ok(HyperAxis::Phi),
            "b" => Ok(HyperAxis::B),
            "eta" => Ok(HyperAxis::Eta),
            other => Err(Error::InvalidHyper(format!("unknown hyperparameter axis `{other}`"))),
        }
    }
}

/// `spec` with the `axis` hyperparameter set uniformly to `value`.
pub fn with_axis_value(spec: &ConditionSpec, axis: HyperAxis, value: f64, rules: usize) -> Result<ConditionSpec> {
    let uniform = vec![value; rules];
    let hyper = match (&spec.hyper, axis) {
        (Hyper::Phi(_), HyperAxis::Phi) => Hyper::Phi(uniform),
        (Hyper::B(_), HyperAxis::B) => Hyper::B(uniform),
        (Hyper::Eta(_), HyperAxis::Eta) => Hyper::Eta(value),
        (Hyper::PhiB { b, .. }, HyperAxis::Phi) => Hyper::PhiB { phi: uniform, b: b.clone() },
        (Hyper::PhiB { phi, .. }, HyperAxis::B) => Hyper::PhiB { phi: phi.clone(), b: uniform },
        (h, a) => {
            return Err(Error::InvalidHyper(format!(
                "{} with hyperparameters {h:?} has no `{a}` axis",
                spec.kind
            )))
        }
    };
    Ok(ConditionSpec { hyper, ..spec.clone() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BisectionResult {
    pub param: HyperAxis,
    /// Final bracket: feasible at `lo` (or the `lo = 0` limit), not feasible at `hi`.
    pub lo: f64,
    pub hi: f64,
    /// Largest value with a Feasible verdict.
    pub best: f64,
    pub trace: Vec<(f64, VerdictStatus)>,
    /// Feasible even at the top of the admissible range or search cap.
    pub saturated: bool,
    #[serde(skip)]
    pub best_certificate: Option<Assignment>,
    #[serde(skip)]
    pub best_spec: Option<ConditionSpec>,
}

/// Largest uniform value of `axis` for which `spec` is feasible on `model`,
/// assuming feasibility is downward closed. `tol` is relative to `hi`.
///
/// `lo = 0` is accepted without a solve for `phi` and `eta`, whose conditions
/// are not defined at zero. When `hi` is feasible it is doubled (up to 20 times;
/// `b` stops at 1).
pub fn bisect_hyper(
    model: &FuzzyModel,
    spec: &ConditionSpec,
    axis: HyperAxis,
    lo: f64,
    hi: f64,
    tol: f64,
    options: &SolverOptions,
) -> Result<BisectionResult> {
    if !(hi > lo && lo >= 0.0 && tol > 0.0) {
        return Err(Error::InvalidHyper(format!("bad bracket [{lo}, {hi}] with tol {tol}")));
    }
    let rules = model.rules();
    let mut trace = Vec::new();
    let mut best: Option<(f64, Assignment, ConditionSpec)> = None;
    let probe = |value: f64, trace: &mut Vec<(f64, VerdictStatus)>| -> Result<Option<(Assignment, ConditionSpec)>> {
        let s = with_axis_value(spec, axis, value, rules)?;
        let problem = s.build(model)?;
        let v = solve(&problem, options);
        trace.push((value, v.status));
        Ok(match v.status {
            VerdictStatus::Feasible => v.certificate.map(|c| (c, s)),
            _ => None,
        })
    };

    let skip_lo = lo == 0.0 && axis != HyperAxis::B;
    if !skip_lo {
        match probe(lo, &mut trace)? {
            Some((c, s)) => best = Some((lo, c, s)),
            None => return Err(Error::NoFeasibleBracket { lo }),
        }
    }

    let (mut lo, mut hi) = (lo, hi.min(axis.ceiling()));
    let mut saturated = false;
    let mut doublings = 0;
    loop {
        match probe(hi, &mut trace)? {
            Some((c, s)) => {
                best = Some((hi, c, s));
                lo = hi;
                if hi >= axis.ceiling() || doublings == 20 {
                    saturated = true;
                    break;
                }
                hi = (2.0 * hi).min(axis.ceiling());
                doublings += 1;
            }
            None => break,
        }
    }

    if !saturated {
        while hi - lo > tol * hi {
            let mid = 0.5 * (lo + hi);
            match probe(mid, &mut trace)? {
                Some((c, s)) => {
                    best = Some((mid, c, s));
                    lo = mid;
                }
                None => hi = mid,
            }
        }
    }
    let (best_value, cert, best_spec) = match best {
        Some((v, c, s)) => (v, Some(c), Some(s)),
        None => (0.0, None, None),
    };
    Ok(BisectionResult {
        param: axis,
        lo,
        hi,
        best: best_value,
        trace,
        saturated,
        best_certificate: cert,
        best_spec,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl SweepAxis {
    pub fn new(name: &str, lo: f64, hi: f64, count: usize) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
            count,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count <= 1 {
            self.lo
        } else if i + 1 == self.count {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub fixture: String,
    pub base_params: BTreeMap<String, f64>,
    pub axes: [SweepAxis; 2],
    pub condition: ConditionSpec,
    /// `verdicts[i][j]` at `axes[0].value(i)`, `axes[1].value(j)`.
    pub verdicts: Vec<Vec<VerdictStatus>>,
    pub wall_times: Vec<Vec<f64>>,
    /// Worst validated slack of Feasible cells.
    pub slacks: Vec<Vec<Option<f64>>>,
    pub diagnostics: Vec<Vec<Option<String>>>,
    #[serde(skip)]
    pub certificates: Vec<Vec<Option<Assignment>>>,
}

impl SweepResult {
    pub fn feasible_count(&self) -> usize {
        self.verdicts.iter().flatten().filter(|v| v.is_feasible()).count()
    }

    pub fn cell_count(&self) -> usize {
        self.axes[0].count * self.axes[1].count
    }

    /// Columns `<axis0>, <axis1>, verdict, seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{},verdict,seconds\n", self.axes[0].name, self.axes[1].name);
        for i in 0..self.axes[0].count {
            for j in 0..self.axes[1].count {
                let _ = writeln!(
                    s,
                    "{},{},{},{:.6}",
                    self.axes[0].value(i),
                    self.axes[1].value(j),
                    self.verdicts[i][j].code(),
                    self.wall_times[i][j]
                );
            }
        }
        s
    }
}

/// Worker count from `TSLYAP_THREADS`, if set to a positive integer.
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Runs `f` on a pool bounded by `TSLYAP_THREADS` (rayon default otherwise).
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match thread_limit().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Sizes rayon's global pool from `TSLYAP_THREADS`. Has no effect once the
/// global pool exists.
pub fn configure_global_pool() {
    if let Some(n) = thread_limit() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Solves `condition` on every cell of the grid spanned by two fixture
/// parameters. Cells are independent; failures become Inconclusive.
pub fn sweep(
    fixture_name: &str,
    base_params: &BTreeMap<String, f64>,
    axes: [SweepAxis; 2],
    condition: &ConditionSpec,
    options: &SolverOptions,
) -> Result<SweepResult> {
    if axes.iter().any(|a| a.count == 0) {
        return Err(Error::InvalidHyper("sweep axes need at least one point".into()));
    }
    // fail early on unknown fixtures and parameters the fixture ignores
    let mut probe_params = base_params.clone();
    probe_params.insert(axes[0].name.clone(), axes[0].lo);
    probe_params.insert(axes[1].name.clone(), axes[1].lo);
    let probe = fixture(fixture_name, &probe_params)?;
    for a in &axes {
        if !probe.fixture_ref().map_or(false, |f| f.params.contains_key(&a.name)) {
            return Err(Error::InvalidHyper(format!("fixture `{fixture_name}` has no parameter `{}`", a.name)));
        }
    }
    condition.validate(probe.rules())?;

    let (n0, n1) = (axes[0].count, axes[1].count);
    type Cell = (VerdictStatus, f64, Option<f64>, Option<String>, Option<Assignment>);
    let cells: Vec<Cell> = with_pool(|| {
        (0..n0 * n1)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n1, k % n1);
                let start = Instant::now();
                let mut params = base_params.clone();
                params.insert(axes[0].name.clone(), axes[0].value(i));
                params.insert(axes[1].name.clone(), axes[1].value(j));
                let outcome = fixture(fixture_name, &params)
                    .and_then(|m| condition.build(&m))
                    .map(|p| solve(&p, options));
                let secs = start.elapsed().as_secs_f64();
                match outcome {
                    Ok(v) => {
                        let slack = v.margins.as_ref().map(|m| m.worst_slack());
                        (v.status, secs, slack, v.diagnostic, v.certificate)
                    }
                    Err(e) => (VerdictStatus::Inconclusive, secs, None, Some(e.to_string()), None),
                }
            })
            .collect()
    });

    let mut verdicts = vec![vec![VerdictStatus::Inconclusive; n1]; n0];
    let mut wall_times = vec![vec![0.0; n1]; n0];
    let mut slacks = vec![vec![None; n1]; n0];
    let mut diagnostics = vec![vec![None; n1]; n0];
    let mut certificates = vec![vec![None; n1]; n0];
    for (k, (v, t, s, d, c)) in cells.into_iter().enumerate() {
        let (i, j) = (k / n1, k % n1);
        verdicts[i][j] = v;
        wall_times[i][j] = t;
        slacks[i][j] = s;
        diagnostics[i][j] = d;
        certificates[i][j] = c;
    }
    Ok(SweepResult {
        fixture: fixture_name.to_string(),
        base_params: base_params.clone(),
        axes,
        condition: condition.clone(),
        verdicts,
        wall_times,
        slacks,
        diagnostics,
        certificates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Each feasible set contains the other.
    Mutual,
    AInB,
    BInA,
    Neither,
}

/// One direction of an inclusion claim.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionCheck {
    /// Cells `(i, j)` feasible in the first sweep but not in the second.
    pub violations: Vec<(usize, usize)>,
    /// Whether every violation has an Inconclusive verdict in the second sweep.
    pub violations_inconclusive: bool,
    /// No violations at all.
    pub strict: bool,
    /// At most 2% of cells violate, each Inconclusive in the second sweep.
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionReport {
    pub a_feasible: usize,
    pub b_feasible: usize,
    pub cells: usize,
    pub a_in_b: InclusionCheck,
    pub b_in_a: InclusionCheck,
    pub relation: Relation,
}

fn inclusion(from: &SweepResult, to: &SweepResult) -> InclusionCheck {
    let mut violations = Vec::new();
    for (i, row) in from.verdicts.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.is_feasible() && !to.verdicts[i][j].is_feasible() {
                violations.push((i, j));
            }
        }
    }
    let violations_inconclusive = violations
        .iter()
        .all(|&(i, j)| to.verdicts[i][j] == VerdictStatus::Inconclusive);
    let allowed = (INCLUSION_TOLERANCE * from.cell_count() as f64).floor() as usize;
    InclusionCheck {
        strict: violations.is_empty(),
        holds: violations.len() <= allowed && violations_inconclusive,
        violations_inconclusive,
        violations,
    }
}

/// Compares the Feasible cells of two sweeps on identical axes; Inconclusive
/// counts as not feasible.
pub fn compare_sweeps(a: &SweepResult, b: &SweepResult) -> Result<InclusionReport> {
    for (x, y) in a.axes.iter().zip(&b.axes) {
        if x.name != y.name || x.count != y.count || x.lo != y.lo || x.hi != y.hi {
            return Err(Error::AxisMismatch(format!("{x:?} vs {y:?}")));
        }
    }
    let a_in_b = inclusion(a, b);
    let b_in_a = inclusion(b, a);
    let relation = match (a_in_b.holds, b_in_a.holds) {
        (true, true) => Relation::Mutual,
        (true, false) => Relation::AInB,
        (false, true) => Relation::BInA,
        (false, false) => Relation::Neither,
    };
    Ok(InclusionReport {
        a_feasible: a.feasible_count(),
        b_feasible: b.feasible_count(),
        cells: a.cell_count(),
        a_in_b,
        b_in_a,
        relation,
    })
}

/// Scatter of feasible cells: filled markers for `base`, open markers for
/// `other` (the condition being compared against it).
pub fn sweep_svg(base: &SweepResult, other: Option<&SweepResult>) -> String {
    let (w, h, pad) = (480.0, 480.0, 50.0);
    let ax = &base.axes;
    let span = |a: &SweepAxis| if a.hi > a.lo { a.hi - a.lo } else { 1.0 };
    let sx = |v: f64| pad + (v - ax[0].lo) / span(&ax[0]) * (w - 2.0 * pad);
    let sy = |v: f64| h - pad - (v - ax[1].lo) / span(&ax[1]) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    if let Some(o) = other {
        for i in 0..ax[0].count {
            for j in 0..ax[1].count {
                if o.verdicts[i][j].is_feasible() {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="7" fill="none" stroke="red" stroke-width="1.5"/>"#,
                        sx(ax[0].value(i)),
                        sy(ax[1].value(j))
                    );
                }
            }
        }
    }
    for i in 0..ax[0].count {
        for j in 0..ax[1].count {
            if base.verdicts[i][j].is_feasible() {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="blue"/>"#,
                    sx(ax[0].value(i)),
                    sy(ax[1].value(j))
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{} in [{}, {}]</text>"#,
        w / 2.0,
        h - 15.0,
        ax[0].name,
        ax[0].lo,
        ax[0].hi
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {})">{} in [{}, {}]</text>"#,
        h / 2.0,
        h / 2.0,
        ax[1].name,
        ax[1].lo,
        ax[1].hi
    );
    let mut legend = format!("filled: {}", base.condition.kind);
    if let Some(o) = other {
        let _ = write!(legend, ", open: {}", o.condition.kind);
    }
    let _ = writeln!(s, r#"<text x="{pad}" y="30" font-size="13">{legend}</text>"#);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(verdicts: Vec<Vec<VerdictStatus>>) -> SweepResult {
        let n0 = verdicts.len();
        let n1 = verdicts[0].len();
        SweepResult {
            fixture: "example2".into(),
            base_params: BTreeMap::new(),
            axes: [SweepAxis::new("a", -10.0, 0.0, n0), SweepAxis::new("b", 0.0, 200.0, n1)],
            condition: ConditionSpec::qlf(),
            wall_times: vec![vec![0.0; n1]; n0],
            slacks: vec![vec![None; n1]; n0],
            diagnostics: vec![vec![None; n1]; n0],
            certificates: vec![vec![None; n1]; n0],
            verdicts,
        }
    }

    use VerdictStatus::{Feasible as F, Inconclusive as U, Infeasible as I};

    #[test]
    fn identical_sweeps_are_mutual() {
        let a = fake(vec![vec![F, I], vec![U, F]]);
        let r = compare_sweeps(&a, &a.clone()).unwrap();
        assert_eq!(r.relation, Relation::Mutual);
        assert!(r.a_in_b.strict && r.b_in_a.strict);
    }

    #[test]
    fn inclusion_directions() {
        let a = fake(vec![vec![F, I], vec![I, I]]);
        let b = fake(vec![vec![F, F], vec![I, I]]);
        assert_eq!(compare_sweeps(&a, &b).unwrap().relation, Relation::AInB);
        assert_eq!(compare_sweeps(&b, &a).unwrap().relation, Relation::BInA);
        let c = fake(vec![vec![I, F], vec![F, I]]);
        assert_eq!(compare_sweeps(&a, &c).unwrap().relation, Relation::Neither);
    }

    #[test]
    fn tolerance_needs_inconclusive_cells() {
        let va = vec![vec![F; 10]; 10];
        let mut vb = vec![vec![F; 10]; 10];
        vb[0][0] = U;
        vb[3][4] = U;
        let r = compare_sweeps(&fake(va.clone()), &fake(vb.clone())).unwrap();
        assert!(r.a_in_b.holds && !r.a_in_b.strict);
        vb[5][5] = U;
        assert!(!compare_sweeps(&fake(va.clone()), &fake(vb.clone())).unwrap().a_in_b.holds);
        vb[5][5] = F;
        vb[0][0] = I;
        assert!(!compare_sweeps(&fake(va), &fake(vb)).unwrap().a_in_b.holds);
    }

    #[test]
    fn axis_mismatch() {
        let a = fake(vec![vec![F, I], vec![I, I]]);
        let mut b = a.clone();
        b.axes[1].hi = 100.0;
        assert!(matches!(compare_sweeps(&a, &b), Err(Error::AxisMismatch(_))));
    }

    #[test]
    fn axis_values_hit_endpoints() {
        let a = SweepAxis::new("a", -10.0, 0.0, 11);
        assert_eq!(a.values(), (0..11).map(|i| -10.0 + i as f64).collect::<Vec<_>>());
        assert_eq!(SweepAxis::new("b", 0.0, 200.0, 11).value(10), 200.0);
    }

    #[test]
    fn csv_and_svg() {
        let a = fake(vec![vec![F, I], vec![U, F]]);
        let csv = a.to_csv();
        assert!(csv.starts_with("a,b,verdict,seconds\n"));
        assert_eq!(csv.lines().count(), 5);
        let svg = sweep_svg(&a, Some(&a));
        assert_eq!(svg.matches("<circle").count(), 4);
    }

    #[test]
    fn axis_substitution() {
        let s = ConditionSpec::combined(vec![1.0; 2], vec![0.1; 2]);
        let t = with_axis_value(&s, HyperAxis::B, 0.3, 2).unwrap();
        assert_eq!(t.hyper, Hyper::PhiB { phi: vec![1.0; 2], b: vec![0.3; 2] });
        assert!(with_axis_value(&s, HyperAxis::Eta, 0.3, 2).is_err());
    }
}
