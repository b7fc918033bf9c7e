//! LMI stability conditions for a [`FuzzyModel`].
//!
//! | kind | variables | constraints |
//! |------|-----------|-------------|
//! | `qlf` | `P` | `P > 0`, `A_i'P + PA_i < 0` |
//! | `tanaka` | `P_1..P_r` | `P_i > 0`, `sum phi_k P_k + pair(i,j) < 0`, `i <= j` |
//! | `mozelli` | `P_1..P_r`, `M` | `P_i > 0`, `P_i + M >= 0`, `sum phi_k (P_k + M) + pair(i,j) < 0` |
//! | `vertex` | `P`, `M` | `P > 0`, `A_0'P + PA_0 + sum d_i (A_i'P + PA_i + M) < 0` at every vertex `d` |
//! | `overbound` | `P`, `M` | `P > 0`, `A_i'P + PA_i + M < 0`, `A_0'P + PA_0 - sum b_i (A_i'P + PA_i + M) < 0` |
//! | `ball` | `P`, `G`, `M` (general) | `P > 0`, `G > 0`, `[[eta G + PA_0 + A_0'P, Gamma'], [Gamma, -I (x) G]] < 0` |
//! | `combined` | `P_0..P_r`, `M`, `N`, `W` | see [`build_combined`] |
//!
//! with `pair(i,j) = (A_i'P_j + P_jA_i + A_j'P_i + P_iA_j) / 2` and
//! `Gamma = [PA_1 + M; ...; PA_r + M]`. Strict inequalities use the problem
//! margin, by default [`default_margin`].

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{
    lyap_expr, schur_embed, vertex_enumerate, AffineExpr, AffineSymExpr, Assignment, LmiProblem, MatrixVar,
    Sense, Symmetry,
};
use crate::model::FuzzyModel;
use crate::regions::{LyapunovFn, RegionSpec};

/// Largest rule count accepted by [`build_combined`].
pub const MAX_COMBINED_RULES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Qlf,
    Tanaka,
    Mozelli,
    Vertex,
    Overbound,
    Ball,
    Combined,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 7] = [
        ConditionKind::Qlf,
        ConditionKind::Tanaka,
        ConditionKind::Mozelli,
        ConditionKind::Vertex,
        ConditionKind::Overbound,
        ConditionKind::Ball,
        ConditionKind::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionKind::Qlf => "qlf",
            ConditionKind::Tanaka => "tanaka",
            ConditionKind::Mozelli => "mozelli",
            ConditionKind::Vertex => "vertex",
            ConditionKind::Overbound => "overbound",
            ConditionKind::Ball => "ball",
            ConditionKind::Combined => "combined",
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConditionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidHyper(format!("unknown condition `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyper {
    None,
    Phi(Vec<f64>),
    B(Vec<f64>),
    Eta(f64),
    PhiB { phi: Vec<f64>, b: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub kind: ConditionKind,
    pub hyper: Hyper,
    /// Strictness margin; `None` selects [`default_margin`].
    pub margin: Option<f64>,
}

impl ConditionSpec {
    pub fn qlf() -> Self {
        Self::new(ConditionKind::Qlf, Hyper::None)
    }

    pub fn tanaka(phi: Vec<f64>) -> Self {
        Self::new(ConditionKind::Tanaka, Hyper::Phi(phi))
    }

    pub fn mozelli(phi: Vec<f64>) -> Self {
        Self::new(ConditionKind::Mozelli, Hyper::Phi(phi))
    }

    pub fn vertex(b: Vec<f64>) -> Self {
        Self::new(ConditionKind::Vertex, Hyper::B(b))
    }

    pub fn overbound(b: Vec<f64>) -> Self {
        Self::new(ConditionKind::Overbound, Hyper::B(b))
    }

    pub fn ball(eta: f64) -> Self {
        Self::new(ConditionKind::Ball, Hyper::Eta(eta))
    }

    pub fn combined(phi: Vec<f64>, b: Vec<f64>) -> Self {
        Self::new(ConditionKind::Combined, Hyper::PhiB { phi, b })
    }

    /// Same value for every rule (`phi`, `b`) or the scalar `eta`; for
    /// `combined` both `phi` and `b` are needed, use [`ConditionSpec::combined`].
    pub fn uniform(kind: ConditionKind, rules: usize, value: f64) -> Result<Self> {
        Ok(match kind {
            ConditionKind::Qlf => Self::qlf(),
            ConditionKind::Tanaka => Self::tanaka(vec![value; rules]),
            ConditionKind::Mozelli => Self::mozelli(vec![value; rules]),
            ConditionKind::Vertex => Self::vertex(vec![value; rules]),
            ConditionKind::Overbound => Self::overbound(vec![value; rules]),
            ConditionKind::Ball => Self::ball(value),
            ConditionKind::Combined => {
                return Err(Error::InvalidHyper(
                    "combined needs both phi and b".into(),
                ))
            }
        })
    }

    pub fn new(kind: ConditionKind, hyper: Hyper) -> Self {
        Self {
            kind,
            hyper,
            margin: None,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = Some(margin);
        self
    }

    /// Checks that the hyperparameters match the kind and the rule count.
    pub fn validate(&self, rules: usize) -> Result<()> {
        match (self.kind, &self.hyper) {
            (ConditionKind::Qlf, Hyper::None) => Ok(()),
            (ConditionKind::Tanaka | ConditionKind::Mozelli, Hyper::Phi(phi)) => check_phi(phi, rules),
            (ConditionKind::Vertex | ConditionKind::Overbound, Hyper::B(b)) => check_b(b, rules),
            (ConditionKind::Ball, Hyper::Eta(eta)) => check_eta(*eta),
            (ConditionKind::Combined, Hyper::PhiB { phi, b }) => {
                check_phi(phi, rules)?;
                check_b(b, rules)
            }
            (kind, hyper) => Err(Error::InvalidHyper(format!(
                "{kind} does not take hyperparameters {hyper:?}"
            ))),
        }
    }

    pub fn build(&self, model: &FuzzyModel) -> Result<LmiProblem> {
        self.validate(model.rules())?;
        let problem = match (&self.hyper, self.kind) {
            (_, ConditionKind::Qlf) => build_qlf_common(model)?,
            (Hyper::Phi(phi), ConditionKind::Tanaka) => build_flf_tanaka(model, phi)?,
            (Hyper::Phi(phi), ConditionKind::Mozelli) => build_flf_mozelli(model, phi)?,
            (Hyper::B(b), ConditionKind::Vertex) => build_local_qlf_vertex(model, b)?,
            (Hyper::B(b), ConditionKind::Overbound) => build_local_qlf_overbound(model, b)?,
            (Hyper::Eta(eta), ConditionKind::Ball) => build_local_qlf_ball(model, *eta)?,
            (Hyper::PhiB { phi, b }, ConditionKind::Combined) => build_combined(model, phi, b)?,
            _ => unreachable!("validated above"),
        };
        match self.margin {
            Some(m) => problem.with_margin(m),
            None => Ok(problem),
        }
    }

    /// The set a certified sublevel set has to stay inside.
    pub fn validity_region(&self) -> RegionSpec {
        match &self.hyper {
            Hyper::None => RegionSpec::Modeling,
            Hyper::Phi(phi) => RegionSpec::OmegaPhi(phi.clone()),
            Hyper::B(b) => RegionSpec::Hb(b.clone()),
            Hyper::Eta(eta) => RegionSpec::UEta(*eta),
            Hyper::PhiB { phi, b } => {
                RegionSpec::Intersection(vec![RegionSpec::Hb(b.clone()), RegionSpec::OmegaPhi(phi.clone())])
            }
        }
    }

    /// Reads the Lyapunov function out of a certificate for a problem built by
    /// this spec.
    pub fn lyapunov(&self, problem: &LmiProblem, certificate: &Assignment) -> Result<LyapunovFn> {
        let get = |name: &str| -> Result<DMatrix<f64>> {
            let v = problem
                .var_by_name(name)
                .ok_or_else(|| Error::UndeclaredVariable(name.to_string()))?;
            certificate
                .get(&v.id)
                .cloned()
                .ok_or_else(|| Error::MissingAssignment(name.to_string()))
        };
        let rules = problem
            .variables()
            .iter()
            .filter(|v| v.name.starts_with('P') && v.name[1..].parse::<usize>().map_or(false, |i| i >= 1))
            .count();
        let fuzzy = |rules: usize| -> Result<Vec<DMatrix<f64>>> { (1..=rules).map(|i| get(&format!("P{i}"))).collect() };
        Ok(match self.kind {
            ConditionKind::Qlf | ConditionKind::Vertex | ConditionKind::Overbound | ConditionKind::Ball => {
                LyapunovFn::Quadratic(get("P")?)
            }
            ConditionKind::Tanaka | ConditionKind::Mozelli => LyapunovFn::Fuzzy(fuzzy(rules)?),
            ConditionKind::Combined => LyapunovFn::Combined {
                p0: get("P0")?,
                p: fuzzy(rules)?,
            },
        })
    }
}

fn check_phi(phi: &[f64], rules: usize) -> Result<()> {
    if phi.len() != rules {
        return Err(Error::InvalidHyper(format!("phi has {} entries for {rules} rules", phi.len())));
    }
    if let Some(v) = phi.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidHyper(format!("phi must be positive, got {v}")));
    }
    Ok(())
}

fn check_b(b: &[f64], rules: usize) -> Result<()> {
    if b.len() != rules {
        return Err(Error::InvalidHyper(format!("b has {} entries for {rules} rules", b.len())));
    }
    if let Some(v) = b.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidHyper(format!("b must lie in [0, 1], got {v}")));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidHyper(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

/// `1e-6 (1 + max_i |A_i|_2)`.
pub fn default_margin(model: &FuzzyModel) -> f64 {
    1e-6 * (1.0 + model.max_vertex_norm())
}

fn new_problem(model: &FuzzyModel) -> Result<LmiProblem> {
    LmiProblem::new(default_margin(model))
}

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

fn sym_vars(problem: &mut LmiProblem, prefix: &str, range: std::ops::RangeInclusive<usize>, n: usize) -> Vec<MatrixVar> {
    range
        .map(|i| problem.add_var(&format!("{prefix}{i}"), n, Symmetry::Symmetric))
        .collect()
}

/// `(A_i'P_j + P_jA_i + A_j'P_i + P_iA_j) / 2`.
fn pair_term(model: &FuzzyModel, p: &[MatrixVar], i: usize, j: usize) -> Result<AffineSymExpr> {
    let a = model.vertices();
    Ok(lyap_expr(&a[i], &p[j])?.plus(&lyap_expr(&a[j], &p[i])?)?.scaled(0.5))
}

/// `A'P + PA + M`.
fn lyap_plus(a: &DMatrix<f64>, p: &MatrixVar, m: &MatrixVar) -> Result<AffineSymExpr> {
    lyap_expr(a, p)?.plus(&AffineSymExpr::var(m))
}

pub fn build_qlf_common(model: &FuzzyModel) -> Result<LmiProblem> {
    let n = model.dim();
    let mut prob = new_problem(model)?;
    let p = prob.add_var("P", n, Symmetry::Symmetric);
    prob.add_constraint("P > 0", AffineSymExpr::var(&p), Sense::PositiveDefinite)?;
    for (i, a) in model.vertices().iter().enumerate() {
        prob.add_constraint(format!("A{0}'P + PA{0} < 0", i + 1), lyap_expr(a, &p)?, Sense::NegativeDefinite)?;
    }
    Ok(prob)
}

pub fn build_flf_tanaka(model: &FuzzyModel, phi: &[f64]) -> Result<LmiProblem> {
    let (n, r) = (model.dim(), model.rules());
    check_phi(phi, r)?;
    let mut prob = new_problem(model)?;
    let p = sym_vars(&mut prob, "P", 1..=r, n);
    for (i, pi) in p.iter().enumerate() {
        prob.add_constraint(format!("P{} > 0", i + 1), AffineSymExpr::var(pi), Sense::PositiveDefinite)?;
    }
    let mut weighted = AffineSymExpr::zero(n);
    for (pk, fk) in p.iter().zip(phi) {
        weighted = weighted.plus(&AffineSymExpr::var(pk).scaled(*fk))?;
    }
    for i in 0..r {
        for j in i..r {
            let e = weighted.clone().plus(&pair_term(model, &p, i, j)?)?;
            prob.add_constraint(format!("pair ({}, {})", i + 1, j + 1), e, Sense::NegativeDefinite)?;
        }
    }
    Ok(prob)
}

pub fn build_flf_mozelli(model: &FuzzyModel, phi: &[f64]) -> Result<LmiProblem> {
    let (n, r) = (model.dim(), model.rules());
    check_phi(phi, r)?;
    let mut prob = new_problem(model)?;
    let p = sym_vars(&mut prob, "P", 1..=r, n);
    let m = prob.add_var("M", n, Symmetry::Symmetric);
    for (i, pi) in p.iter().enumerate() {
        prob.add_constraint(format!("P{} > 0", i + 1), AffineSymExpr::var(pi), Sense::PositiveDefinite)?;
    }
    for (i, pi) in p.iter().enumerate() {
        let e = AffineSymExpr::var(pi).plus(&AffineSymExpr::var(&m))?;
        prob.add_constraint(format!("P{} + M >= 0", i + 1), e, Sense::PositiveSemidefinite)?;
    }
    let mut weighted = AffineSymExpr::zero(n);
    for (pk, fk) in p.iter().zip(phi) {
        let e = AffineSymExpr::var(pk).plus(&AffineSymExpr::var(&m))?;
        weighted = weighted.plus(&e.scaled(*fk))?;
    }
    for i in 0..r {
        for j in i..r {
            let e = weighted.clone().plus(&pair_term(model, &p, i, j)?)?;
            prob.add_constraint(format!("pair ({}, {})", i + 1, j + 1), e, Sense::NegativeDefinite)?;
        }
    }
    Ok(prob)
}

fn vertex_label(delta: &[f64]) -> String {
    let signs: String = delta
        .iter()
        .map(|d| match d.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Less) => '-',
            Some(std::cmp::Ordering::Greater) => '+',
            _ => '0',
        })
        .collect();
    format!("vertex [{signs}]")
}

/// `A_0'P + PA_0 + sum_i d_i (A_i'P + PA_i + M)`.
fn perturbed_lyap(model: &FuzzyModel, p: &MatrixVar, m: &MatrixVar, delta: &[f64]) -> Result<AffineSymExpr> {
    let mut e = lyap_expr(model.nominal_matrix(), p)?;
    for (a, d) in model.vertices().iter().zip(delta) {
        if *d != 0.0 {
            e = e.plus(&lyap_plus(a, p, m)?.scaled(*d))?;
        }
    }
    Ok(e)
}

pub fn build_local_qlf_vertex(model: &FuzzyModel, b: &[f64]) -> Result<LmiProblem> {
    let n = model.dim();
    check_b(b, model.rules())?;
    let vertices = vertex_enumerate(b)?;
    let mut prob = new_problem(model)?;
    let p = prob.add_var("P", n, Symmetry::Symmetric);
    let m = prob.add_var("M", n, Symmetry::Symmetric);
    prob.add_constraint("P > 0", AffineSymExpr::var(&p), Sense::PositiveDefinite)?;
    for delta in &vertices {
        prob.add_constraint(vertex_label(delta), perturbed_lyap(model, &p, &m, delta)?, Sense::NegativeDefinite)?;
    }
    Ok(prob)
}

pub fn build_local_qlf_overbound(model: &FuzzyModel, b: &[f64]) -> Result<LmiProblem> {
    let n = model.dim();
    check_b(b, model.rules())?;
    let mut prob = new_problem(model)?;
    let p = prob.add_var("P", n, Symmetry::Symmetric);
    let m = prob.add_var("M", n, Symmetry::Symmetric);
    prob.add_constraint("P > 0", AffineSymExpr::var(&p), Sense::PositiveDefinite)?;
    let mut nominal = lyap_expr(model.nominal_matrix(), &p)?;
    for (i, (a, bi)) in model.vertices().iter().zip(b).enumerate() {
        let e = lyap_plus(a, &p, &m)?;
        nominal = nominal.plus(&e.clone().scaled(-bi))?;
        prob.add_constraint(format!("A{0}'P + PA{0} + M < 0", i + 1), e, Sense::NegativeDefinite)?;
    }
    prob.add_constraint("nominal", nominal, Sense::NegativeDefinite)?;
    Ok(prob)
}

/// The ball condition; `G > 0` is imposed explicitly since the Schur step
/// needs it.
pub fn build_local_qlf_ball(model: &FuzzyModel, eta: f64) -> Result<LmiProblem> {
    let (n, r) = (model.dim(), model.rules());
    check_eta(eta)?;
    let mut prob = new_problem(model)?;
    let p = prob.add_var("P", n, Symmetry::Symmetric);
    let g = prob.add_var("G", n, Symmetry::Symmetric);
    let m = prob.add_var("M", n, Symmetry::General);
    prob.add_constraint("P > 0", AffineSymExpr::var(&p), Sense::PositiveDefinite)?;
    prob.add_constraint("G > 0", AffineSymExpr::var(&g), Sense::PositiveDefinite)?;
    let block11 = lyap_expr(model.nominal_matrix(), &p)?.plus(&AffineSymExpr::var(&g).scaled(eta))?;
    let gamma = model
        .vertices()
        .iter()
        .map(|a| {
            let mut e = AffineExpr::zero(n, n);
            e.push_term(1.0, &p, eye(n), a.clone())?;
            e.push_term(1.0, &m, eye(n), eye(n))?;
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    prob.add_constraint("schur block", schur_embed(&block11, &gamma, &g, r)?, Sense::NegativeDefinite)?;
    Ok(prob)
}

/// The combined fuzzy/quadratic condition:
///
/// * `P_i + N > 0` for every rule,
/// * `sum_i d_i (P_i + W) + sum_i alpha_i(0) P_i + P_0 > 0` at every vertex `d`,
/// * `sum_k phi_k (P_k + N) + pair(i,j) + A_0'P_0 + P_0A_0 + sum_k d_k (A_k'P_0 + P_0A_k + M) < 0`
///   at every vertex `d` and every pair `i <= j`.
pub fn build_combined(model: &FuzzyModel, phi: &[f64], b: &[f64]) -> Result<LmiProblem> {
    let (n, r) = (model.dim(), model.rules());
    if r > MAX_COMBINED_RULES {
        return Err(Error::TooManyRules {
            what: "the combined condition",
            rules: r,
            limit: MAX_COMBINED_RULES,
        });
    }
    check_phi(phi, r)?;
    check_b(b, r)?;
    let vertices = vertex_enumerate(b)?;
    let alpha0 = model.memberships().alpha_at_origin();

    let mut prob = new_problem(model)?;
    let p0 = prob.add_var("P0", n, Symmetry::Symmetric);
    let p = sym_vars(&mut prob, "P", 1..=r, n);
    let m = prob.add_var("M", n, Symmetry::Symmetric);
    let nv = prob.add_var("N", n, Symmetry::Symmetric);
    let w = prob.add_var("W", n, Symmetry::Symmetric);

    for (i, pi) in p.iter().enumerate() {
        let e = AffineSymExpr::var(pi).plus(&AffineSymExpr::var(&nv))?;
        prob.add_constraint(format!("P{} + N > 0", i + 1), e, Sense::PositiveDefinite)?;
    }

    let mut base = AffineSymExpr::var(&p0);
    for (pi, a0) in p.iter().zip(alpha0.iter()) {
        base = base.plus(&AffineSymExpr::var(pi).scaled(*a0))?;
    }
    for delta in &vertices {
        let mut e = base.clone();
        for (pi, d) in p.iter().zip(delta) {
            if *d != 0.0 {
                e = e.plus(&AffineSymExpr::var(pi).plus(&AffineSymExpr::var(&w))?.scaled(*d))?;
            }
        }
        prob.add_constraint(format!("positivity {}", vertex_label(delta)), e, Sense::PositiveDefinite)?;
    }

    let mut weighted = AffineSymExpr::zero(n);
    for (pk, fk) in p.iter().zip(phi) {
        let e = AffineSymExpr::var(pk).plus(&AffineSymExpr::var(&nv))?;
        weighted = weighted.plus(&e.scaled(*fk))?;
    }
    for delta in &vertices {
        let local = weighted.clone().plus(&perturbed_lyap(model, &p0, &m, delta)?)?;
        for i in 0..r {
            for j in i..r {
                let e = local.clone().plus(&pair_term(model, &p, i, j)?)?;
                prob.add_constraint(
                    format!("decrease {} pair ({}, {})", vertex_label(delta), i + 1, j + 1),
                    e,
                    Sense::NegativeDefinite,
                )?;
            }
        }
    }
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixture, MembershipFamily, StateBox};
    use crate::sdp::{solve, SolverOptions, VerdictStatus};
    use nalgebra::DVector;
    use std::collections::BTreeMap;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn single_rule(a: DMatrix<f64>) -> FuzzyModel {
        let n = a.nrows();
        let mf = MembershipFamily::new(1, n, |_| DVector::from_element(1, 1.0))
            .unwrap()
            .with_gradient(move |_| DMatrix::zeros(1, n));
        FuzzyModel::new(vec![a], mf, StateBox::symmetric(&vec![1.0; n]).unwrap()).unwrap()
    }

    fn status(spec: &ConditionSpec, model: &FuzzyModel) -> VerdictStatus {
        let prob = spec.build(model).unwrap();
        let v = solve(&prob, &SolverOptions::default());
        if v.status == VerdictStatus::Feasible {
            assert!(v.margins.as_ref().unwrap().passed);
        }
        v.status
    }

    #[test]
    fn constraint_counts() {
        let m = fixture("example2", &params(&[("a", -8.0), ("b", 100.0)])).unwrap();
        let r = 4;
        assert_eq!(build_qlf_common(&m).unwrap().constraints().len(), r + 1);
        assert_eq!(build_flf_tanaka(&m, &[1.0; 4]).unwrap().constraints().len(), r + r * (r + 1) / 2);
        assert_eq!(
            build_flf_mozelli(&m, &[1.0; 4]).unwrap().constraints().len(),
            2 * r + r * (r + 1) / 2
        );
        assert_eq!(build_local_qlf_vertex(&m, &[0.1; 4]).unwrap().constraints().len(), 16 + 1);
        assert_eq!(build_local_qlf_overbound(&m, &[0.1; 4]).unwrap().constraints().len(), r + 2);
        let ball = build_local_qlf_ball(&m, 0.5).unwrap();
        assert_eq!(ball.constraints().len(), 3);
        assert_eq!(ball.constraints()[2].expr.dim(), 10);
        assert_eq!(
            build_combined(&m, &[1.0; 4], &[0.2; 4]).unwrap().constraints().len(),
            r + 16 + 16 * r * (r + 1) / 2
        );
    }

    #[test]
    fn hyper_validation() {
        let m = fixture("cubic", &BTreeMap::new()).unwrap();
        assert!(ConditionSpec::mozelli(vec![1.0]).build(&m).is_err());
        assert!(ConditionSpec::mozelli(vec![0.0, 1.0]).build(&m).is_err());
        assert!(ConditionSpec::vertex(vec![1.5, 0.1]).build(&m).is_err());
        assert!(ConditionSpec::ball(0.0).build(&m).is_err());
        assert!(ConditionSpec::new(ConditionKind::Ball, Hyper::B(vec![0.1, 0.1])).build(&m).is_err());
        assert!(ConditionSpec::uniform(ConditionKind::Combined, 2, 0.1).is_err());
        assert_eq!("overbound".parse::<ConditionKind>().unwrap(), ConditionKind::Overbound);
        assert!("lemma".parse::<ConditionKind>().is_err());
    }

    #[test]
    fn combined_rule_guard() {
        let r = 13;
        let mf = MembershipFamily::new(r, 1, move |_| {
            let mut v = DVector::zeros(r);
            v[0] = 1.0;
            v
        })
        .unwrap();
        let model = FuzzyModel::new(vec![DMatrix::from_element(1, 1, -1.0); r], mf, StateBox::symmetric(&[1.0]).unwrap()).unwrap();
        assert!(matches!(
            build_combined(&model, &vec![1.0; r], &vec![0.1; r]),
            Err(Error::TooManyRules { .. })
        ));
    }

    #[test]
    fn single_rule_hurwitz_everything_feasible() {
        let model = single_rule(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.0]));
        for spec in [
            ConditionSpec::qlf(),
            ConditionSpec::tanaka(vec![0.1]),
            ConditionSpec::mozelli(vec![0.1]),
            ConditionSpec::vertex(vec![0.0]),
            ConditionSpec::overbound(vec![0.0]),
            ConditionSpec::ball(1e-3),
            ConditionSpec::combined(vec![0.1], vec![0.1]),
        ] {
            assert_eq!(status(&spec, &model), VerdictStatus::Feasible, "{spec:?}");
        }
    }

    #[test]
    fn scalar_sine_flf_infeasible_vertex_feasible() {
        let m = fixture("scalar-sine", &BTreeMap::new()).unwrap();
        for phi in [0.1, 1.0, 10.0] {
            assert_ne!(status(&ConditionSpec::tanaka(vec![phi; 2]), &m), VerdictStatus::Feasible);
            assert_ne!(status(&ConditionSpec::mozelli(vec![phi; 2]), &m), VerdictStatus::Feasible);
        }
        assert_eq!(status(&ConditionSpec::vertex(vec![0.05; 2]), &m), VerdictStatus::Feasible);
    }

    #[test]
    fn lyapunov_extraction() {
        let model = single_rule(DMatrix::from_element(1, 1, -1.0));
        let spec = ConditionSpec::combined(vec![0.1], vec![0.1]);
        let prob = spec.build(&model).unwrap();
        let v = solve(&prob, &SolverOptions::default());
        let lf = spec.lyapunov(&prob, v.certificate.as_ref().unwrap()).unwrap();
        assert!(matches!(lf, LyapunovFn::Combined { ref p, .. } if p.len() == 1));
        let spec = ConditionSpec::mozelli(vec![0.1]);
        let prob = spec.build(&model).unwrap();
        let v = solve(&prob, &SolverOptions::default());
        let lf = spec.lyapunov(&prob, v.certificate.as_ref().unwrap()).unwrap();
        assert!(matches!(lf, LyapunovFn::Fuzzy(ref p) if p.len() == 1));
    }
}
