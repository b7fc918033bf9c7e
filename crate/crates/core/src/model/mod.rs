//! Takagi-Sugeno fuzzy models.
//!
//! A model is a set of vertex matrices `A_1..A_r`, a membership family
//! `alpha(x)` taking values in the unit simplex, and a modelling box `X`.
//! The dynamics are `dx/dt = sum_i alpha_i(x) A_i x` for `x` in `X`.

mod fixtures;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fixtures::{fixture, fixture_catalog, FixtureInfo};

/// Tolerance on `sum_i alpha_i(x) = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Axis-aligned modelling region `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StateBox {
    /// Requires `lower < upper` componentwise and the origin inside the closed box.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidModel(format!("axis {k}: lower {lo} >= upper {hi}")));
            }
            if *lo > 0.0 || *hi < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "axis {k}: [{lo}, {hi}] does not contain the origin"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn symmetric(half_widths: &[f64]) -> Result<Self> {
        Self::new(half_widths.iter().map(|h| -h).collect(), half_widths.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }
}

pub type MembershipEval = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
pub type MembershipGrad = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// How a membership gradient was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientSource {
    Analytic,
    /// Central differences; results depending on it are approximate.
    FiniteDifference,
}

/// `r` membership functions on `R^n`, with optional analytic gradients.
#[derive(Clone)]
pub struct MembershipFamily {
    rules: usize,
    dim: usize,
    eval: Arc<MembershipEval>,
    grad: Option<Arc<MembershipGrad>>,
    differentiable: bool,
    alpha0: DVector<f64>,
}

impl fmt::Debug for MembershipFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MembershipFamily")
            .field("rules", &self.rules)
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.grad.is_some())
            .field("differentiable", &self.differentiable)
            .field("alpha0", &self.alpha0.as_slice())
            .finish()
    }
}

impl MembershipFamily {
    /// Wraps an evaluator. The family is treated as differentiable (finite
    /// differences) until [`with_gradient`](Self::with_gradient) or
    /// [`non_differentiable`](Self::non_differentiable) says otherwise.
    pub fn new<F>(rules: usize, dim: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        if rules == 0 || dim == 0 {
            return Err(Error::InvalidModel("membership family needs r >= 1 and n >= 1".into()));
        }
        let alpha0 = eval(&vec![0.0; dim]);
        if alpha0.len() != rules {
            return Err(Error::Dimension(format!(
                "membership evaluator returned {} values for {} rules",
                alpha0.len(),
                rules
            )));
        }
        check_simplex(&alpha0)?;
        Ok(Self {
            rules,
            dim,
            eval: Arc::new(eval),
            grad: None,
            differentiable: true,
            alpha0,
        })
    }

    /// Attaches analytic gradients: `grad(x)` is the `r x n` matrix whose row
    /// `i` is `grad alpha_i(x)^T`.
    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(grad));
        self.differentiable = true;
        self
    }

    pub fn non_differentiable(mut self) -> Self {
        self.grad = None;
        self.differentiable = false;
        self
    }

    pub fn rules(&self) -> usize {
        self.rules
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        (self.eval)(x)
    }

    pub fn alpha_at_origin(&self) -> &DVector<f64> {
        &self.alpha0
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn is_differentiable(&self) -> bool {
        self.differentiable
    }

    /// Gradient matrix (`r x n`). Falls back to central differences with step
    /// `1e-6 (1 + |x_j|)` when no analytic gradient is attached.
    pub fn gradient(&self, x: &[f64]) -> Result<(DMatrix<f64>, GradientSource)> {
        if let Some(g) = &self.grad {
            return Ok((g(x), GradientSource::Analytic));
        }
        if !self.differentiable {
            return Err(Error::Unsupported(
                "membership functions are not differentiable".into(),
            ));
        }
        let mut out = DMatrix::zeros(self.rules, self.dim);
        let mut probe = x.to_vec();
        for j in 0..self.dim {
            let h = 1e-6 * (1.0 + x[j].abs());
            probe[j] = x[j] + h;
            let plus = self.eval(&probe);
            probe[j] = x[j] - h;
            let minus = self.eval(&probe);
            probe[j] = x[j];
            out.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        Ok((out, GradientSource::FiniteDifference))
    }
}

fn check_simplex(alpha: &DVector<f64>) -> Result<()> {
    let sum: f64 = alpha.iter().sum();
    let in_range = alpha
        .iter()
        .all(|a| *a >= -SIMPLEX_TOL && *a <= 1.0 + SIMPLEX_TOL);
    if !in_range || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidModel(format!(
            "membership values {:?} are not in the unit simplex",
            alpha.as_slice()
        )));
    }
    Ok(())
}

/// Name and runtime parameters of the fixture a model was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureRef {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

/// A Takagi-Sugeno fuzzy model. Immutable once built.
#[derive(Clone, Debug)]
pub struct FuzzyModel {
    vertices: Vec<DMatrix<f64>>,
    memberships: MembershipFamily,
    region: StateBox,
    nominal: DMatrix<f64>,
    fixture: Option<FixtureRef>,
}

impl FuzzyModel {
    pub fn new(
        vertices: Vec<DMatrix<f64>>,
        memberships: MembershipFamily,
        region: StateBox,
    ) -> Result<Self> {
        let n = region.dim();
        if vertices.is_empty() {
            return Err(Error::InvalidModel("at least one vertex matrix is required".into()));
        }
        for (i, a) in vertices.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Dimension(format!(
                    "A_{} is {}x{}, expected {n}x{n}",
                    i + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        if memberships.rules() != vertices.len() {
            return Err(Error::InvalidModel(format!(
                "{} vertex matrices but {} membership functions",
                vertices.len(),
                memberships.rules()
            )));
        }
        if memberships.dim() != n {
            return Err(Error::Dimension(format!(
                "membership family is defined on R^{}, region on R^{n}",
                memberships.dim()
            )));
        }
        let alpha0 = memberships.alpha_at_origin();
        let nominal = vertices
            .iter()
            .zip(alpha0.iter())
            .fold(DMatrix::zeros(n, n), |acc, (a, w)| acc + a * *w);
        Ok(Self {
            vertices,
            memberships,
            region,
            nominal,
            fixture: None,
        })
    }

    pub(crate) fn with_fixture(mut self, name: &str, params: BTreeMap<String, f64>) -> Self {
        self.fixture = Some(FixtureRef {
            name: name.to_string(),
            params,
        });
        self
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn rules(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[DMatrix<f64>] {
        &self.vertices
    }

    pub fn memberships(&self) -> &MembershipFamily {
        &self.memberships
    }

    pub fn region(&self) -> &StateBox {
        &self.region
    }

    pub fn fixture_ref(&self) -> Option<&FixtureRef> {
        self.fixture.as_ref()
    }

    /// `A_0 = sum_i alpha_i(0) A_i`.
    pub fn nominal_matrix(&self) -> &DMatrix<f64> {
        &self.nominal
    }

    /// Largest spectral norm among the vertex matrices.
    pub fn max_vertex_norm(&self) -> f64 {
        self.vertices
            .iter()
            .map(|a| a.clone().svd(false, false).singular_values.max())
            .fold(0.0, f64::max)
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "state has length {}, model has n = {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.region.contains(x) {
            return Err(Error::OutOfRegion { state: x.to_vec() });
        }
        Ok(())
    }

    /// `alpha(x)`, rejecting states outside `X`.
    pub fn membership(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_state(x)?;
        Ok(self.memberships.eval(x))
    }

    /// `A(alpha(x)) = sum_i alpha_i(x) A_i`.
    pub fn system_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let alpha = self.membership(x)?;
        Ok(self.blend(&alpha))
    }

    pub(crate) fn blend(&self, weights: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        self.vertices
            .iter()
            .zip(weights.iter())
            .fold(DMatrix::zeros(n, n), |acc, (a, w)| acc + a * *w)
    }

    /// `sum_i alpha_i(x) A_i x`.
    pub fn eval_dynamics(&self, x: &[f64]) -> Result<DVector<f64>> {
        let a = self.system_matrix(x)?;
        Ok(a * DVector::from_column_slice(x))
    }

    /// `alpha(x) - alpha(0)`; its components sum to zero.
    pub fn membership_deviation(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.membership(x)? - self.memberships.alpha_at_origin())
    }

    pub fn to_document(&self) -> ModelDocument {
        let (fixture, params) = match &self.fixture {
            Some(f) => (Some(f.name.clone()), f.params.clone()),
            None => (None, BTreeMap::new()),
        };
        ModelDocument {
            n: self.dim(),
            r: self.rules(),
            a: self.vertices.iter().map(matrix_rows).collect(),
            region: self.region.clone(),
            fixture,
            params,
        }
    }

    /// Rebuilds a model from its document. Membership functions are code, so
    /// the document must name a fixture; the stored matrices are checked
    /// against the rebuilt ones.
    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let name = doc
            .fixture
            .as_deref()
            .ok_or_else(|| Error::Unsupported("model document names no fixture".into()))?;
        let model = fixture(name, &doc.params)?;
        let same_shape = model.dim() == doc.n && model.rules() == doc.r && doc.a.len() == doc.r;
        let same_values = same_shape
            && model
                .vertices
                .iter()
                .zip(&doc.a)
                .all(|(m, rows)| matrix_rows(m) == *rows);
        if !same_values || model.region != doc.region {
            return Err(Error::InvalidModel(format!(
                "document does not match fixture `{name}` with the stored parameters"
            )));
        }
        Ok(model)
    }
}

/// JSON form of a model: `{n, r, A, region, fixture, params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n: usize,
    pub r: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
    pub region: StateBox,
    pub fixture: Option<String>,
    pub params: BTreeMap<String, f64>,
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Hurwitz test via eigenvalue real parts.
pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    a.complex_eigenvalues().iter().all(|l| l.re < 0.0)
}

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn dynamics_vanish_at_origin() {
        for (name, p) in [
            ("example2", params(&[("a", -8.0), ("b", 100.0)])),
            ("cubic", params(&[])),
            ("vdp", params(&[("mu", -2.0)])),
        ] {
            let m = fixture(name, &p).unwrap();
            let f = m.eval_dynamics(&vec![0.0; m.dim()]).unwrap();
            assert_eq!(f.norm(), 0.0, "{name}");
        }
    }

    #[test]
    fn cubic_dynamics_by_hand() {
        let m = fixture("cubic", &params(&[])).unwrap();
        let f = m.eval_dynamics(&[0.5]).unwrap();
        assert_abs_diff_eq!(f[0], -0.125, epsilon = 1e-15);
    }

    #[test]
    fn nominal_matrices() {
        let ex2 = fixture("example2", &params(&[("a", -8.0), ("b", 100.0)])).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-3.5, -4.0, 49.5, -5.0]);
        assert_abs_diff_eq!(ex2.nominal_matrix().clone(), expected, epsilon = 1e-12);
        for a in ex2.memberships().alpha_at_origin().iter() {
            assert_abs_diff_eq!(*a, 0.25, epsilon = 1e-15);
        }
        // dynamics Jacobian at the origin equals A_0
        let h = 1e-6;
        for j in 0..2 {
            let mut e = [0.0; 2];
            e[j] = h;
            let plus = ex2.eval_dynamics(&e).unwrap();
            e[j] = -h;
            let minus = ex2.eval_dynamics(&e).unwrap();
            let col = (plus - minus) / (2.0 * h);
            for i in 0..2 {
                assert_abs_diff_eq!(col[i], expected[(i, j)], epsilon = 1e-6);
            }
        }

        let cubic = fixture("cubic", &params(&[])).unwrap();
        assert_eq!(cubic.nominal_matrix()[(0, 0)], 0.0);

        let sine = fixture("scalar-sine", &params(&[])).unwrap();
        assert_abs_diff_eq!(sine.nominal_matrix()[(0, 0)], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn deviation_examples() {
        let m = fixture("cubic", &params(&[])).unwrap();
        assert_eq!(m.membership_deviation(&[0.0]).unwrap().norm(), 0.0);
        let d = m.membership_deviation(&[0.5]).unwrap();
        assert_abs_diff_eq!(d[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], -0.25, epsilon = 1e-15);
    }

    #[test]
    fn out_of_region_is_rejected() {
        let m = fixture("cubic", &params(&[])).unwrap();
        assert!(matches!(m.eval_dynamics(&[1.5]), Err(Error::OutOfRegion { .. })));
        assert!(matches!(m.eval_dynamics(&[0.1, 0.1]), Err(Error::Dimension(_))));
    }

    #[test]
    fn model_validation() {
        let mf = MembershipFamily::new(2, 1, |x| DVector::from_vec(vec![x[0] * x[0], 1.0 - x[0] * x[0]]))
            .unwrap();
        let region = StateBox::symmetric(&[1.0]).unwrap();
        let one = DMatrix::from_element(1, 1, -1.0);
        assert!(FuzzyModel::new(vec![one.clone()], mf.clone(), region.clone()).is_err());
        assert!(FuzzyModel::new(vec![one.clone(), DMatrix::zeros(2, 2)], mf.clone(), region.clone()).is_err());
        assert!(FuzzyModel::new(vec![one.clone(), one], mf, region).is_ok());
        assert!(StateBox::new(vec![0.5], vec![1.0]).is_err());
        assert!(StateBox::new(vec![1.0], vec![-1.0]).is_err());
        assert!(MembershipFamily::new(2, 1, |_| DVector::from_vec(vec![0.7, 0.7])).is_err());
    }

    #[test]
    fn document_round_trip() {
        let m = fixture("example2", &params(&[("a", -3.0), ("b", 40.0)])).unwrap();
        let doc = m.to_document();
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains("\"A\""));
        let back: ModelDocument = serde_json::from_str(&json).unwrap();
        let rebuilt = FuzzyModel::from_document(&back).unwrap();
        assert_eq!(rebuilt.to_document(), doc);

        let mut tampered = doc.clone();
        tampered.a[0][0][0] += 1.0;
        assert!(FuzzyModel::from_document(&tampered).is_err());
    }

    #[test]
    fn vdp_nominal_is_hurwitz_for_negative_mu() {
        for mu in [-0.1, -0.5, -1.0, -2.0, -5.0] {
            let m = fixture("vdp", &params(&[("mu", mu)])).unwrap();
            assert!(spectral_abscissa(m.nominal_matrix()) < 0.0, "mu = {mu}");
        }
        let m = fixture("vdp", &params(&[("mu", 1.0)])).unwrap();
        assert!(!is_hurwitz(m.nominal_matrix()));
    }

    #[test]
    fn finite_difference_gradient_matches_analytic() {
        let m = fixture("example2", &params(&[("a", -8.0), ("b", 100.0)])).unwrap();
        let x = [0.3, -0.7];
        let (g, src) = m.memberships().gradient(&x).unwrap();
        assert_eq!(src, GradientSource::Analytic);
        let fd = MembershipFamily::new(4, 2, {
            let mf = m.memberships().clone();
            move |x| mf.eval(x)
        })
        .unwrap();
        let (g_fd, src_fd) = fd.gradient(&x).unwrap();
        assert_eq!(src_fd, GradientSource::FiniteDifference);
        assert_abs_diff_eq!(g, g_fd, epsilon = 1e-8);
    }

    #[test]
    fn non_differentiable_gradient_is_unsupported() {
        let m = fixture("discontinuous", &params(&[])).unwrap();
        assert!(matches!(m.memberships().gradient(&[0.2]), Err(Error::Unsupported(_))));
    }
}
