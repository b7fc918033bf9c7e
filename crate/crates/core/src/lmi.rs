//! Affine LMI assembly.
//!
//! Matrix decision variables enter symmetric expressions through terms
//! `c * sym(L V R)` with `sym(X) = (X + X^T) / 2`, so every expression is
//! symmetric by construction whatever the caller passes in.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::matrix_rows;

/// Largest rule count accepted by [`vertex_enumerate`].
pub const MAX_VERTEX_RULES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric,
    General,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixVar {
    pub id: VarId,
    pub name: String,
    pub n: usize,
    pub symmetry: Symmetry,
}

impl MatrixVar {
    /// Number of scalar unknowns: `n(n+1)/2` or `n^2`.
    pub fn scalar_count(&self) -> usize {
        match self.symmetry {
            Symmetry::Symmetric => self.n * (self.n + 1) / 2,
            Symmetry::General => self.n * self.n,
        }
    }

    /// Basis matrix for scalar `k` of this variable.
    pub(crate) fn basis(&self, k: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut b = DMatrix::zeros(n, n);
        match self.symmetry {
            Symmetry::General => b[(k / n, k % n)] = 1.0,
            Symmetry::Symmetric => {
                let (i, j) = sym_index(n, k);
                b[(i, j)] = 1.0;
                b[(j, i)] = 1.0;
            }
        }
        b
    }
}

/// Maps the `k`-th upper-triangular scalar (row-major) to `(i, j)`, `i <= j`.
fn sym_index(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i;
        if k < row {
            return (i, i + k);
        }
        k -= row;
    }
    unreachable!("symmetric scalar index out of range")
}

/// Values for matrix variables.
pub type Assignment = BTreeMap<VarId, DMatrix<f64>>;

#[derive(Clone, Debug)]
struct Term {
    coef: f64,
    var: VarId,
    var_name: String,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl Term {
    fn value(&self, assignment: &Assignment) -> Result<DMatrix<f64>> {
        let v = assignment
            .get(&self.var)
            .ok_or_else(|| Error::MissingAssignment(self.var_name.clone()))?;
        if v.nrows() != self.left.ncols() || v.ncols() != self.right.nrows() {
            return Err(Error::Dimension(format!(
                "value of `{}` is {}x{}",
                self.var_name,
                v.nrows(),
                v.ncols()
            )));
        }
        Ok(&self.left * v * &self.right * self.coef)
    }
}

/// Symmetric affine matrix expression `C + sum_k c_k sym(L_k V_k R_k)`.
#[derive(Clone, Debug)]
pub struct AffineSymExpr {
    dim: usize,
    constant: DMatrix<f64>,
    terms: Vec<Term>,
}

impl AffineSymExpr {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            constant: DMatrix::zeros(dim, dim),
            terms: Vec::new(),
        }
    }

    /// Constant block; the symmetric part of `c` is kept.
    pub fn constant(c: DMatrix<f64>) -> Result<Self> {
        if c.nrows() != c.ncols() {
            return Err(Error::Dimension("constant block must be square".into()));
        }
        let dim = c.nrows();
        Ok(Self {
            dim,
            constant: symmetrize(&c),
            terms: Vec::new(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            constant: DMatrix::identity(dim, dim),
            terms: Vec::new(),
        }
    }

    /// The variable itself (`sym(V)`).
    pub fn var(v: &MatrixVar) -> Self {
        let i = DMatrix::identity(v.n, v.n);
        let mut e = Self::zero(v.n);
        e.push_term(1.0, v, i.clone(), i)
            .expect("identity term is dimensionally consistent");
        e
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn constant_part(&self) -> &DMatrix<f64> {
        &self.constant
    }

    /// Adds `coef * sym(left * V * right)`; `left` is `dim x n`, `right` is `n x dim`.
    pub fn push_term(
        &mut self,
        coef: f64,
        v: &MatrixVar,
        left: DMatrix<f64>,
        right: DMatrix<f64>,
    ) -> Result<&mut Self> {
        if left.nrows() != self.dim
            || left.ncols() != v.n
            || right.nrows() != v.n
            || right.ncols() != self.dim
        {
            return Err(Error::Dimension(format!(
                "term on `{}` ({}x{}) does not fit a {}x{} expression",
                v.name, v.n, v.n, self.dim, self.dim
            )));
        }
        if coef != 0.0 {
            self.terms.push(Term {
                coef,
                var: v.id,
                var_name: v.name.clone(),
                left,
                right,
            });
        }
        Ok(self)
    }

    pub fn plus(mut self, other: &AffineSymExpr) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::Dimension(format!(
                "adding {}x{} to {}x{}",
                other.dim, other.dim, self.dim, self.dim
            )));
        }
        self.constant += &other.constant;
        self.terms.extend(other.terms.iter().cloned());
        Ok(self)
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.constant *= c;
        for t in &mut self.terms {
            t.coef *= c;
        }
        self.terms.retain(|t| t.coef != 0.0);
        self
    }

    /// Places this expression as the diagonal block starting at `offset` of a
    /// `total x total` expression.
    pub fn embedded(&self, offset: usize, total: usize) -> Result<Self> {
        if offset + self.dim > total {
            return Err(Error::Dimension(format!(
                "block of size {} at offset {offset} exceeds {total}",
                self.dim
            )));
        }
        let e = selector(total, offset, self.dim);
        Ok(Self {
            dim: total,
            constant: &e * &self.constant * e.transpose(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    left: &e * &t.left,
                    right: &t.right * e.transpose(),
                    ..t.clone()
                })
                .collect(),
        })
    }

    /// Variables referenced by the expression.
    pub fn variables(&self) -> Vec<VarId> {
        let mut ids: Vec<VarId> = self.terms.iter().map(|t| t.var).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Dense value at an assignment; exactly symmetric.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<DMatrix<f64>> {
        let mut acc = self.constant.clone();
        for t in &self.terms {
            acc += t.value(assignment)?;
        }
        Ok(symmetrize(&acc))
    }

    /// Coefficients of the expression in the scalar unknowns of `layout`:
    /// `F(y) = F_0 + sum_k y_k F_k`. Zero coefficient blocks are omitted.
    pub fn coefficients(&self, layout: &VarLayout) -> Result<(DMatrix<f64>, Vec<(usize, DMatrix<f64>)>)> {
        let mut by_scalar: BTreeMap<usize, DMatrix<f64>> = BTreeMap::new();
        for t in &self.terms {
            let (var, offset) = layout
                .lookup(t.var)
                .ok_or_else(|| Error::UndeclaredVariable(t.var_name.clone()))?;
            for k in 0..var.scalar_count() {
                let b = var.basis(k);
                let f = symmetrize(&(&t.left * b * &t.right * t.coef));
                by_scalar
                    .entry(offset + k)
                    .and_modify(|acc| *acc += &f)
                    .or_insert(f);
            }
        }
        let coeffs = by_scalar
            .into_iter()
            .filter(|(_, m)| m.iter().any(|v| *v != 0.0))
            .collect();
        Ok((self.constant.clone(), coeffs))
    }
}

/// General (not necessarily symmetric) affine expression `C + sum_k c_k L_k V_k R_k`,
/// used for off-diagonal blocks.
#[derive(Clone, Debug)]
pub struct AffineExpr {
    rows: usize,
    cols: usize,
    constant: DMatrix<f64>,
    terms: Vec<Term>,
}

impl AffineExpr {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            constant: DMatrix::zeros(rows, cols),
            terms: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn push_term(
        &mut self,
        coef: f64,
        v: &MatrixVar,
        left: DMatrix<f64>,
        right: DMatrix<f64>,
    ) -> Result<&mut Self> {
        if left.nrows() != self.rows
            || left.ncols() != v.n
            || right.nrows() != v.n
            || right.ncols() != self.cols
        {
            return Err(Error::Dimension(format!(
                "term on `{}` does not fit a {}x{} block",
                v.name, self.rows, self.cols
            )));
        }
        if coef != 0.0 {
            self.terms.push(Term {
                coef,
                var: v.id,
                var_name: v.name.clone(),
                left,
                right,
            });
        }
        Ok(self)
    }

    pub fn evaluate(&self, assignment: &Assignment) -> Result<DMatrix<f64>> {
        let mut acc = self.constant.clone();
        for t in &self.terms {
            acc += t.value(assignment)?;
        }
        Ok(acc)
    }
}

/// `A^T P + P A`.
pub fn lyap_expr(a: &DMatrix<f64>, p: &MatrixVar) -> Result<AffineSymExpr> {
    if a.nrows() != a.ncols() || a.nrows() != p.n {
        return Err(Error::Dimension(format!(
            "A is {}x{} but `{}` is {}x{}",
            a.nrows(),
            a.ncols(),
            p.name,
            p.n,
            p.n
        )));
    }
    let mut e = AffineSymExpr::zero(p.n);
    if a.iter().any(|v| *v != 0.0) {
        e.push_term(2.0, p, DMatrix::identity(p.n, p.n), a.clone())?;
    }
    Ok(e)
}

/// Builds `[[B11, Gamma^T], [Gamma, -I_copies (x) G]]` with `Gamma` the
/// vertical stack of `block21`.
pub fn schur_embed(
    block11: &AffineSymExpr,
    block21: &[AffineExpr],
    block22_var: &MatrixVar,
    copies: usize,
) -> Result<AffineSymExpr> {
    let n = block11.dim();
    if block21.len() != copies {
        return Err(Error::Dimension(format!(
            "{} off-diagonal blocks for {copies} copies",
            block21.len()
        )));
    }
    if block22_var.n != n {
        return Err(Error::Dimension(format!(
            "`{}` is {}x{}, expected {n}x{n}",
            block22_var.name, block22_var.n, block22_var.n
        )));
    }
    if let Some(bad) = block21.iter().find(|b| b.shape() != (n, n)) {
        return Err(Error::Dimension(format!(
            "off-diagonal block is {:?}, expected ({n}, {n})",
            bad.shape()
        )));
    }
    let total = (copies + 1) * n;
    let mut out = block11.embedded(0, total)?;
    let top = selector(total, 0, n);
    for (i, gamma) in block21.iter().enumerate() {
        let row = selector(total, (i + 1) * n, n);
        // gamma sits at block (i+1, 0); sym() supplies its transpose at (0, i+1)
        let c = &row * &gamma.constant * top.transpose();
        out.constant += &c + c.transpose();
        for t in &gamma.terms {
            out.terms.push(Term {
                coef: 2.0 * t.coef,
                left: &row * &t.left,
                right: &t.right * top.transpose(),
                ..t.clone()
            });
        }
        out.push_term(-1.0, block22_var, row.clone(), row.transpose())?;
    }
    Ok(out)
}

/// `total x size` matrix selecting rows `offset..offset+size`.
fn selector(total: usize, offset: usize, size: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(total, size);
    for k in 0..size {
        e[(offset + k, k)] = 1.0;
    }
    e
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Sign vectors `delta` with `delta_i` in `{-b_i, +b_i}`, lexicographic with
/// `-` before `+` and the first rule most significant. Zero bounds collapse to
/// a single value, so duplicates never appear.
pub fn vertex_enumerate(bounds: &[f64]) -> Result<Vec<Vec<f64>>> {
    if bounds.is_empty() {
        return Err(Error::InvalidHyper("vertex enumeration needs r >= 1".into()));
    }
    if bounds.len() > MAX_VERTEX_RULES {
        return Err(Error::TooManyRules {
            what: "vertex enumeration",
            rules: bounds.len(),
            limit: MAX_VERTEX_RULES,
        });
    }
    if let Some(b) = bounds.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::InvalidHyper(format!("bound {b} must be finite and >= 0")));
    }
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(bounds.len())];
    for &b in bounds {
        let choices: &[f64] = if b == 0.0 { &[0.0] } else { &[-b, b] };
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut v = prefix.clone();
                    v.push(*c);
                    v
                })
            })
            .collect();
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `F <= -eps I`
    NegativeDefinite,
    /// `F >= eps I`
    PositiveDefinite,
    /// `F >= 0`
    PositiveSemidefinite,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub label: String,
    pub expr: AffineSymExpr,
    pub sense: Sense,
}

/// Offsets of each variable in the flat vector of scalar unknowns.
#[derive(Clone, Debug)]
pub struct VarLayout {
    vars: Vec<MatrixVar>,
    index: HashMap<VarId, (usize, usize)>,
    total: usize,
}

impl VarLayout {
    pub fn new(vars: &[MatrixVar]) -> Self {
        let mut index = HashMap::new();
        let mut total = 0;
        for (slot, v) in vars.iter().enumerate() {
            index.insert(v.id, (slot, total));
            total += v.scalar_count();
        }
        Self {
            vars: vars.to_vec(),
            index,
            total,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    fn lookup(&self, id: VarId) -> Option<(&MatrixVar, usize)> {
        self.index.get(&id).map(|(slot, off)| (&self.vars[*slot], *off))
    }

    /// Rebuilds matrix values from the flat vector.
    pub fn unpack(&self, y: &[f64]) -> Assignment {
        let mut out = Assignment::new();
        for v in &self.vars {
            let (_, off) = self.index[&v.id];
            let mut m = DMatrix::zeros(v.n, v.n);
            for k in 0..v.scalar_count() {
                m += v.basis(k) * y[off + k];
            }
            out.insert(v.id, m);
        }
        out
    }
}

/// A set of affine symmetric-matrix constraints with a strictness margin.
#[derive(Clone, Debug)]
pub struct LmiProblem {
    variables: Vec<MatrixVar>,
    constraints: Vec<Constraint>,
    margin: f64,
}

impl LmiProblem {
    pub fn new(margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::InvalidHyper(format!("margin must be positive, got {margin}")));
        }
        Ok(Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            margin,
        })
    }

    pub fn add_var(&mut self, name: &str, n: usize, symmetry: Symmetry) -> MatrixVar {
        let v = MatrixVar {
            id: VarId(self.variables.len()),
            name: name.to_string(),
            n,
            symmetry,
        };
        self.variables.push(v.clone());
        v
    }

    pub fn add_constraint(&mut self, label: impl Into<String>, expr: AffineSymExpr, sense: Sense) -> Result<()> {
        for id in expr.variables() {
            if !self.variables.iter().any(|v| v.id == id) {
                let name = expr
                    .terms
                    .iter()
                    .find(|t| t.var == id)
                    .map(|t| t.var_name.clone())
                    .unwrap_or_default();
                return Err(Error::UndeclaredVariable(name));
            }
        }
        self.constraints.push(Constraint {
            label: label.into(),
            expr,
            sense,
        });
        Ok(())
    }

    pub fn variables(&self) -> &[MatrixVar] {
        &self.variables
    }

    pub fn var_by_name(&self, name: &str) -> Option<&MatrixVar> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::InvalidHyper(format!("margin must be positive, got {margin}")));
        }
        self.margin = margin;
        Ok(self)
    }

    /// Same variables, constraints `self` followed by `extra`.
    pub fn extended(&self, extra: &[Constraint]) -> Result<Self> {
        let mut out = self.clone();
        for c in extra {
            out.add_constraint(c.label.clone(), c.expr.clone(), c.sense)?;
        }
        Ok(out)
    }

    pub fn layout(&self) -> VarLayout {
        VarLayout::new(&self.variables)
    }

    pub fn to_document(&self) -> Result<LmiProblemDocument> {
        let layout = self.layout();
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let (constant, coeffs) = c.expr.coefficients(&layout)?;
            constraints.push(ConstraintDocument {
                label: c.label.clone(),
                sense: c.sense,
                dim: c.expr.dim(),
                constant: matrix_rows(&constant),
                coefficients: coeffs
                    .into_iter()
                    .map(|(scalar, m)| CoefficientBlock {
                        scalar,
                        matrix: matrix_rows(&m),
                    })
                    .collect(),
            });
        }
        Ok(LmiProblemDocument {
            margin: self.margin,
            scalar_unknowns: layout.total(),
            variables: self.variables.clone(),
            constraints,
        })
    }
}

/// Debug dump of an [`LmiProblem`]: dense coefficient blocks per constraint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmiProblemDocument {
    pub margin: f64,
    pub scalar_unknowns: usize,
    pub variables: Vec<MatrixVar>,
    pub constraints: Vec<ConstraintDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintDocument {
    pub label: String,
    pub sense: Sense,
    pub dim: usize,
    pub constant: Vec<Vec<f64>>,
    pub coefficients: Vec<CoefficientBlock>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientBlock {
    pub scalar: usize,
    pub matrix: Vec<Vec<f64>>,
}
