//! Feasibility of [`LmiProblem`]s by a dense primal-dual interior-point method.
//!
//! Each problem is posed as
//!
//! ```text
//! min t  s.t.  F_j(y) <= t I   (negative-definite constraints)
//!              F_j(y) >= -t I  (positive-definite constraints)
//!              F_j(y) >= 0     (semidefinite constraints)
//!              -I <= V <= I or ||V||_2 <= 1 for every variable V
//!              t >= -T
//! ```
//!
//! in the dual standard form `max b'y  s.t.  C - sum y_k A_k = Z >= 0` and
//! solved with the HKM search direction and Mehrotra's predictor-corrector.
//! The conditions built by this crate are homogeneous in their variables, so
//! the variable bounds only fix the scale of the certificate.
//!
//! A verdict of [`VerdictStatus::Feasible`] always carries an assignment that
//! passed [`validate_certificate`] at half the margin. [`VerdictStatus::Infeasible`]
//! is only reported when the dual iterate proves `t* > -margin/2`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lmi::{Assignment, LmiProblem, Sense, Symmetry};

/// Relative slack allowed on `>= 0` constraints.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-8,
            restarts: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Feasible,
    Infeasible,
    Inconclusive,
}

impl VerdictStatus {
    /// One-letter code used in sweep tables.
    pub fn code(self) -> char {
        match self {
            VerdictStatus::Feasible => 'F',
            VerdictStatus::Infeasible => 'I',
            VerdictStatus::Inconclusive => 'U',
        }
    }

    pub fn is_feasible(self) -> bool {
        self == VerdictStatus::Feasible
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintMargin {
    pub label: String,
    pub sense: Sense,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Eigenvalue bound the constraint has to meet.
    pub required: f64,
    pub passed: bool,
}

impl ConstraintMargin {
    /// Distance to the required bound; negative when violated.
    pub fn slack(&self) -> f64 {
        match self.sense {
            Sense::NegativeDefinite => self.required - self.max_eig,
            Sense::PositiveDefinite | Sense::PositiveSemidefinite => self.min_eig - self.required,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarginReport {
    pub margin: f64,
    pub constraints: Vec<ConstraintMargin>,
    pub passed: bool,
}

impl MarginReport {
    pub fn worst_slack(&self) -> f64 {
        self.constraints
            .iter()
            .map(ConstraintMargin::slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintMargin> {
        self.constraints.iter().filter(|c| !c.passed)
    }
}

/// Checks every constraint of `problem` at `assignment` by dense eigenvalues:
/// `<= -eps I` needs `max eig <= -eps/2`, `>= eps I` needs `min eig >= eps/2`,
/// `>= 0` needs `min eig >= -1e-9 (1 + |F|)`.
pub fn validate_certificate(problem: &LmiProblem, assignment: &Assignment) -> MarginReport {
    let half = problem.margin() / 2.0;
    let constraints: Vec<ConstraintMargin> = problem
        .constraints()
        .iter()
        .map(|c| {
            let (min_eig, max_eig, norm) = match c.expr.evaluate(assignment) {
                Ok(f) => {
                    let norm = f.norm();
                    let eig = SymmetricEigen::new(f).eigenvalues;
                    (eig.min(), eig.max(), norm)
                }
                Err(_) => (f64::NAN, f64::NAN, 0.0),
            };
            let required = match c.sense {
                Sense::NegativeDefinite => -half,
                Sense::PositiveDefinite => half,
                Sense::PositiveSemidefinite => -PSD_TOL * (1.0 + norm),
            };
            let passed = match c.sense {
                Sense::NegativeDefinite => max_eig <= required,
                Sense::PositiveDefinite | Sense::PositiveSemidefinite => min_eig >= required,
            };
            ConstraintMargin {
                label: c.label.clone(),
                sense: c.sense,
                min_eig,
                max_eig,
                required,
                passed,
            }
        })
        .collect();
    let passed = constraints.iter().all(|c| c.passed);
    MarginReport {
        margin: problem.margin(),
        constraints,
        passed,
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverStats {
    /// Interior-point iterations summed over all attempts.
    pub iterations: usize,
    pub attempts: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// Best `t` attained by an iterate, original units.
    pub t_upper: Option<f64>,
    /// Certified lower bound on `t*`, original units.
    pub t_lower: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct FeasibilityVerdict {
    pub status: VerdictStatus,
    pub certificate: Option<Assignment>,
    pub margins: Option<MarginReport>,
    pub stats: SolverStats,
    pub diagnostic: Option<String>,
}

/// Something that decides LMI feasibility.
pub trait SdpBackend: Sync {
    fn solve(&self, problem: &LmiProblem, options: &SolverOptions) -> FeasibilityVerdict;
}

/// The built-in dense interior-point backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn solve(&self, problem: &LmiProblem, options: &SolverOptions) -> FeasibilityVerdict {
        solve(problem, options)
    }
}

/// Decides feasibility of `problem`; see the module docs for the contract.
pub fn solve(problem: &LmiProblem, options: &SolverOptions) -> FeasibilityVerdict {
    let start = Instant::now();
    let mut stats = SolverStats::default();
    let sdp = match Sdp::build(problem) {
        Ok(s) => s,
        Err(msg) => {
            stats.seconds = start.elapsed().as_secs_f64();
            return inconclusive(stats, msg);
        }
    };
    let mut last_diag = String::new();
    for attempt in 0..=options.restarts {
        stats.attempts = attempt + 1;
        let outcome = sdp.run(problem, options, attempt);
        stats.iterations += outcome.iterations;
        stats.primal_residual = outcome.primal_residual;
        stats.dual_residual = outcome.dual_residual;
        stats.gap = outcome.gap;
        stats.t_upper = outcome.t_upper.map(|t| t * sdp.scale);
        stats.t_lower = outcome.t_lower.map(|t| t * sdp.scale);
        match outcome.end {
            RunEnd::Certificate(asg, report) => {
                stats.seconds = start.elapsed().as_secs_f64();
                return FeasibilityVerdict {
                    status: VerdictStatus::Feasible,
                    certificate: Some(asg),
                    margins: Some(report),
                    stats,
                    diagnostic: None,
                };
            }
            RunEnd::Infeasible => {
                stats.seconds = start.elapsed().as_secs_f64();
                return FeasibilityVerdict {
                    status: VerdictStatus::Infeasible,
                    certificate: None,
                    margins: None,
                    stats,
                    diagnostic: None,
                };
            }
            RunEnd::Unresolved(msg) => last_diag = format!("attempt {attempt}: {msg}"),
        }
    }
    stats.seconds = start.elapsed().as_secs_f64();
    inconclusive(stats, last_diag)
}

fn inconclusive(stats: SolverStats, msg: String) -> FeasibilityVerdict {
    FeasibilityVerdict {
        status: VerdictStatus::Inconclusive,
        certificate: None,
        margins: None,
        stats,
        diagnostic: Some(msg),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BlockRole {
    Strict,
    Semidefinite,
    Auxiliary,
}

/// One diagonal block of `Z = C - sum_k y_k A_k`.
#[derive(Clone, Debug)]
struct Block {
    dim: usize,
    c: DMatrix<f64>,
    a: Vec<(usize, DMatrix<f64>)>,
    role: BlockRole,
}

impl Block {
    fn slack(&self, y: &DVector<f64>, skip: Option<usize>) -> DMatrix<f64> {
        let mut z = self.c.clone();
        for (k, a) in &self.a {
            if Some(*k) != skip {
                z -= a * y[*k];
            }
        }
        z
    }
}

struct Sdp {
    m: usize,
    t: usize,
    b: DVector<f64>,
    blocks: Vec<Block>,
    /// Original constraints are divided by this factor.
    scale: f64,
    /// `-T`, the lower bound on `t`.
    t_floor: f64,
    /// Half margin in scaled units.
    half_margin: f64,
    total_dim: usize,
}

enum RunEnd {
    Certificate(Assignment, MarginReport),
    Infeasible,
    Unresolved(String),
}

struct RunOutcome {
    end: RunEnd,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    gap: f64,
    t_upper: Option<f64>,
    t_lower: Option<f64>,
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `alpha` with `x + alpha dx >= 0`, given the Cholesky factor of `x`.
fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let linv = l.clone().solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))?;
    let w = sym(&(&linv * dx * linv.transpose()));
    let lam = SymmetricEigen::new(w).eigenvalues.min();
    Some(if lam >= 0.0 { f64::INFINITY } else { -1.0 / lam })
}

impl Sdp {
    fn build(problem: &LmiProblem) -> std::result::Result<Self, String> {
        let layout = problem.layout();
        let nv = layout.total();
        let m = nv + 1;
        let t = nv;

        let mut raw = Vec::with_capacity(problem.constraints().len());
        let mut scale: f64 = 0.0;
        for c in problem.constraints() {
            let (c0, coeffs) = c.expr.coefficients(&layout).map_err(|e| e.to_string())?;
            scale = scale.max(c0.norm());
            for (_, f) in &coeffs {
                scale = scale.max(f.norm());
            }
            raw.push((c.sense, c0, coeffs));
        }
        if !(scale.is_finite()) {
            return Err("non-finite constraint data".into());
        }
        if scale == 0.0 {
            scale = 1.0;
        }

        let mut blocks = Vec::new();
        let mut t_floor: f64 = 1.0;
        for (sense, c0, coeffs) in raw {
            let dim = c0.nrows();
            let c0 = c0 / scale;
            let coeffs: Vec<(usize, DMatrix<f64>)> =
                coeffs.into_iter().map(|(k, f)| (k, f / scale)).collect();
            let bound = c0.norm() + coeffs.iter().map(|(_, f)| f.norm()).sum::<f64>();
            let block = match sense {
                Sense::NegativeDefinite => {
                    t_floor = t_floor.max(bound);
                    let mut a = coeffs;
                    a.push((t, -DMatrix::identity(dim, dim)));
                    Block {
                        dim,
                        c: -c0,
                        a,
                        role: BlockRole::Strict,
                    }
                }
                Sense::PositiveDefinite => {
                    t_floor = t_floor.max(bound);
                    let mut a: Vec<_> = coeffs.into_iter().map(|(k, f)| (k, -f)).collect();
                    a.push((t, -DMatrix::identity(dim, dim)));
                    Block {
                        dim,
                        c: c0,
                        a,
                        role: BlockRole::Strict,
                    }
                }
                Sense::PositiveSemidefinite => Block {
                    dim,
                    c: c0,
                    a: coeffs.into_iter().map(|(k, f)| (k, -f)).collect(),
                    role: BlockRole::Semidefinite,
                },
            };
            blocks.push(block);
        }

        let mut offset = 0;
        for v in problem.variables() {
            let n = v.n;
            match v.symmetry {
                Symmetry::Symmetric => {
                    let basis: Vec<(usize, DMatrix<f64>)> =
                        (0..v.scalar_count()).map(|k| (offset + k, v.basis(k))).collect();
                    blocks.push(Block {
                        dim: n,
                        c: DMatrix::identity(n, n),
                        a: basis.clone(),
                        role: BlockRole::Auxiliary,
                    });
                    blocks.push(Block {
                        dim: n,
                        c: DMatrix::identity(n, n),
                        a: basis.into_iter().map(|(k, b)| (k, -b)).collect(),
                        role: BlockRole::Auxiliary,
                    });
                }
                Symmetry::General => {
                    let a = (0..v.scalar_count())
                        .map(|k| {
                            let mut e = DMatrix::zeros(2 * n, 2 * n);
                            let b = v.basis(k);
                            e.view_mut((0, n), (n, n)).copy_from(&(-&b));
                            e.view_mut((n, 0), (n, n)).copy_from(&(-b.transpose()));
                            (offset + k, e)
                        })
                        .collect();
                    blocks.push(Block {
                        dim: 2 * n,
                        c: DMatrix::identity(2 * n, 2 * n),
                        a,
                        role: BlockRole::Auxiliary,
                    });
                }
            }
            offset += v.scalar_count();
        }
        blocks.push(Block {
            dim: 1,
            c: DMatrix::from_element(1, 1, t_floor),
            a: vec![(t, DMatrix::from_element(1, 1, -1.0))],
            role: BlockRole::Auxiliary,
        });

        let mut b = DVector::zeros(m);
        b[t] = -1.0;
        let total_dim = blocks.iter().map(|b| b.dim).sum();
        Ok(Self {
            m,
            t,
            b,
            blocks,
            scale,
            t_floor,
            half_margin: problem.margin() / scale / 2.0,
            total_dim,
        })
    }

    fn a_op(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, xb) in self.blocks.iter().zip(x) {
            for (k, a) in &blk.a {
                out[*k] += inner(a, xb);
            }
        }
        out
    }

    fn at_op(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut s = DMatrix::zeros(blk.dim, blk.dim);
                for (k, a) in &blk.a {
                    s += a * y[*k];
                }
                s
            })
            .collect()
    }

    /// Worst slack of the original constraints at `y` (scaled units; `>= 0`
    /// means every strict constraint holds with half margin).
    fn scaled_slack(&self, y: &DVector<f64>) -> f64 {
        let mut worst = f64::INFINITY;
        for blk in &self.blocks {
            let lam = match blk.role {
                BlockRole::Auxiliary => continue,
                BlockRole::Strict => {
                    SymmetricEigen::new(blk.slack(y, Some(self.t))).eigenvalues.min() - self.half_margin
                }
                BlockRole::Semidefinite => {
                    let z = blk.slack(y, None);
                    let tol = PSD_TOL * (1.0 + z.norm());
                    SymmetricEigen::new(z).eigenvalues.min() + tol
                }
            };
            worst = worst.min(lam);
        }
        worst
    }

    fn initial_point(&self, attempt: usize, seed: u64) -> (Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>) {
        let ident = |d: usize| DMatrix::<f64>::identity(d, d);
        if attempt == 0 {
            let x = self.blocks.iter().map(|b| ident(b.dim)).collect();
            let z = self.blocks.iter().map(|b| ident(b.dim)).collect();
            return (x, DVector::zeros(self.m), z);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let xi: f64 = 10f64.powf(rng.gen_range(-1.0..1.0));
        let zeta: f64 = 10f64.powf(rng.gen_range(-1.0..1.0));
        let diag = |d: usize, s: f64, rng: &mut ChaCha8Rng| {
            DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| s * rng.gen_range(0.5..2.0)))
        };
        let x = self.blocks.iter().map(|b| diag(b.dim, xi, &mut rng)).collect();
        let z = self.blocks.iter().map(|b| diag(b.dim, zeta, &mut rng)).collect();
        let y = DVector::from_fn(self.m, |_, _| rng.gen_range(-0.1..0.1));
        (x, y, z)
    }

    fn certificate(&self, problem: &LmiProblem, y: &DVector<f64>) -> Option<(Assignment, MarginReport)> {
        let asg = problem.layout().unpack(&y.as_slice()[..self.t]);
        let report = validate_certificate(problem, &asg);
        report.passed.then_some((asg, report))
    }

    fn run(&self, problem: &LmiProblem, opts: &SolverOptions, attempt: usize) -> RunOutcome {
        let (mut x, mut y, mut z) = self.initial_point(attempt, opts.seed);
        let n_tot = self.total_dim as f64;
        let b_norm = self.b.norm();
        let c_norm = self.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>().sqrt();
        let mut out = RunOutcome {
            end: RunEnd::Unresolved(String::new()),
            iterations: 0,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            t_upper: None,
            t_lower: None,
        };
        let mut best_lb = f64::NEG_INFINITY;

        for iter in 0..=opts.max_iters {
            out.iterations = iter;
            let ax = self.a_op(&x);
            let rp = &self.b - &ax;
            let aty = self.at_op(&y);
            let rd: Vec<DMatrix<f64>> = self
                .blocks
                .iter()
                .zip(&z)
                .zip(&aty)
                .map(|((blk, zb), ab)| &blk.c - zb - ab)
                .collect();
            let gap: f64 = x.iter().zip(&z).map(|(a, b)| inner(a, b)).sum();
            let pobj: f64 = self.blocks.iter().zip(&x).map(|(b, xb)| inner(&b.c, xb)).sum();
            let dobj = self.b.dot(&y);
            let mu = gap / n_tot;
            let pinf = rp.norm() / (1.0 + b_norm);
            let rd_norm = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt();
            let dinf = rd_norm / (1.0 + c_norm);
            let rel_gap = gap.abs() / (1.0 + pobj.abs() + dobj.abs());
            out.primal_residual = pinf;
            out.dual_residual = dinf;
            out.gap = rel_gap;

            if !(gap.is_finite() && pobj.is_finite() && dobj.is_finite()) {
                out.end = RunEnd::Unresolved("non-finite iterate".into());
                return out;
            }

            // lower bound on t* from the (approximately feasible) X
            let slack: f64 = (0..self.t).map(|k| rp[k].abs()).sum::<f64>() + self.t_floor * rp[self.t].abs();
            let lb = -pobj - slack;
            if lb > best_lb {
                best_lb = lb;
                out.t_lower = Some(lb);
            }
            if lb > -self.half_margin {
                out.end = RunEnd::Infeasible;
                return out;
            }

            let t_now = y[self.t];
            out.t_upper = Some(out.t_upper.map_or(t_now, |u: f64| u.min(t_now)));
            if t_now < -self.half_margin && self.scaled_slack(&y) >= 0.0 {
                if let Some((asg, rep)) = self.certificate(problem, &y) {
                    out.end = RunEnd::Certificate(asg, rep);
                    return out;
                }
            }

            if rel_gap < opts.tol && pinf < opts.tol && dinf < opts.tol {
                out.end = RunEnd::Unresolved(format!(
                    "converged with t* in [{:.3e}, {:.3e}] against threshold {:.3e}",
                    lb * self.scale,
                    t_now * self.scale,
                    -self.half_margin * self.scale
                ));
                return out;
            }
            if iter == opts.max_iters {
                break;
            }

            // Cholesky factors and inverse of Z
            let mut zinv = Vec::with_capacity(z.len());
            let mut lx = Vec::with_capacity(x.len());
            let mut lz = Vec::with_capacity(z.len());
            for (xb, zb) in x.iter().zip(&z) {
                let (Some(cx), Some(cz)) = (xb.clone().cholesky(), zb.clone().cholesky()) else {
                    out.end = RunEnd::Unresolved("lost positive definiteness".into());
                    return out;
                };
                zinv.push(sym(&cz.inverse()));
                lx.push(cx.l());
                lz.push(cz.l());
            }

            // Schur complement M_ij = tr(A_i X A_j Z^-1)
            let mut schur = DMatrix::<f64>::zeros(self.m, self.m);
            for ((blk, xb), zi) in self.blocks.iter().zip(&x).zip(&zinv) {
                let g: Vec<DMatrix<f64>> = blk.a.iter().map(|(_, a)| xb * a * zi).collect();
                for (p, (i, _)) in blk.a.iter().enumerate() {
                    for (q, (j, aj)) in blk.a.iter().enumerate().skip(p) {
                        let v = inner(aj, &g[p]);
                        schur[(*i, *j)] += v;
                        if q != p {
                            schur[(*j, *i)] += v;
                        }
                    }
                }
            }
            let schur = sym(&schur);
            let solver = SchurSolver::new(schur);
            let Some(solver) = solver else {
                out.end = RunEnd::Unresolved("singular Schur complement".into());
                return out;
            };

            let xrdz: Vec<DMatrix<f64>> = x
                .iter()
                .zip(&rd)
                .zip(&zinv)
                .map(|((xb, r), zi)| xb * r * zi)
                .collect();
            let a_xrdz = self.a_op(&xrdz);

            let direction = |rc: &[DMatrix<f64>]| -> Option<(Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>)> {
                let h = &rp - self.a_op(rc) + &a_xrdz;
                let dy = solver.solve(&h)?;
                let atdy = self.at_op(&dy);
                let dz: Vec<DMatrix<f64>> = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
                let dx: Vec<DMatrix<f64>> = rc
                    .iter()
                    .zip(&x)
                    .zip(&dz)
                    .zip(&zinv)
                    .map(|(((r, xb), dzb), zi)| r - sym(&(xb * dzb * zi)))
                    .collect();
                Some((dx, dy, dz))
            };
            let step = |dx: &[DMatrix<f64>], dz: &[DMatrix<f64>]| -> Option<(f64, f64)> {
                let mut ap = f64::INFINITY;
                let mut ad = f64::INFINITY;
                for i in 0..dx.len() {
                    ap = ap.min(max_step(&lx[i], &dx[i])?);
                    ad = ad.min(max_step(&lz[i], &dz[i])?);
                }
                Some((ap, ad))
            };

            // predictor
            let rc_aff: Vec<DMatrix<f64>> = x.iter().map(|xb| -xb).collect();
            let Some((dxa, _dya, dza)) = direction(&rc_aff) else {
                out.end = RunEnd::Unresolved("predictor solve failed".into());
                return out;
            };
            let Some((apa, ada)) = step(&dxa, &dza) else {
                out.end = RunEnd::Unresolved("predictor step failed".into());
                return out;
            };
            let (apa, ada) = (apa.min(1.0), ada.min(1.0));
            let gap_aff: f64 = x
                .iter()
                .zip(&dxa)
                .zip(z.iter().zip(&dza))
                .map(|((xb, dxb), (zb, dzb))| inner(&(xb + dxb * apa), &(zb + dzb * ada)))
                .sum();
            let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

            // corrector
            let rc: Vec<DMatrix<f64>> = x
                .iter()
                .zip(&zinv)
                .zip(dxa.iter().zip(&dza))
                .map(|((xb, zi), (dxb, dzb))| zi * (sigma * mu) - xb - sym(&(dxb * dzb * zi)))
                .collect();
            let Some((dx, dy, dz)) = direction(&rc) else {
                out.end = RunEnd::Unresolved("corrector solve failed".into());
                return out;
            };
            let Some((ap, ad)) = step(&dx, &dz) else {
                out.end = RunEnd::Unresolved("corrector step failed".into());
                return out;
            };
            let gamma = 0.9 + 0.09 * apa.min(ada);
            let ap = (gamma * ap).min(1.0);
            let ad = (gamma * ad).min(1.0);
            for i in 0..x.len() {
                x[i] = sym(&(&x[i] + &dx[i] * ap));
                z[i] = sym(&(&z[i] + &dz[i] * ad));
            }
            y += dy * ad;
        }
        out.end = RunEnd::Unresolved(format!("iteration limit {} reached", opts.max_iters));
        out
    }
}

/// Cholesky with an LU fallback for the Schur system.
enum SchurSolver {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurSolver {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        if let Some(c) = m.clone().cholesky() {
            return Some(SchurSolver::Chol(c));
        }
        let lu = m.lu();
        lu.is_invertible().then_some(SchurSolver::Lu(lu))
    }

    fn solve(&self, h: &DVector<f64>) -> Option<DVector<f64>> {
        let s = match self {
            SchurSolver::Chol(c) => c.solve(h),
            SchurSolver::Lu(l) => l.solve(h)?,
        };
        s.iter().all(|v| v.is_finite()).then_some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{lyap_expr, AffineSymExpr};

    fn lemma1(vertices: &[DMatrix<f64>], margin: f64) -> LmiProblem {
        let n = vertices[0].nrows();
        let mut p = LmiProblem::new(margin).unwrap();
        let pv = p.add_var("P", n, Symmetry::Symmetric);
        p.add_constraint("P", AffineSymExpr::var(&pv), Sense::PositiveDefinite)
            .unwrap();
        for (i, a) in vertices.iter().enumerate() {
            p.add_constraint(format!("A{i}"), lyap_expr(a, &pv).unwrap(), Sense::NegativeDefinite)
                .unwrap();
        }
        p
    }

    #[test]
    fn hurwitz_single_rule_is_feasible() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let v = solve(&lemma1(&[a], 1e-6), &SolverOptions::default());
        assert_eq!(v.status, VerdictStatus::Feasible, "{:?}", v.diagnostic);
        assert!(v.margins.unwrap().passed);
    }

    #[test]
    fn zero_vertex_is_infeasible() {
        let v = solve(
            &lemma1(&[DMatrix::from_element(1, 1, -1.0), DMatrix::zeros(1, 1)], 1e-6),
            &SolverOptions::default(),
        );
        assert_eq!(v.status, VerdictStatus::Infeasible, "{:?}", v.diagnostic);
        assert!(v.certificate.is_none());
    }

    #[test]
    fn unstable_is_not_feasible() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, -1.0]);
        let v = solve(&lemma1(&[a], 1e-6), &SolverOptions::default());
        assert_eq!(v.status, VerdictStatus::Infeasible);
    }

    #[test]
    fn validation_examples() {
        let mut p = LmiProblem::new(1e-3).unwrap();
        let pv = p.add_var("P", 2, Symmetry::Symmetric);
        p.add_constraint("P", AffineSymExpr::var(&pv), Sense::PositiveDefinite)
            .unwrap();
        let mut asg = Assignment::new();
        asg.insert(pv.id, DMatrix::identity(2, 2));
        let r = validate_certificate(&p, &asg);
        assert!(r.passed);
        assert!((r.constraints[0].min_eig - 1.0).abs() < 1e-15);
        assert!((r.worst_slack() - (1.0 - 5e-4)).abs() < 1e-12);
        asg.insert(pv.id, -DMatrix::identity(2, 2));
        assert!(!validate_certificate(&p, &asg).passed);
        assert!(!validate_certificate(&p, &Assignment::new()).passed);
    }

    #[test]
    fn general_variable_and_semidefinite_constraints() {
        // find general M with M + M^T >= 0 and -(M + M^T) + I <= -eps: infeasible;
        // with sign flipped it is feasible
        let mut p = LmiProblem::new(1e-6).unwrap();
        let m = p.add_var("M", 2, Symmetry::General);
        let mut e = AffineSymExpr::zero(2);
        e.push_term(2.0, &m, DMatrix::identity(2, 2), DMatrix::identity(2, 2))
            .unwrap();
        p.add_constraint("psd", e.clone(), Sense::PositiveSemidefinite)
            .unwrap();
        let mut q = p.clone();
        p.add_constraint("nd", e.clone(), Sense::NegativeDefinite).unwrap();
        let v = solve(&p, &SolverOptions::default());
        assert_ne!(v.status, VerdictStatus::Feasible);
        q.add_constraint("pd", e, Sense::PositiveDefinite).unwrap();
        let v = solve(&q, &SolverOptions::default());
        assert_eq!(v.status, VerdictStatus::Feasible, "{:?}", v.diagnostic);
    }

    #[test]
    fn deterministic_status() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 4.0, -1.0]);
        let p = lemma1(&[a, b], 1e-6);
        let v1 = solve(&p, &SolverOptions::default());
        let v2 = solve(&p, &SolverOptions::default());
        assert_eq!(v1.status, v2.status);
        assert_eq!(v1.stats.iterations, v2.stats.iterations);
    }
}
