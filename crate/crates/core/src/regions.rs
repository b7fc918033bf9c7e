//! Validity regions and Lyapunov sublevel sets.
//!
//! * `H(b)`: `|alpha_i(x) - alpha_i(0)| <= b_i`
//! * `Omega(phi)`: `|grad alpha_i(x)' A(alpha(x)) x| <= phi_i`
//! * `U(eta)`: `sum_i (alpha_i(x) - alpha_i(0))^2 <= eta`
//!
//! All regions are taken inside the modelling box. The level `c*` of a
//! [`DaEstimate`] is the smallest value of `V` found next to a grid point
//! outside the region (one cell of safety) or on the boundary of the box.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FuzzyModel, GradientSource};

/// Largest state dimension handled by the grid methods.
pub const MAX_GRID_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    /// The whole modelling box.
    Modeling,
    Hb(Vec<f64>),
    OmegaPhi(Vec<f64>),
    UEta(f64),
    Intersection(Vec<RegionSpec>),
}

impl RegionSpec {
    pub fn validate(&self, rules: usize) -> Result<()> {
        let check = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != rules {
                return Err(Error::InvalidHyper(format!("{what} has {} entries for {rules} rules", v.len())));
            }
            if let Some(x) = v.iter().find(|x| !(**x >= 0.0)) {
                return Err(Error::InvalidHyper(format!("{what} must be nonnegative, got {x}")));
            }
            Ok(())
        };
        match self {
            RegionSpec::Modeling => Ok(()),
            RegionSpec::Hb(b) => check(b, "b"),
            RegionSpec::OmegaPhi(phi) => check(phi, "phi"),
            RegionSpec::UEta(eta) => {
                if *eta >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidHyper(format!("eta must be nonnegative, got {eta}")))
                }
            }
            RegionSpec::Intersection(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidHyper("empty intersection".into()));
                }
                parts.iter().try_for_each(|p| p.validate(rules))
            }
        }
    }

    fn needs_gradient(&self) -> bool {
        match self {
            RegionSpec::OmegaPhi(_) => true,
            RegionSpec::Intersection(parts) => parts.iter().any(RegionSpec::needs_gradient),
            _ => false,
        }
    }

    /// True when membership uses finite-difference gradients on `model`.
    pub fn is_approximate(&self, model: &FuzzyModel) -> bool {
        self.needs_gradient() && !model.memberships().has_analytic_gradient()
    }
}

/// Membership test for `x` (which must lie in the modelling box).
pub fn contains(model: &FuzzyModel, region: &RegionSpec, x: &[f64]) -> Result<bool> {
    region.validate(model.rules())?;
    contains_unchecked(model, region, x)
}

fn contains_unchecked(model: &FuzzyModel, region: &RegionSpec, x: &[f64]) -> Result<bool> {
    match region {
        RegionSpec::Modeling => {
            if x.len() != model.dim() {
                return Err(Error::Dimension(format!("state has {} entries, model {}", x.len(), model.dim())));
            }
            Ok(model.region().contains(x))
        }
        RegionSpec::Hb(b) => {
            let d = model.membership_deviation(x)?;
            Ok(d.iter().zip(b).all(|(di, bi)| di.abs() <= *bi))
        }
        RegionSpec::UEta(eta) => {
            let d = model.membership_deviation(x)?;
            Ok(d.norm_squared() <= *eta)
        }
        RegionSpec::OmegaPhi(phi) => {
            let rates = membership_rates(model, x)?.0;
            Ok(rates.iter().zip(phi).all(|(ri, pi)| ri.abs() <= *pi))
        }
        RegionSpec::Intersection(parts) => {
            for p in parts {
                if !contains_unchecked(model, p, x)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// `d/dt alpha_i(x(t)) = grad alpha_i(x)' A(alpha(x)) x`.
pub fn membership_rates(model: &FuzzyModel, x: &[f64]) -> Result<(Vec<f64>, GradientSource)> {
    let f = model.eval_dynamics(x)?;
    let (g, src) = model.memberships().gradient(x)?;
    Ok(((g * f).iter().copied().collect(), src))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovFn {
    /// `x' P x`
    Quadratic(DMatrix<f64>),
    /// `x' (sum_i alpha_i(x) P_i) x`
    Fuzzy(Vec<DMatrix<f64>>),
    /// `x' (P_0 + sum_i alpha_i(x) P_i) x`
    Combined { p0: DMatrix<f64>, p: Vec<DMatrix<f64>> },
}

impl LyapunovFn {
    /// The matrix `P(x)` with `V(x) = x' P(x) x`.
    pub fn matrix_at(&self, model: &FuzzyModel, x: &[f64]) -> Result<DMatrix<f64>> {
        let blend = |ps: &[DMatrix<f64>], base: DMatrix<f64>| -> Result<DMatrix<f64>> {
            if ps.len() != model.rules() {
                return Err(Error::Dimension(format!("{} matrices for {} rules", ps.len(), model.rules())));
            }
            let alpha = model.membership(x)?;
            Ok(ps.iter().zip(alpha.iter()).fold(base, |acc, (p, a)| acc + p * *a))
        };
        let n = model.dim();
        match self {
            LyapunovFn::Quadratic(p) => Ok(p.clone()),
            LyapunovFn::Fuzzy(ps) => blend(ps, DMatrix::zeros(n, n)),
            LyapunovFn::Combined { p0, p } => blend(p, p0.clone()),
        }
    }

    pub fn value(&self, model: &FuzzyModel, x: &[f64]) -> Result<f64> {
        let p = self.matrix_at(model, x)?;
        if p.nrows() != x.len() {
            return Err(Error::Dimension(format!("P is {}x{}, state has {} entries", p.nrows(), p.ncols(), x.len())));
        }
        let v = nalgebra::DVector::from_column_slice(x);
        Ok(v.dot(&(p * &v)))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LyapunovFn::Quadratic(_) => "quadratic",
            LyapunovFn::Fuzzy(_) => "fuzzy",
            LyapunovFn::Combined { .. } => "combined",
        }
    }
}

/// Regular grid over the modelling box, row-major with the first axis slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn over(model: &FuzzyModel, counts: &[usize]) -> Result<Self> {
        let n = model.dim();
        if counts.len() != n {
            return Err(Error::Dimension(format!("{} grid counts for {n} states", counts.len())));
        }
        if n > MAX_GRID_DIM {
            return Err(Error::Unsupported(format!("grid methods handle n <= {MAX_GRID_DIM}, got {n}")));
        }
        if counts.iter().any(|c| *c < 2) {
            return Err(Error::InvalidHyper("grid needs at least 2 points per axis".into()));
        }
        Ok(Self {
            lower: model.region().lower.clone(),
            upper: model.region().upper.clone(),
            counts: counts.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        let mut rest = flat;
        for d in (0..self.counts.len()).rev() {
            idx[d] = rest % self.counts[d];
            rest /= self.counts[d];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| {
                if i + 1 == self.counts[d] {
                    self.upper[d]
                } else {
                    self.lower[d] + i as f64 * self.step(d)
                }
            })
            .collect()
    }

    fn on_box_boundary(&self, idx: &[usize]) -> bool {
        idx.iter().zip(&self.counts).any(|(i, c)| *i == 0 || *i + 1 == *c)
    }

    /// Indices differing by at most one step along every axis, including `idx`.
    fn neighbourhood(&self, idx: &[usize]) -> Vec<usize> {
        let mut out = vec![Vec::new()];
        for (d, &i) in idx.iter().enumerate() {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(self.counts[d] - 1);
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    (lo..=hi).map(move |j| {
                        let mut p = prefix.clone();
                        p.push(j);
                        p
                    })
                })
                .collect();
        }
        out.iter().map(|p| self.flat(p)).collect()
    }

    /// Grid index closest to the origin.
    fn origin_index(&self) -> Vec<usize> {
        (0..self.counts.len())
            .map(|d| {
                let k = (-self.lower[d] / self.step(d)).round();
                (k.max(0.0) as usize).min(self.counts[d] - 1)
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DaEstimate {
    pub lyapunov: LyapunovFn,
    pub level: f64,
    pub region: RegionSpec,
    pub grid: Grid,
    /// `V` at every grid point.
    pub values: Vec<f64>,
    /// Region membership at every grid point.
    pub in_region: Vec<bool>,
    /// Points on grid edges where `V` crosses the level.
    pub boundary_samples: Vec<Vec<f64>>,
    /// Grid points with `V <= level`.
    pub inside_count: usize,
    /// Region membership relied on finite-difference gradients.
    pub approximate: bool,
}

impl DaEstimate {
    pub fn grid_resolution(&self) -> &[usize] {
        &self.grid.counts
    }

    /// Whether grid point `i` lies in the sublevel set.
    pub fn in_sublevel(&self, i: usize) -> bool {
        self.values[i] <= self.level
    }

    /// Whether grid point `i` is in the sublevel set and has a neighbour outside it.
    pub fn on_boundary(&self, i: usize) -> bool {
        self.in_sublevel(i)
            && self
                .grid
                .neighbourhood(&self.grid.index(i))
                .into_iter()
                .any(|j| !self.in_sublevel(j))
    }

    /// Columns `x1..xn, V, in_region, on_boundary`.
    pub fn to_csv(&self) -> String {
        let n = self.grid.counts.len();
        let mut s = String::new();
        for d in 1..=n {
            let _ = write!(s, "x{d},");
        }
        s.push_str("V,in_region,on_boundary\n");
        for i in 0..self.grid.len() {
            for x in self.grid.point(&self.grid.index(i)) {
                let _ = write!(s, "{x},");
            }
            let _ = writeln!(s, "{},{},{}", self.values[i], self.in_region[i] as u8, self.on_boundary(i) as u8);
        }
        s
    }

    /// Marching-squares segments of the level set (two-state models only).
    pub fn level_segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        if self.grid.counts.len() != 2 {
            return Vec::new();
        }
        let (nx, ny) = (self.grid.counts[0], self.grid.counts[1]);
        let c = self.level;
        let mut segs = Vec::new();
        for i in 0..nx - 1 {
            for j in 0..ny - 1 {
                let corners = [[i, j], [i + 1, j], [i + 1, j + 1], [i, j + 1]];
                let mut pts = Vec::new();
                for e in 0..4 {
                    let (a, b) = (corners[e], corners[(e + 1) % 4]);
                    let (va, vb) = (self.values[self.grid.flat(&a)], self.values[self.grid.flat(&b)]);
                    if (va <= c) != (vb <= c) {
                        let s = (c - va) / (vb - va);
                        let pa = self.grid.point(&a);
                        let pb = self.grid.point(&b);
                        pts.push([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]);
                    }
                }
                for pair in pts.chunks(2) {
                    if let [p, q] = pair {
                        segs.push((*p, *q));
                    }
                }
            }
        }
        segs
    }

    /// Region shaded, sublevel set outlined (two-state models only).
    pub fn to_svg(&self) -> Result<String> {
        if self.grid.counts.len() != 2 {
            return Err(Error::Unsupported("SVG output needs a two-state model".into()));
        }
        let (w, h, pad) = (480.0, 480.0, 40.0);
        let g = &self.grid;
        let sx = |x: f64| pad + (x - g.lower[0]) / (g.upper[0] - g.lower[0]) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - g.lower[1]) / (g.upper[1] - g.lower[1]) * (h - 2.0 * pad);
        let (cw, ch) = (
            g.step(0) / (g.upper[0] - g.lower[0]) * (w - 2.0 * pad),
            g.step(1) / (g.upper[1] - g.lower[1]) * (h - 2.0 * pad),
        );
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r##"<g fill="#9ecae1" stroke="none">"##);
        for i in 0..g.len() {
            if self.in_region[i] {
                let p = g.point(&g.index(i));
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                    sx(p[0]) - cw / 2.0,
                    sy(p[1]) - ch / 2.0,
                    cw,
                    ch
                );
            }
        }
        s.push_str("</g>\n");
        let _ = writeln!(s, r##"<g stroke="#d62728" stroke-width="2" fill="none">"##);
        for (p, q) in self.level_segments() {
            let _ = writeln!(
                s,
                r#"<polyline points="{:.2},{:.2} {:.2},{:.2}"/>"#,
                sx(p[0]),
                sy(p[1]),
                sx(q[0]),
                sy(q[1])
            );
        }
        s.push_str("</g>\n");
        let _ = writeln!(
            s,
            r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * pad,
            h - 2.0 * pad
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">x1 in [{:.3}, {:.3}]</text>"#,
            w / 2.0,
            h - 10.0,
            g.lower[0],
            g.upper[0]
        );
        let _ = writeln!(
            s,
            r#"<text x="12" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {})">x2 in [{:.3}, {:.3}]</text>"#,
            h / 2.0,
            h / 2.0,
            g.lower[1],
            g.upper[1]
        );
        let _ = writeln!(s, r#"<text x="{pad}" y="20" font-size="12">c* = {:.6e}</text>"#, self.level);
        s.push_str("</svg>\n");
        Ok(s)
    }
}

/// Largest grid-certified sublevel set of `lyap` inside `region` and the
/// modelling box.
pub fn largest_sublevel(
    model: &FuzzyModel,
    lyap: &LyapunovFn,
    region: &RegionSpec,
    resolution: &[usize],
) -> Result<DaEstimate> {
    region.validate(model.rules())?;
    let grid = Grid::over(model, resolution)?;
    let evals: Vec<(f64, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(&grid.index(i));
            Ok((lyap.value(model, &x)?, contains_unchecked(model, region, &x)?))
        })
        .collect::<Result<_>>()?;
    let (values, in_region): (Vec<f64>, Vec<bool>) = evals.into_iter().unzip();

    let origin = grid.origin_index();
    if !in_region[grid.flat(&origin)] {
        return Err(Error::DegenerateRegion("the region excludes the grid cell of the origin".into()));
    }

    let level = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let idx = grid.index(i);
            let mut c = f64::INFINITY;
            if !in_region[i] {
                for j in grid.neighbourhood(&idx) {
                    c = c.min(values[j]);
                }
            }
            if grid.on_box_boundary(&idx) {
                c = c.min(values[i]);
            }
            c
        })
        .reduce(|| f64::INFINITY, f64::min);
    if !(level > 0.0) {
        return Err(Error::DegenerateRegion(format!(
            "no positive level fits the region (c* = {level:.3e})"
        )));
    }

    let mut boundary_samples = Vec::new();
    for i in 0..grid.len() {
        let idx = grid.index(i);
        for d in 0..idx.len() {
            if idx[d] + 1 < grid.counts[d] {
                let mut jdx = idx.clone();
                jdx[d] += 1;
                let j = grid.flat(&jdx);
                let (va, vb) = (values[i], values[j]);
                if (va <= level) != (vb <= level) {
                    let s = (level - va) / (vb - va);
                    let pa = grid.point(&idx);
                    let pb = grid.point(&jdx);
                    boundary_samples.push(pa.iter().zip(&pb).map(|(a, b)| a + s * (b - a)).collect());
                }
            }
        }
    }
    let inside_count = values.iter().filter(|v| **v <= level).count();
    Ok(DaEstimate {
        lyapunov: lyap.clone(),
        level,
        region: region.clone(),
        grid,
        values,
        in_region,
        boundary_samples,
        inside_count,
        approximate: region.is_approximate(model),
    })
}

/// Unit directions used to probe balls around the origin.
fn directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => (0..count.max(4))
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count.max(4) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice on the sphere, padded with the coordinate axes
            let m = count.max(8);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let mut out: Vec<Vec<f64>> = (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    let mut v = vec![0.0; n];
                    v[0] = r * t.cos();
                    v[1] = r * t.sin();
                    v[2] = z;
                    v
                })
                .collect();
            for d in 0..n {
                for s in [-1.0, 1.0] {
                    let mut v = vec![0.0; n];
                    v[d] = s;
                    out.push(v);
                }
            }
            out
        }
    }
}

/// Ratio between the largest and smallest probed radius.
const RADIUS_DECADES: f64 = 9.0;
/// Certified radii below this fraction of the box are reported as zero.
const RADIUS_FLOOR: f64 = 1e-6;

/// Largest radius `rho` such that every probe point of norm at most `rho` lies
/// in `region`. Probes sit on `resolution` log-spaced spheres between the box
/// half-width `R` and `R * 1e-9`, with `resolution` directions each (two in
/// one dimension). Returns 0 when no ball of radius at least `R * 1e-6` fits.
pub fn ball_inclusion_radius(model: &FuzzyModel, region: &RegionSpec, resolution: usize) -> Result<f64> {
    region.validate(model.rules())?;
    let n = model.dim();
    let bx = model.region();
    let big = (0..n)
        .map(|d| (-bx.lower[d]).max(bx.upper[d]))
        .fold(f64::INFINITY, f64::min);
    if !(big > 0.0) {
        return Ok(0.0);
    }
    let rings = resolution.max(2);
    let dirs = directions(n, resolution);
    let radii: Vec<f64> = (0..rings)
        .map(|k| big * 10f64.powf(-RADIUS_DECADES * k as f64 / (rings - 1) as f64))
        .collect();
    // ok[k]: every probe on sphere k (inside the box) is in the region
    let ok: Vec<bool> = radii
        .par_iter()
        .map(|rho| {
            for dir in &dirs {
                let x: Vec<f64> = dir.iter().map(|u| u * rho).collect();
                if !bx.contains(&x) {
                    continue;
                }
                if !contains_unchecked(model, region, &x)? {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_>>()?;
    // radii are descending; walk up from the smallest sphere
    let mut rho = 0.0;
    for k in (0..rings).rev() {
        if !ok[k] {
            break;
        }
        rho = radii[k];
    }
    Ok(if rho < big * RADIUS_FLOOR { 0.0 } else { rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixture, MembershipFamily, StateBox};
    use nalgebra::DVector;
    use std::collections::BTreeMap;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn example2() -> FuzzyModel {
        let p = [("a".to_string(), -8.0), ("b".to_string(), 100.0)].into_iter().collect();
        fixture("example2", &p).unwrap()
    }

    fn plain_box_model() -> FuzzyModel {
        let mf = MembershipFamily::new(1, 2, |_| DVector::from_element(1, 1.0))
            .unwrap()
            .with_gradient(|_| DMatrix::zeros(1, 2));
        FuzzyModel::new(
            vec![DMatrix::identity(2, 2) * -1.0],
            mf,
            StateBox::symmetric(&[1.0, 1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn origin_is_in_every_region() {
        let m = example2();
        for r in [
            RegionSpec::Hb(vec![0.0; 4]),
            RegionSpec::OmegaPhi(vec![0.0; 4]),
            RegionSpec::UEta(0.0),
            RegionSpec::Modeling,
        ] {
            assert!(contains(&m, &r, &[0.0, 0.0]).unwrap(), "{r:?}");
        }
    }

    #[test]
    fn discontinuous_points_outside_hb() {
        let m = fixture("discontinuous", &none()).unwrap();
        for k in 1..50 {
            let x = 1.0 / (4.0 * k as f64 + 1.0);
            assert!(!contains(&m, &RegionSpec::Hb(vec![0.49, 0.49]), &[x]).unwrap());
        }
        assert!(matches!(
            contains(&m, &RegionSpec::OmegaPhi(vec![1.0, 1.0]), &[0.5]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn whole_box_gives_inscribed_circle() {
        let m = plain_box_model();
        let lyap = LyapunovFn::Quadratic(DMatrix::identity(2, 2));
        let da = largest_sublevel(&m, &lyap, &RegionSpec::Modeling, &[41, 41]).unwrap();
        assert!((da.level - 1.0).abs() < 1e-12);
        assert!(!da.boundary_samples.is_empty());
        assert!(da.to_svg().unwrap().contains("<polyline"));
        assert_eq!(da.to_csv().lines().next().unwrap(), "x1,x2,V,in_region,on_boundary");
    }

    #[test]
    fn degenerate_region_rejected() {
        let m = fixture("discontinuous", &none()).unwrap();
        let lyap = LyapunovFn::Quadratic(DMatrix::identity(1, 1));
        // b = 0 leaves only isolated points around the origin
        let r = largest_sublevel(&m, &lyap, &RegionSpec::Hb(vec![0.0, 0.0]), &[40]);
        assert!(matches!(r, Err(Error::DegenerateRegion(_))));
    }

    #[test]
    fn sublevel_points_are_inside() {
        let m = example2();
        let lyap = LyapunovFn::Quadratic(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]));
        let region = RegionSpec::Hb(vec![0.1; 4]);
        let da = largest_sublevel(&m, &lyap, &region, &[81, 81]).unwrap();
        for i in 0..da.grid.len() {
            if da.in_sublevel(i) {
                assert!(da.in_region[i]);
            }
        }
        assert!(da.inside_count > 1);
    }

    #[test]
    fn ball_radii() {
        let m = example2();
        assert!(ball_inclusion_radius(&m, &RegionSpec::Hb(vec![0.05; 4]), 60).unwrap() > 0.0);
        let disc = fixture("discontinuous", &none()).unwrap();
        assert_eq!(ball_inclusion_radius(&disc, &RegionSpec::Hb(vec![0.3, 0.3]), 200).unwrap(), 0.0);
        let whole = ball_inclusion_radius(&m, &RegionSpec::Modeling, 20).unwrap();
        assert!((whole - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn region_validation() {
        let m = example2();
        assert!(contains(&m, &RegionSpec::Hb(vec![0.1; 3]), &[0.0, 0.0]).is_err());
        assert!(contains(&m, &RegionSpec::Intersection(vec![]), &[0.0, 0.0]).is_err());
        assert!(contains(&m, &RegionSpec::UEta(-1.0), &[0.0, 0.0]).is_err());
    }
}
