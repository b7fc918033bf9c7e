//! Hand-coded example systems.
//!
//! | name | rules | n | parameters | region |
//! |------|-------|---|------------|--------|
//! | `example2` | 4 | 2 | `a`, `b` | `[-pi/2, pi/2]^2` |
//! | `cubic` | 2 | 1 | none | `[-1, 1]` |
//! | `vdp` | 2 | 2 | `mu` | `[-1, 1]^2` |
//! | `scalar-sine` | 2 | 1 | none | `[0, pi/2]` |
//! | `linear-split` | 2 | 1 | none | `[-1, 1]` |
//! | `oscillating-derivative` | 2 | 1 | none | `[-1, 1]` |
//! | `discontinuous` | 2 | 1 | none | `[-1, 1]` |
//!
//! `example2` uses `mu_i(x) = (1 - sin x_i) / 2` and complements
//! `beta_i(x) = 1 - mu_i(x)`, with rule weights `mu_1 mu_2`, `mu_1 beta_2`,
//! `beta_1 mu_2`, `beta_1 beta_2`. The alternative reading
//! `beta_i = 1 - alpha_i` does not keep the four weights on the simplex, so
//! it is not offered. Only `alpha(0) = (1/4, 1/4, 1/4, 1/4)` enters the LMIs,
//! which is the same under both readings.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};

use super::{FuzzyModel, MembershipFamily, StateBox};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct FixtureInfo {
    pub name: &'static str,
    pub params: &'static [&'static str],
    pub description: &'static str,
}

const CATALOG: &[FixtureInfo] = &[
    FixtureInfo {
        name: "example2",
        params: &["a", "b"],
        description: "4-rule 2-state system with sinusoidal product memberships",
    },
    FixtureInfo {
        name: "cubic",
        params: &[],
        description: "dx/dt = -x^3 as A_1 = -1, A_2 = 0, alpha_1 = x^2 (asymptotically, not exponentially stable)",
    },
    FixtureInfo {
        name: "vdp",
        params: &["mu"],
        description: "2-rule oscillator model, alpha_1 = (1 + x_2)/2",
    },
    FixtureInfo {
        name: "scalar-sine",
        params: &[],
        description: "dx/dt = (2 sin x - 1) x as A_1 = 1, A_2 = -1, alpha_1 = sin x on [0, pi/2]",
    },
    FixtureInfo {
        name: "linear-split",
        params: &[],
        description: "dx/dt = -x as A_1 = -1, A_2 = 0, alpha_1 = 1",
    },
    FixtureInfo {
        name: "oscillating-derivative",
        params: &[],
        description: "continuous memberships with a discontinuous derivative at the origin (no analytic gradient)",
    },
    FixtureInfo {
        name: "discontinuous",
        params: &[],
        description: "memberships discontinuous at the origin (not differentiable)",
    },
];

pub fn fixture_catalog() -> &'static [FixtureInfo] {
    CATALOG
}

fn require(name: &str, params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::MissingParameter {
        fixture: name.to_string(),
        param: key.to_string(),
    })
}

fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, data.len() / rows, data)
}

/// Builds a catalog model. Parameters not used by the fixture are ignored.
pub fn fixture(name: &str, params: &BTreeMap<String, f64>) -> Result<FuzzyModel> {
    let mut used = BTreeMap::new();
    let model = match name {
        "example2" => {
            let a = require(name, params, "a")?;
            let b = require(name, params, "b")?;
            used.insert("a".to_string(), a);
            used.insert("b".to_string(), b);
            example2(a, b)?
        }
        "cubic" => cubic()?,
        "vdp" => {
            let mu = require(name, params, "mu")?;
            used.insert("mu".to_string(), mu);
            vdp(mu)?
        }
        "scalar-sine" => scalar_sine()?,
        "linear-split" => linear_split()?,
        "oscillating-derivative" => oscillating_derivative()?,
        "discontinuous" => discontinuous()?,
        other => return Err(Error::UnknownFixture(other.to_string())),
    };
    Ok(model.with_fixture(name, used))
}

fn example2(a: f64, b: f64) -> Result<FuzzyModel> {
    let vertices = vec![
        m(2, &[-5.0, -4.0, -1.0, a]),
        m(2, &[-4.0, -4.0, (3.0 * b - 2.0) / 5.0, (3.0 * a - 4.0) / 5.0]),
        m(2, &[-3.0, -4.0, (2.0 * b - 3.0) / 5.0, (2.0 * a - 6.0) / 5.0]),
        m(2, &[-2.0, -4.0, b, -2.0]),
    ];
    let mu = |s: f64| (1.0 - s.sin()) / 2.0;
    let dmu = |s: f64| -s.cos() / 2.0;
    let mf = MembershipFamily::new(4, 2, move |x| {
        let (m1, m2) = (mu(x[0]), mu(x[1]));
        let (b1, b2) = (1.0 - m1, 1.0 - m2);
        DVector::from_vec(vec![m1 * m2, m1 * b2, b1 * m2, b1 * b2])
    })?
    .with_gradient(move |x| {
        let (m1, m2) = (mu(x[0]), mu(x[1]));
        let (b1, b2) = (1.0 - m1, 1.0 - m2);
        let (d1, d2) = (dmu(x[0]), dmu(x[1]));
        m(
            4,
            &[
                d1 * m2, m1 * d2, //
                d1 * b2, -m1 * d2, //
                -d1 * m2, b1 * d2, //
                -d1 * b2, -b1 * d2,
            ],
        )
    });
    FuzzyModel::new(vertices, mf, StateBox::symmetric(&[FRAC_PI_2, FRAC_PI_2])?)
}

fn cubic() -> Result<FuzzyModel> {
    let mf = MembershipFamily::new(2, 1, |x| {
        let s = x[0] * x[0];
        DVector::from_vec(vec![s, 1.0 - s])
    })?
    .with_gradient(|x| m(2, &[2.0 * x[0], -2.0 * x[0]]));
    FuzzyModel::new(
        vec![m(1, &[-1.0]), m(1, &[0.0])],
        mf,
        StateBox::symmetric(&[1.0])?,
    )
}

fn vdp(mu: f64) -> Result<FuzzyModel> {
    let mf = MembershipFamily::new(2, 2, |x| {
        let a1 = (1.0 + x[1]) / 2.0;
        DVector::from_vec(vec![a1, 1.0 - a1])
    })?
    .with_gradient(|_| m(2, &[0.0, 0.5, 0.0, -0.5]));
    FuzzyModel::new(
        vec![m(2, &[0.0, 1.0, -1.0, mu]), m(2, &[0.0, 1.0, -1.0, 0.0])],
        mf,
        StateBox::symmetric(&[1.0, 1.0])?,
    )
}

fn scalar_sine() -> Result<FuzzyModel> {
    let mf = MembershipFamily::new(2, 1, |x| {
        let s = x[0].sin();
        DVector::from_vec(vec![s, 1.0 - s])
    })?
    .with_gradient(|x| {
        let c = x[0].cos();
        m(2, &[c, -c])
    });
    FuzzyModel::new(
        vec![m(1, &[1.0]), m(1, &[-1.0])],
        mf,
        StateBox::new(vec![0.0], vec![FRAC_PI_2])?,
    )
}

fn linear_split() -> Result<FuzzyModel> {
    let mf = MembershipFamily::new(2, 1, |_| DVector::from_vec(vec![1.0, 0.0]))?
        .with_gradient(|_| DMatrix::zeros(2, 1));
    FuzzyModel::new(
        vec![m(1, &[-1.0]), m(1, &[0.0])],
        mf,
        StateBox::symmetric(&[1.0])?,
    )
}

fn oscillating_derivative() -> Result<FuzzyModel> {
    let mf = MembershipFamily::new(2, 1, |x| {
        let s = x[0];
        let a1 = if s == 0.0 {
            0.0
        } else {
            s * s * (0.5 * (PI / (2.0 * s)).sin() + 0.5)
        };
        DVector::from_vec(vec![a1, 1.0 - a1])
    })?;
    FuzzyModel::new(
        vec![m(1, &[-1.0]), m(1, &[0.0])],
        mf,
        StateBox::symmetric(&[1.0])?,
    )
}

fn discontinuous() -> Result<FuzzyModel> {
    let mf = MembershipFamily::new(2, 1, |x| {
        let s = x[0];
        let a1 = if s == 0.0 {
            0.5
        } else {
            0.5 * (PI / (2.0 * s)).sin() + 0.5
        };
        DVector::from_vec(vec![a1, 1.0 - a1])
    })?
    .non_differentiable();
    FuzzyModel::new(
        vec![m(1, &[-1.0]), m(1, &[0.0])],
        mf,
        StateBox::symmetric(&[1.0])?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_builds() {
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), -8.0);
        p.insert("b".to_string(), 100.0);
        p.insert("mu".to_string(), -2.0);
        for info in fixture_catalog() {
            let model = fixture(info.name, &p).unwrap();
            assert_eq!(model.fixture_ref().unwrap().name, info.name);
            assert_eq!(model.fixture_ref().unwrap().params.len(), info.params.len());
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fixture("nope", &BTreeMap::new()),
            Err(Error::UnknownFixture(_))
        ));
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), -8.0);
        assert!(matches!(
            fixture("example2", &p),
            Err(Error::MissingParameter { .. })
        ));
        assert!(matches!(
            fixture("vdp", &BTreeMap::new()),
            Err(Error::MissingParameter { .. })
        ));
    }

    #[test]
    fn example2_shape() {
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), -8.0);
        p.insert("b".to_string(), 100.0);
        let model = fixture("example2", &p).unwrap();
        assert_eq!((model.rules(), model.dim()), (4, 2));
        assert_eq!(model.region().upper, vec![FRAC_PI_2, FRAC_PI_2]);
        assert_eq!(model.region().lower, vec![-FRAC_PI_2, -FRAC_PI_2]);
        assert!(model.memberships().has_analytic_gradient());
    }

    #[test]
    fn vdp_matrices() {
        let mut p = BTreeMap::new();
        p.insert("mu".to_string(), -2.0);
        let model = fixture("vdp", &p).unwrap();
        assert_eq!(model.vertices()[0], m(2, &[0.0, 1.0, -1.0, -2.0]));
        assert_eq!(model.vertices()[1], m(2, &[0.0, 1.0, -1.0, 0.0]));
        assert_eq!(model.nominal_matrix(), &m(2, &[0.0, 1.0, -1.0, -1.0]));
    }

    #[test]
    fn gradient_availability() {
        let none = BTreeMap::new();
        let osc = fixture("oscillating-derivative", &none).unwrap();
        assert!(!osc.memberships().has_analytic_gradient());
        assert!(osc.memberships().is_differentiable());
        let disc = fixture("discontinuous", &none).unwrap();
        assert!(!disc.memberships().is_differentiable());
        assert_eq!(disc.memberships().alpha_at_origin()[0], 0.5);
    }
}
