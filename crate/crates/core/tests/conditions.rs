use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tslyap::conditions::{ConditionKind, ConditionSpec};
use tslyap::model::{fixture, FuzzyModel};
use tslyap::reproduce::{example2_reference, random_hurwitz_model};
use tslyap::sdp::{solve, validate_certificate, SolverOptions, VerdictStatus};
use tslyap::search::{sweep, SweepAxis, SweepResult};

fn status(model: &FuzzyModel, spec: &ConditionSpec) -> VerdictStatus {
    let problem = spec.build(model).unwrap();
    let v = solve(&problem, &SolverOptions::default());
    if let Some(c) = &v.certificate {
        assert!(validate_certificate(&problem, c).passed);
    }
    v.status
}

fn p(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn example2_grid(spec: &ConditionSpec) -> SweepResult {
    let axes = [SweepAxis::new("a", -10.0, 0.0, 11), SweepAxis::new("b", 0.0, 200.0, 11)];
    sweep("example2", &BTreeMap::new(), axes, spec, &SolverOptions::default()).unwrap()
}

fn cell_model(res: &SweepResult, i: usize, j: usize) -> FuzzyModel {
    fixture("example2", &p(&[("a", res.axes[0].value(i)), ("b", res.axes[1].value(j))])).unwrap()
}

#[test]
fn example2_reference_verdicts() {
    let m = example2_reference().unwrap();
    let r = m.rules();
    // frozen baseline: no common quadratic Lyapunov function on the whole box
    assert_eq!(status(&m, &ConditionSpec::qlf()), VerdictStatus::Infeasible);
    assert_eq!(status(&m, &ConditionSpec::mozelli(vec![0.99 * 4.0781; r])), VerdictStatus::Feasible);
    assert_ne!(status(&m, &ConditionSpec::mozelli(vec![6.0; r])), VerdictStatus::Feasible);
    assert_eq!(status(&m, &ConditionSpec::vertex(vec![0.2603; r])), VerdictStatus::Feasible);
    assert_ne!(status(&m, &ConditionSpec::vertex(vec![0.28; r])), VerdictStatus::Feasible);
    assert_eq!(status(&m, &ConditionSpec::ball(0.16)), VerdictStatus::Feasible);
    assert_ne!(status(&m, &ConditionSpec::ball(1.1645)), VerdictStatus::Feasible);
}

#[test]
fn flf_conditions_fail_on_the_limitation_examples() {
    let sine = fixture("scalar-sine", &BTreeMap::new()).unwrap();
    let vdp = fixture("vdp", &p(&[("mu", -2.0)])).unwrap();
    for phi in [1e-3, 0.1, 0.5, 1.0, 10.0, 100.0] {
        for model in [&sine, &vdp] {
            for kind in [ConditionKind::Tanaka, ConditionKind::Mozelli] {
                let spec = ConditionSpec::uniform(kind, 2, phi).unwrap();
                assert_ne!(status(model, &spec), VerdictStatus::Feasible, "{kind} phi={phi}");
            }
        }
    }
    assert_eq!(status(&vdp, &ConditionSpec::mozelli(vec![0.5; 2])), VerdictStatus::Infeasible);
    assert_eq!(status(&sine, &ConditionSpec::vertex(vec![0.05; 2])), VerdictStatus::Feasible);
}

#[test]
fn cubic_is_never_certified() {
    let cubic = fixture("cubic", &BTreeMap::new()).unwrap();
    let probes = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
    assert_ne!(status(&cubic, &ConditionSpec::qlf()), VerdictStatus::Feasible);
    for &v in &probes {
        for kind in ConditionKind::ALL {
            let spec = match kind {
                ConditionKind::Qlf => continue,
                ConditionKind::Combined => ConditionSpec::combined(vec![1.0 / v; 2], vec![v; 2]),
                ConditionKind::Tanaka | ConditionKind::Mozelli => ConditionSpec::uniform(kind, 2, 1.0 / v).unwrap(),
                k => ConditionSpec::uniform(k, 2, v).unwrap(),
            };
            assert_ne!(status(&cubic, &spec), VerdictStatus::Feasible, "{spec:?}");
        }
    }
}

#[test]
fn overbound_feasibility_implies_vertex_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let model = random_hurwitz_model(&mut rng).unwrap();
        for b in [0.05, 0.2, 0.5] {
            if status(&model, &ConditionSpec::overbound(vec![b; 2])).is_feasible() {
                assert!(status(&model, &ConditionSpec::vertex(vec![b; 2])).is_feasible(), "b={b}");
            }
        }
    }
}

#[test]
fn mozelli_feasible_cells_are_vertex_feasible_for_small_b() {
    let moz = example2_grid(&ConditionSpec::mozelli(vec![0.85; 4]));
    for (i, row) in moz.verdicts.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_feasible() {
                continue;
            }
            let model = cell_model(&moz, i, j);
            let found = [0.1, 0.03, 1e-2, 1e-3]
                .iter()
                .any(|&b| status(&model, &ConditionSpec::vertex(vec![b; 4])).is_feasible());
            assert!(found, "cell ({i}, {j})");
        }
    }
}

#[test]
fn combined_dominates_its_parts() {
    let moz = example2_grid(&ConditionSpec::mozelli(vec![0.85; 4]));
    let vertex = example2_grid(&ConditionSpec::vertex(vec![0.2; 4]));
    let combined = example2_grid(&ConditionSpec::combined(vec![0.85; 4], vec![0.2; 4]));
    for i in 0..11 {
        for j in 0..11 {
            if moz.verdicts[i][j].is_feasible() || vertex.verdicts[i][j].is_feasible() {
                assert!(combined.verdicts[i][j].is_feasible(), "cell ({i}, {j})");
            }
        }
    }
}

#[test]
fn constraint_count_formulas() {
    let m2 = fixture("vdp", &p(&[("mu", -2.0)])).unwrap();
    let m4 = example2_reference().unwrap();
    for (model, r) in [(&m2, 2usize), (&m4, 4)] {
        let vertex = ConditionSpec::vertex(vec![0.1; r]).build(model).unwrap();
        assert_eq!(vertex.constraints().len(), (1 << r) + 1);
        let combined = ConditionSpec::combined(vec![1.0; r], vec![0.1; r]).build(model).unwrap();
        assert_eq!(combined.constraints().len(), r + (1 << r) + (1 << r) * r * (r + 1) / 2);
    }
}
