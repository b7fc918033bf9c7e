use std::collections::BTreeSet;

use nalgebra::DMatrix;
use tslyap::conditions::ConditionSpec;
use tslyap::lmi::{lyap_expr, vertex_enumerate, Assignment, LmiProblem, Symmetry};
use tslyap::model::fixture;
use tslyap::reproduce::example2_reference;

#[test]
fn lyapunov_expression_on_the_scalar_fixture() {
    let model = fixture("scalar-sine", &Default::default()).unwrap();
    let a0 = model.nominal_matrix().clone();
    assert_eq!(a0[(0, 0)], -1.0);
    let mut problem = LmiProblem::new(1e-6).unwrap();
    let p = problem.add_var("P", 1, Symmetry::Symmetric);
    let mut asg = Assignment::new();
    asg.insert(p.id, DMatrix::from_element(1, 1, 1.0));
    assert_eq!(lyap_expr(&a0, &p).unwrap().evaluate(&asg).unwrap()[(0, 0)], -2.0);
}

#[test]
fn example2_vertices() {
    let v = vertex_enumerate(&[0.2603; 4]).unwrap();
    assert_eq!(v.len(), 16);
    assert!(v.iter().all(|d| d.iter().all(|x| x.abs() == 0.2603)));
    let distinct: BTreeSet<Vec<u64>> = v.iter().map(|d| d.iter().map(|x| x.to_bits()).collect()).collect();
    assert_eq!(distinct.len(), 16);
}

#[test]
fn built_problems_are_symmetric_at_random_assignments() {
    let m = example2_reference().unwrap();
    for spec in [
        ConditionSpec::mozelli(vec![1.0; 4]),
        ConditionSpec::ball(0.1),
        ConditionSpec::combined(vec![1.0; 4], vec![0.1; 4]),
    ] {
        let problem = spec.build(&m).unwrap();
        let mut asg = Assignment::new();
        for (k, v) in problem.variables().iter().enumerate() {
            let n = v.n;
            asg.insert(v.id, DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3 + k) as f64).sin()));
        }
        for c in problem.constraints() {
            let f = c.expr.evaluate(&asg).unwrap();
            assert_eq!(f, f.transpose(), "{}", c.label);
        }
    }
}
