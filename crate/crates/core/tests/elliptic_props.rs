//! Property suite for the elliptic solvers: a dense symmetric eigensolve as
//! the independent oracle, monotonicity of the principal eigenvalue in the
//! potential, and eigenfunction positivity across boundary conditions.

#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
mod common;

use piconelab::elliptic::{
    assemble, principal_eigenpair, principal_eigenvalue_with_potential, BoundaryCondition,
    EllipticProblem,
};
use piconelab::expr::parse;
use piconelab::grid::{Field, Grid};
use piconelab::util::SplitMix64;
use std::f64::consts::FRAC_PI_2;

fn dirichlet_problem(n: usize, a: &str, c: &str) -> EllipticProblem {
    let g = Grid::new(-FRAC_PI_2, FRAC_PI_2, n).unwrap();
    EllipticProblem::new(
        Field::sample(g, &parse(a).unwrap()).unwrap(),
        Field::sample(g, &parse(c).unwrap()).unwrap(),
        BoundaryCondition::Dirichlet,
        BoundaryCondition::Dirichlet,
    )
    .unwrap()
}

/// Interior block of the assembled operator as a dense symmetric matrix.
fn dense_interior(p: &EllipticProblem, extra: Option<&Field>) -> Vec<Vec<f64>> {
    let op = assemble(p).unwrap();
    let tri = op.tridiag();
    let n = op.n();
    let m = n - 2;
    let mut d = vec![vec![0.0; m]; m];
    for i in 1..n - 1 {
        let k = i - 1;
        d[k][k] = tri.diag[i] + extra.map_or(0.0, |v| v.values()[i]);
        if i > 1 {
            d[k][k - 1] = tri.sub[i];
        }
        if i < n - 2 {
            d[k][k + 1] = tri.sup[i];
        }
    }
    d
}

#[test]
fn eigenvalue_matches_dense_oracle_with_potential() {
    let p = dirichlet_problem(201, "1", "0");
    let v = Field::sample(p.grid(), &parse("cos(x)").unwrap()).unwrap();
    let sigma = principal_eigenvalue_with_potential(&p, &v, 1e-12).unwrap();
    let dense = dense_interior(&p, Some(&v));
    let ev = common::jacobi_eigenvalues(&dense);
    assert!(
        (sigma - ev[0]).abs() < 1e-8,
        "inverse iteration {sigma} vs dense {}",
        ev[0]
    );
}

#[test]
fn eigenvalue_matches_dense_oracle_variable_diffusion() {
    let p = dirichlet_problem(121, "1 + 0.25*sin(x)", "x^2 - 0.3");
    let sigma = principal_eigenpair(&p, 1e-12).unwrap().sigma;
    let ev = common::jacobi_eigenvalues(&dense_interior(&p, None));
    assert!((sigma - ev[0]).abs() < 1e-8, "{sigma} vs {}", ev[0]);
}

#[test]
fn potential_monotonicity() {
    // V1 <= V2 pointwise, V1 != V2  =>  sigma[L+V1] < sigma[L+V2]
    let p = dirichlet_problem(101, "1", "0");
    let g = p.grid();
    let mut rng = SplitMix64::new(2024);
    for _ in 0..6 {
        let base: Vec<f64> = (0..g.len()).map(|_| rng.next_in(-1.0, 1.0)).collect();
        let bump: Vec<f64> = (0..g.len()).map(|_| rng.next_in(0.0, 0.5)).collect();
        let v1 = Field::from_values(g, base.clone()).unwrap();
        let v2 =
            Field::from_values(g, base.iter().zip(&bump).map(|(&b, &d)| b + d).collect()).unwrap();
        let s1 = principal_eigenvalue_with_potential(&p, &v1, 1e-11).unwrap();
        let s2 = principal_eigenvalue_with_potential(&p, &v2, 1e-11).unwrap();
        assert!(s1 < s2, "s1 = {s1}, s2 = {s2}");
    }
}

#[test]
fn eigenfunction_positive_across_boundary_conditions() {
    let g = Grid::new(0.0, 1.0, 81).unwrap();
    let cases = [
        (BoundaryCondition::Dirichlet, BoundaryCondition::Dirichlet),
        (
            BoundaryCondition::Dirichlet,
            BoundaryCondition::Robin { beta: 2.0 },
        ),
        (
            BoundaryCondition::Robin { beta: -1.5 },
            BoundaryCondition::Robin { beta: 0.7 },
        ),
        (
            BoundaryCondition::Robin { beta: 0.0 },
            BoundaryCondition::Robin { beta: 0.0 },
        ),
    ];
    for (bl, br) in cases {
        let p = EllipticProblem::new(
            Field::sample(g, &parse("1 + x").unwrap()).unwrap(),
            Field::sample(g, &parse("sin(3*x)").unwrap()).unwrap(),
            bl,
            br,
        )
        .unwrap();
        let e = principal_eigenpair(&p, 1e-10).unwrap();
        for i in 0..g.len() {
            let boundary_dirichlet =
                (i == 0 && bl.is_dirichlet()) || (i == g.len() - 1 && br.is_dirichlet());
            if boundary_dirichlet {
                assert_eq!(e.phi[i], 0.0);
            } else {
                assert!(e.phi[i] > 0.0, "phi[{i}] = {} for {bl:?}/{br:?}", e.phi[i]);
            }
        }
        // outward slope is negative at Dirichlet ends (discrete analogue of
        // the strict positivity cone)
        if bl.is_dirichlet() {
            assert!(e.phi[1] > 0.0);
        }
        if br.is_dirichlet() {
            assert!(e.phi[g.len() - 2] > 0.0);
        }
    }
}

#[test]
fn robin_eigenvalue_second_order_convergence() {
    // beta = 1 both ends on (0,1), A = 1, C = 0: sigma is the root of
    // transcendental sqrt(s) tan(sqrt(s)/...); use a fine-grid reference.
    let sigma_at = |n: usize| {
        let g = Grid::new(0.0, 1.0, n).unwrap();
        let p = EllipticProblem::new(
            Field::constant(g, 1.0),
            Field::zeros(g),
            BoundaryCondition::Robin { beta: 1.0 },
            BoundaryCondition::Robin { beta: 1.0 },
        )
        .unwrap();
        principal_eigenpair(&p, 1e-12).unwrap().sigma
    };
    let reference = sigma_at(6401);
    let e1 = (sigma_at(101) - reference).abs();
    let e2 = (sigma_at(201) - reference).abs();
    let ratio = e1 / e2;
    assert!(
        (3.3..=4.7).contains(&ratio),
        "ratio {ratio} (e1={e1:e}, e2={e2:e})"
    );
}
