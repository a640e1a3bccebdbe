//! Numerical check of the generalized Picone identity: for smooth u, v and
//! any C¹ weight g,
//!
//! ```text
//! ∫ g(v/u)[u·Lv − v·Lu] = ∫ u² g'(v/u) A (v/u)'² − [g(v/u)·A·(u v' − v u')]·ν |∂
//! ```
//!
//! with ν the outward normal (+1 at the right endpoint, −1 at the left). In
//! 1-D the boundary integral degenerates to endpoint evaluation, and the β
//! terms of the Robin operator cancel inside Du·Rv − Dv·Ru, so the same
//! formula serves Dirichlet and Robin ends. The identity does not require A
//! to stay positive, so this module applies L through raw one-sided stencils
//! rather than the assembled (ellipticity-checked) operator.

use crate::elliptic::EllipticProblem;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::Field;

#[derive(Clone, Copy, Debug)]
pub struct PiconeReport {
    pub lhs: f64,
    pub volume_term: f64,
    pub boundary_term: f64,
    /// |lhs − (volume_term − boundary_term)|
    pub residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PiconeCheck {
    pub report: PiconeReport,
    /// Largest relative mismatch between the supplied g' and a centered
    /// finite difference of g over the sampled range of v/u. Consistency is
    /// a precondition warning, never an error.
    pub gprime_gap: f64,
}

/// Raw nodewise application of L = -(A w')' + C w, one-sided at the
/// endpoints, with no boundary rows. Second order at every node.
pub fn apply_differential(p: &EllipticProblem, w: &Field) -> Field {
    let g = p.grid();
    let n = g.len();
    let h = g.h();
    let a = p.diffusion().values();
    let c = p.potential().values();
    let u = w.values();
    // midpoint fluxes A_{i+1/2} (w_{i+1} - w_i)/h
    let flux: Vec<f64> = (0..n - 1)
        .map(|i| 0.5 * (a[i] + a[i + 1]) * (u[i + 1] - u[i]) / h)
        .collect();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = -(flux[i] - flux[i - 1]) / h + c[i] * u[i];
    }
    // one-sided derivative of the flux from three midpoint values
    out[0] = -(-2.0 * flux[0] + 3.0 * flux[1] - flux[2]) / h + c[0] * u[0];
    out[n - 1] = -(2.0 * flux[n - 2] - 3.0 * flux[n - 3] + flux[n - 4]) / h + c[n - 1] * u[n - 1];
    Field::from_values(g, out).expect("same grid")
}

/// Centered first derivative, second-order one-sided at the endpoints.
fn derivative(w: &Field) -> Vec<f64> {
    let n = w.len();
    let h = w.grid().h();
    let v = w.values();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    d
}

pub fn picone_check(
    p: &EllipticProblem,
    u: &Field,
    v: &Field,
    g: &Expr,
    g_prime: &Expr,
) -> Result<PiconeCheck> {
    let grid = p.grid();
    let n = grid.len();
    if u.grid() != grid || v.grid() != grid {
        return Err(Error::Config(
            "u, v must live on the problem grid".to_string(),
        ));
    }
    if n < 5 {
        return Err(Error::Config(
            "picone check needs at least 5 nodes for one-sided stencils".to_string(),
        ));
    }
    let sup_u = u.sup_norm();
    for i in 1..n - 1 {
        if u[i].abs() <= 1e-14 * sup_u.max(f64::MIN_POSITIVE) {
            return Err(Error::Domain(format!(
                "u vanishes at interior node {i} (x = {}); v/u undefined",
                grid.node(i)
            )));
        }
    }

    // v/u, extended by the one-sided derivative ratio where u reaches zero
    // at an endpoint (Dirichlet data).
    let mut ratio = vec![0.0; n];
    for i in 0..n {
        if u[i].abs() > 1e-13 * sup_u {
            ratio[i] = v[i] / u[i];
        } else {
            let (du, dv) = if i == 0 {
                (
                    -3.0 * u[0] + 4.0 * u[1] - u[2],
                    -3.0 * v[0] + 4.0 * v[1] - v[2],
                )
            } else {
                (
                    3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3],
                    3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3],
                )
            };
            if du.abs() <= 1e-14 * sup_u.max(f64::MIN_POSITIVE) {
                return Err(Error::Domain(format!(
                    "one-sided limit of v/u undefined at endpoint node {i}"
                )));
            }
            ratio[i] = dv / du;
        }
    }

    let ratio_field = Field::from_values(grid, ratio.clone())?;
    let dr = derivative(&ratio_field);
    let lu = apply_differential(p, u);
    let lv = apply_differential(p, v);
    let a = p.diffusion().values();

    let eval_at = |e: &Expr, t: f64, i: usize| -> Result<f64> {
        e.eval(t)
            .map_err(|m| Error::Domain(format!("g evaluation failed at node {i} (t = {t}): {m}")))
    };

    let mut lhs_integrand = vec![0.0; n];
    let mut vol_integrand = vec![0.0; n];
    for i in 0..n {
        let gt = eval_at(g, ratio[i], i)?;
        let gpt = eval_at(g_prime, ratio[i], i)?;
        lhs_integrand[i] = gt * (u[i] * lv[i] - v[i] * lu[i]);
        vol_integrand[i] = u[i] * u[i] * gpt * a[i] * dr[i] * dr[i];
    }
    let lhs = Field::from_values(grid, lhs_integrand)?.integrate();
    let volume_term = Field::from_values(grid, vol_integrand)?.integrate();

    // boundary: value of g(v/u)·A·(u v' − v u') at x_hi minus at x_lo
    let du = derivative(u);
    let dv = derivative(v);
    let wronskian = |i: usize| a[i] * (u[i] * dv[i] - v[i] * du[i]);
    let g_right = eval_at(g, ratio[n - 1], n - 1)?;
    let g_left = eval_at(g, ratio[0], 0)?;
    let boundary_term = g_right * wronskian(n - 1) - g_left * wronskian(0);

    let residual = (lhs - (volume_term - boundary_term)).abs();

    // finite-difference consistency of g' against g over the ratio range
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in &ratio {
        tmin = tmin.min(t);
        tmax = tmax.max(t);
    }
    let mut gap = 0.0f64;
    for k in 0..=32 {
        let t = tmin + (tmax - tmin) * k as f64 / 32.0;
        let delta = 1e-6 * t.abs().max(1.0);
        match (g.eval(t + delta), g.eval(t - delta), g_prime.eval(t)) {
            (Ok(gp), Ok(gm), Ok(gd)) => {
                let fd = (gp - gm) / (2.0 * delta);
                gap = gap.max((fd - gd).abs() / gd.abs().max(1.0));
            }
            _ => continue, // sampling outside g's domain is not an error
        }
    }

    Ok(PiconeCheck {
        report: PiconeReport {
            lhs,
            volume_term,
            boundary_term,
            residual,
        },
        gprime_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::BoundaryCondition;
    use crate::expr::parse;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn robin(beta: f64) -> BoundaryCondition {
        BoundaryCondition::Robin { beta }
    }

    fn setup(n: usize) -> (EllipticProblem, Field, Field) {
        let g = Grid::new(0.0, 1.0, n).unwrap();
        let a = Field::sample(g, &parse("1 + 0.1*x^2").unwrap()).unwrap();
        let c = Field::sample(g, &parse("x").unwrap()).unwrap();
        let p = EllipticProblem::new(a, c, robin(1.0), robin(1.0)).unwrap();
        let u = Field::sample(g, &parse("2 + sin(x)").unwrap()).unwrap();
        let v = Field::sample(g, &parse("2 + cos(x)").unwrap()).unwrap();
        (p, u, v)
    }

    #[test]
    fn identical_arguments_give_zero() {
        let (p, u, _) = setup(101);
        let chk = picone_check(&p, &u, &u, &parse("x^2").unwrap(), &parse("2*x").unwrap()).unwrap();
        assert!(chk.report.residual < 1e-10, "{:?}", chk.report);
        assert!(chk.report.volume_term.abs() < 1e-12);
    }

    #[test]
    fn constant_g_reduces_to_greens_identity() {
        // u, v two Dirichlet sine modes on (0, pi); g == 1 so the volume term
        // vanishes and lhs must equal minus the boundary term, both ~ 0.
        let g = Grid::new(0.0, PI, 401).unwrap();
        let a = Field::constant(g, 1.0);
        let c = Field::zeros(g);
        let p = EllipticProblem::new(
            a,
            c,
            BoundaryCondition::Dirichlet,
            BoundaryCondition::Dirichlet,
        )
        .unwrap();
        let u = Field::sample(g, &parse("sin(x)").unwrap()).unwrap();
        let v = Field::sample(g, &parse("sin(2*x)").unwrap()).unwrap();
        // v/u = 2cos(x) extends smoothly; u > 0 strictly inside.
        let chk = picone_check(&p, &u, &v, &parse("1").unwrap(), &parse("0").unwrap()).unwrap();
        assert!(chk.report.volume_term.abs() < 1e-12);
        assert!(chk.report.lhs.abs() < 1e-3, "lhs {}", chk.report.lhs);
        assert!(chk.report.residual < 1e-3, "{:?}", chk.report);
    }

    #[test]
    fn smooth_robin_case_is_second_order() {
        let res = |n: usize| {
            let (p, u, v) = setup(n);
            picone_check(&p, &u, &v, &parse("x^2").unwrap(), &parse("2*x").unwrap())
                .unwrap()
                .report
                .residual
        };
        let r201 = res(201);
        let r401 = res(401);
        let ratio = r201 / r401;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "r201={r201} r401={r401} ratio={ratio}"
        );
    }

    #[test]
    fn indefinite_diffusion_still_satisfies_identity() {
        let res = |n: usize| {
            let g = Grid::new(0.0, 1.0, n).unwrap();
            let a = Field::sample(g, &parse("x - 0.5").unwrap()).unwrap();
            let c = Field::sample(g, &parse("1 - x").unwrap()).unwrap();
            let p = EllipticProblem::new(a, c, robin(1.0), robin(-0.5)).unwrap();
            let u = Field::sample(g, &parse("2 + sin(x)").unwrap()).unwrap();
            let v = Field::sample(g, &parse("2 + cos(2*x)").unwrap()).unwrap();
            picone_check(&p, &u, &v, &parse("x^2").unwrap(), &parse("2*x").unwrap())
                .unwrap()
                .report
                .residual
        };
        let ratio = res(201) / res(401);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn volume_term_nonnegative_for_power_weights_and_shared_bcs() {
        // u, v > 0 both satisfying the boundary conditions: the boundary
        // term vanishes and the volume term must stay nonnegative up to
        // discretization noise, for g = t^p, p >= 1
        let g = Grid::new(0.0, PI, 201).unwrap();
        let a = Field::sample(g, &parse("1 + 0.2*x").unwrap()).unwrap();
        let c = Field::sample(g, &parse("0.5*x").unwrap()).unwrap();
        let p = EllipticProblem::new(
            a,
            c,
            BoundaryCondition::Dirichlet,
            BoundaryCondition::Dirichlet,
        )
        .unwrap();
        let op = crate::elliptic::assemble(&p).unwrap();
        let eig = op
            .principal_eigenpair(&crate::elliptic::EigenOptions::default())
            .unwrap();
        let u = eig.phi.clone();
        // v: positive solve of (L + 1) v = positive source, so Bv = 0 and v > 0
        let src = Field::sample(g, &parse("1 + sin(x)").unwrap()).unwrap();
        let v = op.solve_shifted(1.0, &src).unwrap();
        assert!(v.values()[1..g.len() - 1].iter().all(|&x| x > 0.0));
        for (gexpr, gpexpr) in [("x", "1"), ("x^2", "2*x"), ("x^3", "3*x^2")] {
            let chk =
                picone_check(&p, &u, &v, &parse(gexpr).unwrap(), &parse(gpexpr).unwrap()).unwrap();
            assert!(
                chk.report.volume_term >= -1e-8,
                "g = {gexpr}: volume term {}",
                chk.report.volume_term
            );
            assert!(chk.report.boundary_term.abs() < 1e-6, "g = {gexpr}");
        }
    }

    #[test]
    fn vanishing_interior_u_is_rejected() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let a = Field::constant(g, 1.0);
        let c = Field::zeros(g);
        let p = EllipticProblem::new(a, c, robin(0.0), robin(0.0)).unwrap();
        let u = Field::sample(g, &parse("x - 0.5").unwrap()).unwrap();
        let v = Field::constant(g, 1.0);
        let r = picone_check(&p, &u, &v, &parse("x").unwrap(), &parse("1").unwrap());
        match r {
            Err(Error::Domain(msg)) => assert!(msg.contains("vanishes"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn gprime_gap_flags_mismatch() {
        let (p, u, v) = setup(61);
        let good =
            picone_check(&p, &u, &v, &parse("x^2").unwrap(), &parse("2*x").unwrap()).unwrap();
        assert!(good.gprime_gap < 1e-4, "{}", good.gprime_gap);
        let bad = picone_check(&p, &u, &v, &parse("x^2").unwrap(), &parse("3*x").unwrap()).unwrap();
        assert!(bad.gprime_gap > 1e-2, "{}", bad.gprime_gap);
    }
}
