//! Positive solutions of Lu = λu − a(x)f(u) with a sign-changing weight:
//! damped Newton solves, seeding from the principal eigenpair, bifurcation
//! direction, pseudo-arclength continuation with fold detection, linearized
//! stability, fold curvature, nonexistence certificates, and stable-branch
//! verification.

use crate::elliptic::{assemble, EigenOptions, EllipticProblem, Operator};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::linalg::{solve_bordered, Tridiag};
use crate::util::linf;

/// |stability| below this declares a point neutrally stable.
pub const FOLD_TOL: f64 = 1e-6;
/// Sup-norm threshold that terminates a branch as blown up.
pub const BLOWUP_SUP: f64 = 1e6;

/// Reaction nonlinearity f with f(0) = 0, extended oddly to s < 0 so Newton
/// iterates may cross zero transiently (f(s) = s|s|^{p-1} for power laws).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Nonlinearity {
    PowerLaw { p: f64 },
    ULogU,
    Composite { nu: f64, p: f64, q: f64 },
}

fn pow_odd(s: f64, p: f64) -> f64 {
    s.signum() * s.abs().powf(p)
}

impl Nonlinearity {
    pub fn power(p: f64) -> Self {
        Nonlinearity::PowerLaw { p }
    }

    pub fn composite(nu: f64, p: f64, q: f64) -> Self {
        Nonlinearity::Composite { nu, p, q }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::PowerLaw { p } if p > 0.0 => Ok(()),
            Nonlinearity::PowerLaw { p } => {
                Err(Error::Config(format!("power law needs p > 0, got {p}")))
            }
            Nonlinearity::ULogU => Ok(()),
            Nonlinearity::Composite { nu, p, q } if nu >= 0.0 && 0.0 < p && p < q => Ok(()),
            Nonlinearity::Composite { nu, p, q } => Err(Error::Config(format!(
                "composite needs 0 < p < q and nu >= 0, got nu={nu} p={p} q={q}"
            ))),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::PowerLaw { p } => pow_odd(s, p),
            Nonlinearity::ULogU => {
                if s > 0.0 {
                    s * s.ln()
                } else {
                    0.0
                }
            }
            Nonlinearity::Composite { nu, p, q } => nu * pow_odd(s, p) + pow_odd(s, q),
        }
    }

    pub fn fp(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::PowerLaw { p } => p * s.abs().powf(p - 1.0),
            Nonlinearity::ULogU => {
                if s > 0.0 {
                    s.ln() + 1.0
                } else {
                    0.0
                }
            }
            Nonlinearity::Composite { nu, p, q } => {
                nu * p * s.abs().powf(p - 1.0) + q * s.abs().powf(q - 1.0)
            }
        }
    }

    pub fn fpp(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::PowerLaw { p } => p * (p - 1.0) * pow_odd(s, p - 2.0),
            Nonlinearity::ULogU => {
                if s > 0.0 {
                    1.0 / s
                } else {
                    0.0
                }
            }
            Nonlinearity::Composite { nu, p, q } => {
                nu * p * (p - 1.0) * pow_odd(s, p - 2.0) + q * (q - 1.0) * pow_odd(s, q - 2.0)
            }
        }
    }

    /// Exponent p with finite nonzero lim f(s)/s^p as s → 0⁺, and that limit.
    pub fn natural_exponent(&self) -> Result<(f64, f64)> {
        match *self {
            Nonlinearity::PowerLaw { p } => Ok((p, 1.0)),
            Nonlinearity::Composite { nu, p, .. } if nu > 0.0 => Ok((p, nu)),
            Nonlinearity::Composite { q, .. } => Ok((q, 1.0)),
            Nonlinearity::ULogU => Err(Error::Exponent(
                "u log u has no finite nonzero limit of f(s)/s^p".to_string(),
            )),
        }
    }

    /// Limit coefficient of f(s)/s^p for a caller-chosen p; errors when the
    /// limit is zero or infinite.
    pub fn limit_coefficient(&self, p: f64) -> Result<f64> {
        let (pn, coeff) = self.natural_exponent()?;
        if (p - pn).abs() > 1e-12 {
            let which = if p < pn { "zero" } else { "infinite" };
            return Err(Error::Exponent(format!(
                "lim f(s)/s^{p} is {which}; the natural exponent is {pn}"
            )));
        }
        Ok(coeff)
    }
}

#[derive(Clone, Debug)]
pub struct ScalarProblem {
    pub op: EllipticProblem,
    /// Weight a(x); may change sign but not vanish identically.
    pub weight: Field,
    pub f: Nonlinearity,
}

impl ScalarProblem {
    pub fn new(op: EllipticProblem, weight: Field, f: Nonlinearity) -> Result<ScalarProblem> {
        if weight.grid() != op.grid() {
            return Err(Error::Config("weight grid mismatch".to_string()));
        }
        if weight.sup_norm() == 0.0 {
            return Err(Error::Config(
                "weight must not vanish identically".to_string(),
            ));
        }
        f.validate()?;
        Ok(ScalarProblem { op, weight, f })
    }

    fn assembled(&self) -> Result<Operator> {
        assemble(&self.op)
    }
}

/// Nodewise residual Lu − λu + a f(u), boundary rows replaced by the boundary
/// condition residual (the assembled Dirichlet/Robin rows).
pub fn residual(sp: &ScalarProblem, lambda: f64, u: &Field) -> Result<Field> {
    check_grid(sp, u)?;
    let op = sp.assembled()?;
    Field::from_values(sp.op.grid(), residual_vec(&op, sp, lambda, u.values()))
}

fn residual_vec(op: &Operator, sp: &ScalarProblem, lambda: f64, u: &[f64]) -> Vec<f64> {
    let mut r = op.apply(u);
    let a = sp.weight.values();
    for i in 0..u.len() {
        if !op.is_dirichlet(i) {
            r[i] += -lambda * u[i] + a[i] * sp.f.f(u[i]);
        }
    }
    r
}

/// Jacobian L − λ + a f'(u) with identity rows at Dirichlet nodes.
fn jacobian(op: &Operator, sp: &ScalarProblem, lambda: f64, u: &[f64]) -> Tridiag {
    let mut tri = op.tridiag().clone();
    let a = sp.weight.values();
    for i in 0..u.len() {
        if !op.is_dirichlet(i) {
            tri.diag[i] += -lambda + a[i] * sp.f.fp(u[i]);
        }
    }
    tri
}

/// ∂F/∂λ = −u on non-Dirichlet rows.
fn dres_dlambda(op: &Operator, u: &[f64]) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(i, &ui)| if op.is_dirichlet(i) { 0.0 } else { -ui })
        .collect()
}

fn check_positive(op: &Operator, u: &[f64]) -> Result<()> {
    let sup = linf(u).max(1.0);
    for (i, &v) in u.iter().enumerate() {
        if !op.is_dirichlet(i) && v < -1e-10 * sup {
            return Err(Error::Positivity(format!(
                "converged iterate is negative at node {i} (value {v:e})"
            )));
        }
    }
    Ok(())
}

/// Damped Newton on the residual with the analytic Jacobian. The tolerance
/// is floored at the backward-error level reachable with rows of size ‖L‖.
pub fn newton_solve(sp: &ScalarProblem, lambda: f64, u0: &Field, tol: f64) -> Result<Field> {
    check_grid(sp, u0)?;
    let op = sp.assembled()?;
    let mut u = u0.values().to_vec();
    let row_norm = (0..op.n())
        .map(|i| op.tridiag().sub[i].abs() + op.tridiag().diag[i].abs() + op.tridiag().sup[i].abs())
        .fold(0.0f64, f64::max);
    let tol = tol.max(row_norm * 8.0 * f64::EPSILON * linf(u0.values()).max(1.0));
    let mut fnorm = linf(&residual_vec(&op, sp, lambda, &u));
    for _ in 0..60 {
        if fnorm <= tol {
            check_positive(&op, &u)?;
            return Field::from_values(sp.op.grid(), u);
        }
        let jac = jacobian(&op, sp, lambda, &u);
        // Levenberg fallback: a singular Jacobian (e.g. a start sitting on a
        // degenerate level set) gets a diagonal shift instead of a hard stop.
        let scale = linf(&jac.diag).max(1.0);
        let mut fac = None;
        for tau in [0.0, 1e-10, 1e-6, 1e-3, 1e-1] {
            let mut shifted = jac.clone();
            for (i, d) in shifted.diag.iter_mut().enumerate() {
                if !op.is_dirichlet(i) {
                    *d += tau * scale;
                }
            }
            if let Ok(f) = shifted.factor() {
                fac = Some(f);
                break;
            }
        }
        let fac = fac.ok_or(Error::Iteration {
            iterations: 60,
            residual: fnorm,
        })?;
        let mut rhs = residual_vec(&op, sp, lambda, &u);
        for v in rhs.iter_mut() {
            *v = -*v;
        }
        let mut step = fac.solve(&rhs);
        // trust-region-style cap so regularized steps stay sane
        let cap = 10.0 * (1.0 + linf(&u));
        let snorm = linf(&step);
        if snorm > cap {
            let f = cap / snorm;
            for d in step.iter_mut() {
                *d *= f;
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(&a, &d)| a + t * d).collect();
            let fnew = linf(&residual_vec(&op, sp, lambda, &trial));
            if fnew < fnorm * (1.0 - 1e-4 * t) || fnew <= tol {
                u = trial;
                fnorm = fnew;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Iteration {
                iterations: 60,
                residual: fnorm,
            });
        }
    }
    if fnorm <= tol {
        check_positive(&op, &u)?;
        return Field::from_values(sp.op.grid(), u);
    }
    Err(Error::Iteration {
        iterations: 60,
        residual: fnorm,
    })
}

/// D_p = (lim f(s)/s^p) ∫ a φ0^{p+1}; positive means supercritical
/// bifurcation of the positive branch, negative subcritical.
pub fn bifurcation_direction(sp: &ScalarProblem, p: f64) -> Result<f64> {
    let coeff = sp.f.limit_coefficient(p)?;
    let eig = sp
        .assembled()?
        .principal_eigenpair(&EigenOptions::default())?;
    let integrand = sp.weight.zip_with(&eig.phi, |a, phi| a * phi.powf(p + 1.0));
    Ok(coeff * integrand.integrate())
}

#[derive(Clone, Debug)]
pub struct BranchPoint {
    /// Cumulative arclength from the seed.
    pub s: f64,
    pub lambda: f64,
    pub u: Field,
    /// σ[L − λ + a f'(u)]; positive is linearly stable.
    pub stability_sigma: f64,
    pub is_fold: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchEvent {
    Fold { index: usize },
    StabilityChange { index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    WindowEdge,
    Blowup,
    MaxPoints,
    Stalled,
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub events: Vec<BranchEvent>,
    pub termination: Termination,
    /// σ0 of the unweighted operator (bifurcation point from u = 0).
    pub sigma0: f64,
}

fn check_grid(sp: &ScalarProblem, u: &Field) -> Result<()> {
    if u.grid() != sp.op.grid() {
        return Err(Error::Config("field does not live on the problem grid".to_string()));
    }
    Ok(())
}

/// σ[L − λ + a f'(u)] via the eigen machinery with the potential folded in.
pub fn stability(sp: &ScalarProblem, lambda: f64, u: &Field) -> Result<f64> {
    check_grid(sp, u)?;
    let op = sp.assembled()?;
    Ok(stability_with(&op, sp, lambda, u.values(), None)?.0)
}

fn stability_with(
    op: &Operator,
    sp: &ScalarProblem,
    lambda: f64,
    u: &[f64],
    start: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let a = sp.weight.values();
    let pot: Vec<f64> = (0..u.len())
        .map(|i| -lambda + a[i] * sp.f.fp(u[i]))
        .collect();
    let pair = op.principal_eigenpair_with(Some(&pot), &EigenOptions::default(), start)?;
    Ok((pair.sigma, pair.phi.into_values()))
}

/// Initial branch point (σ0 + D_p ε^{p−1}, ε φ0), polished first at frozen λ
/// and then by the amplitude-pinned extended system so λ is freed.
pub fn seed_branch(sp: &ScalarProblem, eps: f64) -> Result<BranchPoint> {
    if !(eps > 0.0) {
        return Err(Error::Seed(format!("eps must be positive, got {eps}")));
    }
    let op = sp.assembled()?;
    let eig = op.principal_eigenpair(&EigenOptions::default())?;
    let (pexp, coeff) = sp.f.natural_exponent()?;
    let integrand = sp
        .weight
        .zip_with(&eig.phi, |a, phi| a * phi.powf(pexp + 1.0));
    let dp = coeff * integrand.integrate();
    let mut lambda = eig.sigma + dp * eps.powf(pexp - 1.0);
    let mut u: Vec<f64> = eig.phi.values().iter().map(|&v| eps * v).collect();

    // frozen-lambda polish (loose); near the bifurcation the Jacobian is
    // nearly singular, so failures here are not fatal
    let loose = 1e-8 * eps.max(1e-3);
    if let Ok(field) = newton_solve(
        sp,
        lambda,
        &Field::from_values(sp.op.grid(), u.clone())?,
        loose,
    ) {
        u = field.into_values();
    }

    // freed-lambda polish: solve F(u, λ) = 0 with the amplitude pinned,
    // ∫ φ0 u = ε (φ0 is L²-normalized)
    let weights = sp.op.grid().trapezoid_weights();
    let brow: Vec<f64> = eig
        .phi
        .values()
        .iter()
        .zip(&weights)
        .map(|(&p, &w)| p * w)
        .collect();
    let mut ok = false;
    for _ in 0..40 {
        let mut f = residual_vec(&op, sp, lambda, &u);
        let amp: f64 = u.iter().zip(&brow).map(|(&a, &b)| a * b).sum();
        let fn_res = linf(&f).max((amp - eps).abs());
        if fn_res <= 1e-12 * eps.max(1.0) {
            ok = true;
            break;
        }
        let jac = jacobian(&op, sp, lambda, &u);
        let fac = jac.factor().map_err(|_| {
            Error::Seed("singular Jacobian while seeding; try a smaller eps".to_string())
        })?;
        for v in f.iter_mut() {
            *v = -*v;
        }
        let col = dres_dlambda(&op, &u);
        let (du, dl) = solve_bordered(&fac, &col, &brow, 0.0, &f, eps - amp)
            .map_err(|_| Error::Seed("seed polish failed; try a smaller eps".to_string()))?;
        for (ui, d) in u.iter_mut().zip(&du) {
            *ui += d;
        }
        lambda += dl;
    }
    if !ok {
        return Err(Error::Seed(
            "seed polish did not converge; try a smaller eps".to_string(),
        ));
    }
    check_positive(&op, &u).map_err(|_| {
        Error::Seed("seeded solution lost positivity; try a smaller eps".to_string())
    })?;
    let sigma = stability_with(&op, sp, lambda, &u, None)?.0;
    Ok(BranchPoint {
        s: 0.0,
        lambda,
        u: Field::from_values(sp.op.grid(), u)?,
        stability_sigma: sigma,
        is_fold: false,
    })
}

struct Continuation<'a> {
    op: Operator,
    sp: &'a ScalarProblem,
    weights: Vec<f64>,
    newton_tol: f64,
}

struct StatePoint {
    u: Vec<f64>,
    lambda: f64,
    /// Unit tangent in the weighted metric.
    tu: Vec<f64>,
    tl: f64,
}

impl<'a> Continuation<'a> {
    fn inner_w(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((&x, &y), &w)| w * x * y)
            .sum()
    }

    fn normalize_tangent(&self, tu: &mut [f64], tl: &mut f64) {
        let norm = (self.inner_w(tu, tu) + *tl * *tl).sqrt();
        for v in tu.iter_mut() {
            *v /= norm;
        }
        *tl /= norm;
    }

    /// Tangent at (u, λ): solve J t_u = u t_λ with the previous tangent as the
    /// normalization row (Keller's bordered tangent).
    fn tangent(
        &self,
        u: &[f64],
        lambda: f64,
        prev_tu: &[f64],
        prev_tl: f64,
    ) -> Option<(Vec<f64>, f64)> {
        let jac = jacobian(&self.op, self.sp, lambda, u);
        let fac = jac.factor().ok()?;
        let col = dres_dlambda(&self.op, u);
        let row: Vec<f64> = prev_tu
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| t * w)
            .collect();
        let zero = vec![0.0; u.len()];
        let (mut tu, mut tl) = solve_bordered(&fac, &col, &row, prev_tl, &zero, 1.0).ok()?;
        self.normalize_tangent(&mut tu, &mut tl);
        if self.inner_w(&tu, prev_tu) + tl * prev_tl < 0.0 {
            for v in tu.iter_mut() {
                *v = -*v;
            }
            tl = -tl;
        }
        Some((tu, tl))
    }

    /// One predictor-corrector step of length ds from `from`. Returns the new
    /// state with its own tangent.
    fn step(&self, from: &StatePoint, ds: f64) -> Option<StatePoint> {
        let n = from.u.len();
        let mut u: Vec<f64> = (0..n).map(|i| from.u[i] + ds * from.tu[i]).collect();
        let mut lambda = from.lambda + ds * from.tl;
        let row: Vec<f64> = from
            .tu
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| t * w)
            .collect();
        let mut converged = false;
        for _ in 0..12 {
            let mut f = residual_vec(&self.op, self.sp, lambda, &u);
            let du: Vec<f64> = (0..n).map(|i| u[i] - from.u[i]).collect();
            let arc = self.inner_w(&from.tu, &du) + from.tl * (lambda - from.lambda) - ds;
            let res = linf(&f).max(arc.abs());
            if res <= self.newton_tol {
                converged = true;
                break;
            }
            let jac = jacobian(&self.op, self.sp, lambda, &u);
            let fac = jac.factor().ok()?;
            for v in f.iter_mut() {
                *v = -*v;
            }
            let col = dres_dlambda(&self.op, &u);
            let (step_u, step_l) = solve_bordered(&fac, &col, &row, from.tl, &f, -arc).ok()?;
            for (ui, d) in u.iter_mut().zip(&step_u) {
                *ui += d;
            }
            lambda += step_l;
            if !lambda.is_finite() || u.iter().any(|v| !v.is_finite()) {
                return None;
            }
        }
        if !converged {
            return None;
        }
        let (tu, tl) = self.tangent(&u, lambda, &from.tu, from.tl)?;
        Some(StatePoint { u, lambda, tu, tl })
    }
}

/// Pseudo-arclength continuation with adaptive step halving, fold detection
/// (sign change of dλ/ds refined by secant iteration), and stability tracked
/// along the way.
pub fn continue_branch(
    sp: &ScalarProblem,
    seed: &BranchPoint,
    step: f64,
    max_points: usize,
    lambda_window: (f64, f64),
) -> Result<Branch> {
    if !(step > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    check_grid(sp, &seed.u)?;
    if !(lambda_window.0 < lambda_window.1) {
        return Err(Error::Config("lambda window must be nonempty".to_string()));
    }
    let op = assemble(&sp.op)?;
    let sigma0 = op.principal_eigenpair(&EigenOptions::default())?.sigma;
    let cont = Continuation {
        op,
        sp,
        weights: sp.op.grid().trapezoid_weights(),
        newton_tol: 1e-9,
    };

    // initial tangent, regularized by the amplitude row so it exists at the
    // near-singular seed; oriented toward growing amplitude
    let u0 = seed.u.values().to_vec();
    let seed_dir: Vec<f64> = {
        let norm = (cont.inner_w(&u0, &u0)).sqrt().max(1e-300);
        u0.iter().map(|&v| v / norm).collect()
    };
    let (tu0, tl0) = cont
        .tangent(&u0, seed.lambda, &seed_dir, 0.0)
        .ok_or_else(|| Error::Continuation("cannot build a tangent at the seed".to_string()))?;
    let mut state = StatePoint {
        u: u0,
        lambda: seed.lambda,
        tu: tu0,
        tl: tl0,
    };

    let mut points = vec![BranchPoint {
        s: 0.0,
        lambda: seed.lambda,
        u: seed.u.clone(),
        stability_sigma: seed.stability_sigma,
        is_fold: false,
    }];
    let mut eig_start: Option<Vec<f64>> = None;
    let mut ds = step;
    let mut s_total = 0.0;
    let termination;

    'outer: loop {
        if points.len() >= max_points {
            termination = Termination::MaxPoints;
            break;
        }
        let mut stepped = None;
        while stepped.is_none() {
            stepped = cont.step(&state, ds);
            if stepped.is_none() {
                ds *= 0.5;
                if ds < step * 1e-8 {
                    if points.len() == 1 {
                        return Err(Error::Continuation(
                            "continuation failed immediately at the seed".to_string(),
                        ));
                    }
                    termination = Termination::Stalled;
                    break 'outer;
                }
            }
        }
        let new = stepped.unwrap();

        // fold between state and new?
        if state.tl * new.tl < 0.0 {
            let fold = refine_fold(&cont, &state, ds, state.tl, new.tl);
            if let Some((fs, fstate)) = fold {
                let (sig, vec) =
                    stability_with(&cont.op, sp, fstate.lambda, &fstate.u, eig_start.as_deref())?;
                eig_start = Some(vec);
                points.push(BranchPoint {
                    s: s_total + fs,
                    lambda: fstate.lambda,
                    u: Field::from_values(sp.op.grid(), fstate.u.clone())?,
                    stability_sigma: sig,
                    is_fold: true,
                });
            }
        }

        s_total += ds;
        let (sig, vec) = stability_with(&cont.op, sp, new.lambda, &new.u, eig_start.as_deref())?;
        eig_start = Some(vec);
        points.push(BranchPoint {
            s: s_total,
            lambda: new.lambda,
            u: Field::from_values(sp.op.grid(), new.u.clone())?,
            stability_sigma: sig,
            is_fold: false,
        });

        let sup = linf(&new.u);
        state = new;
        if sup > BLOWUP_SUP {
            termination = Termination::Blowup;
            break;
        }
        if state.lambda < lambda_window.0 || state.lambda > lambda_window.1 {
            termination = Termination::WindowEdge;
            break;
        }
        ds = (ds * 1.4).min(step);
    }

    let mut events = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if p.is_fold {
            events.push(BranchEvent::Fold { index: i });
        }
        if i > 0 {
            let prev = points[i - 1].stability_sigma;
            if prev * p.stability_sigma < 0.0 {
                events.push(BranchEvent::StabilityChange { index: i });
            }
        }
    }

    Ok(Branch {
        points,
        events,
        termination,
        sigma0,
    })
}

/// Secant iteration on dλ/ds over the bracketing step: walk sub-steps of the
/// last interval until the tangent λ-component crosses zero.
fn refine_fold(
    cont: &Continuation,
    from: &StatePoint,
    ds: f64,
    g_lo: f64,
    g_hi: f64,
) -> Option<(f64, StatePoint)> {
    let (mut t_lo, mut t_hi) = (0.0f64, ds);
    let (mut g_lo, mut g_hi) = (g_lo, g_hi);
    let mut best: Option<(f64, StatePoint)> = None;
    for _ in 0..40 {
        let mut t = t_hi - g_hi * (t_hi - t_lo) / (g_hi - g_lo);
        if !t.is_finite() {
            break;
        }
        t = t.clamp(t_lo + 0.02 * (t_hi - t_lo), t_hi - 0.02 * (t_hi - t_lo));
        let cand = cont.step(from, t)?;
        let g = cand.tl;
        if best.as_ref().is_none_or(|(_, b)| g.abs() < b.tl.abs()) {
            best = Some((t, cand));
        }
        if g.abs() < 1e-12 || (t_hi - t_lo) < 1e-12 * ds {
            break;
        }
        if g * g_lo > 0.0 {
            t_lo = t;
            g_lo = g;
        } else {
            t_hi = t;
            g_hi = g;
        }
    }
    best
}

/// λ''(0) = ∫ a ψ0³ f''(u0) / ∫ u0 ψ0 at a neutrally stable point; ψ0 is the
/// eigenfunction of the linearization normalized so ∫ ψ0² = 1.
pub fn fold_curvature(sp: &ScalarProblem, lambda0: f64, u0: &Field) -> Result<f64> {
    check_grid(sp, u0)?;
    let op = assemble(&sp.op)?;
    let (sigma, psi) = stability_with(&op, sp, lambda0, u0.values(), None)?;
    if sigma.abs() > FOLD_TOL {
        return Err(Error::Precondition(format!(
            "point is not neutrally stable: stability sigma = {sigma:e} exceeds {FOLD_TOL:e}"
        )));
    }
    let psi = Field::from_values(sp.op.grid(), psi)?;
    let num = sp
        .weight
        .zip_with(&psi, |a, ps| a * ps.powi(3))
        .zip_with(u0, |w, u| w * sp.f.fpp(u))
        .integrate();
    let den = u0.inner(&psi);
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Certificate {
    /// ∫ a φ0^{p+1} ≤ 0: no positive solutions exist at λ ≥ σ0.
    Certified {
        integral: f64,
    },
    NotApplicable {
        integral: f64,
    },
}

/// Nonexistence certificate for f = u^p, p > 1.
pub fn nonexistence_certificate(sp: &ScalarProblem) -> Result<Certificate> {
    let p = match sp.f {
        Nonlinearity::PowerLaw { p } if p > 1.0 => p,
        _ => {
            return Err(Error::Precondition(
                "certificate requires a power law with p > 1".to_string(),
            ))
        }
    };
    let eig = sp
        .assembled()?
        .principal_eigenpair(&EigenOptions::default())?;
    let integral = sp
        .weight
        .zip_with(&eig.phi, |a, phi| a * phi.powf(p + 1.0))
        .integrate();
    if integral <= 0.0 {
        Ok(Certificate::Certified { integral })
    } else {
        Ok(Certificate::NotApplicable { integral })
    }
}

/// Upper bound for λ*: the minimum over maximal subintervals where a < 0 of
/// the Dirichlet principal eigenvalue of L on that subinterval.
pub fn lambda_star_bound(sp: &ScalarProblem) -> Result<f64> {
    use crate::elliptic::BoundaryCondition;
    let g = sp.op.grid();
    let a = sp.weight.values();
    let n = g.len();
    // maximal runs of strict negativity, endpoints located by linear
    // interpolation of the nodal values
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < n {
        if a[i] < 0.0 {
            let start = i;
            while i + 1 < n && a[i + 1] < 0.0 {
                i += 1;
            }
            let lo = if start == 0 {
                g.x_lo()
            } else {
                let (x0, x1) = (g.node(start - 1), g.node(start));
                x0 + (x1 - x0) * a[start - 1] / (a[start - 1] - a[start])
            };
            let hi = if i + 1 == n {
                g.x_hi()
            } else {
                let (x0, x1) = (g.node(i), g.node(i + 1));
                x0 + (x1 - x0) * a[i] / (a[i] - a[i + 1])
            };
            runs.push((lo, hi));
        }
        i += 1;
    }
    if runs.is_empty() {
        return Err(Error::Precondition(
            "weight is nonnegative everywhere; no negative subinterval".to_string(),
        ));
    }
    let mut bound = f64::INFINITY;
    for (lo, hi) in runs {
        if hi - lo < 4.0 * g.h() {
            continue; // unresolvable sliver; its eigenvalue is huge anyway
        }
        let m = (((hi - lo) / g.h()).round() as usize + 1).clamp(51, 4001);
        let sub = crate::grid::Grid::new(lo, hi, m)?;
        let av: Vec<f64> = (0..m)
            .map(|k| sp.op.diffusion().interp(sub.node(k)))
            .collect();
        let cv: Vec<f64> = (0..m)
            .map(|k| sp.op.potential().interp(sub.node(k)))
            .collect();
        let p = EllipticProblem::new(
            Field::from_values(sub, av)?,
            Field::from_values(sub, cv)?,
            BoundaryCondition::Dirichlet,
            BoundaryCondition::Dirichlet,
        )?;
        let sig = crate::elliptic::principal_eigenpair(&p, 1e-10)?.sigma;
        bound = bound.min(sig);
    }
    if !bound.is_finite() {
        return Err(Error::Precondition(
            "negative set of the weight is below mesh resolution".to_string(),
        ));
    }
    Ok(bound)
}

#[derive(Clone, Debug)]
pub struct StableBranchReport {
    /// Every stable point sits at λ > σ0.
    pub stable_above_sigma0: bool,
    /// u is pointwise nondecreasing in λ along the stable sub-branch.
    pub stable_monotone: bool,
    /// At most one stable solution per λ value.
    pub stable_single_valued: bool,
    /// Terminal state is a fold, a norm blowup, or the window edge.
    pub terminal_state_admissible: bool,
    pub notes: Vec<String>,
}

impl StableBranchReport {
    pub fn pass(&self) -> bool {
        self.stable_above_sigma0
            && self.stable_monotone
            && self.stable_single_valued
            && self.terminal_state_admissible
    }
}

/// Assertions on the computed branch for f = u^p, p ≥ 2: stable points only
/// above σ0, pointwise monotone and single-valued stable sub-branch, and an
/// admissible terminal state.
pub fn verify_stable_branch(branch: &Branch) -> StableBranchReport {
    let mut notes = Vec::new();
    let stable: Vec<&BranchPoint> = branch
        .points
        .iter()
        .filter(|p| p.stability_sigma > FOLD_TOL)
        .collect();

    let mut stable_above_sigma0 = true;
    for p in &stable {
        if p.lambda <= branch.sigma0 + 1e-9 * branch.sigma0.abs().max(1.0) - 1e-12 {
            stable_above_sigma0 = false;
            notes.push(format!(
                "stable point at lambda = {} does not exceed sigma0 = {}",
                p.lambda, branch.sigma0
            ));
        }
    }

    let mut sorted: Vec<&BranchPoint> = stable.clone();
    sorted.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    let mut stable_monotone = true;
    for w in sorted.windows(2) {
        let scale = w[1].u.sup_norm().max(1.0);
        let mut min_gap = f64::INFINITY;
        for i in 0..w[0].u.len() {
            min_gap = min_gap.min(w[1].u[i] - w[0].u[i]);
        }
        if min_gap < -1e-6 * scale {
            stable_monotone = false;
            notes.push(format!(
                "stable sub-branch not pointwise nondecreasing between lambda = {} and {}",
                w[0].lambda, w[1].lambda
            ));
            break;
        }
    }

    let mut stable_single_valued = true;
    'pairs: for i in 0..stable.len() {
        for j in i + 1..stable.len() {
            let scale = stable[i].lambda.abs().max(1.0);
            if (stable[i].lambda - stable[j].lambda).abs() < 1e-8 * scale {
                let mut diff = 0.0f64;
                for k in 0..stable[i].u.len() {
                    diff = diff.max((stable[i].u[k] - stable[j].u[k]).abs());
                }
                if diff > 1e-6 * stable[i].u.sup_norm().max(1.0) {
                    stable_single_valued = false;
                    notes.push(format!(
                        "two distinct stable solutions at lambda = {}",
                        stable[i].lambda
                    ));
                    break 'pairs;
                }
            }
        }
    }

    let has_fold = branch
        .events
        .iter()
        .any(|e| matches!(e, BranchEvent::Fold { .. }));
    let terminal_state_admissible = matches!(
        branch.termination,
        Termination::WindowEdge | Termination::Blowup
    ) || has_fold;
    if !terminal_state_admissible {
        notes.push(format!(
            "terminal state {:?} with no fold recorded",
            branch.termination
        ));
    }

    StableBranchReport {
        stable_above_sigma0,
        stable_monotone,
        stable_single_valued,
        terminal_state_admissible,
        notes,
    }
}
