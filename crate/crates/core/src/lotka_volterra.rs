//! Diffusive two-species Lotka-Volterra systems
//!
//! ```text
//!   d1(x) L1 u = λu − au² ± buv
//!   d2(x) L2 v = μv − dv² ± cuv      (+ symbiotic, − competitive)
//! ```
//!
//! with per-species mixed boundary conditions: semitrivial logistic states,
//! coexistence solvers (monotone iteration for the cooperative symbiotic
//! system, interaction homotopy for the competitive one), linearized
//! stability through the coupled cooperative eigenproblem, the F± stability
//! window, (λ, μ)-plane region classification, and semi-implicit parabolic
//! evolution.

use crate::elliptic::{assemble_scaled, inverse_power, EigenOptions, EllipticProblem, Operator};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{Banded, TridiagFactor};
use crate::util::{linf, SplitMix64};

/// Sup-norm threshold treated as blowup during evolution and iteration.
pub const BLOWUP_SUP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Symbiotic,
    Competitive,
}

impl Kind {
    /// Sign of the interaction terms in the reaction: +1 symbiotic fuels the
    /// partner, −1 competitive suppresses it.
    fn sign(self) -> f64 {
        match self {
            Kind::Symbiotic => 1.0,
            Kind::Competitive => -1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LVSystem {
    pub kind: Kind,
    pub d1: Field,
    pub d2: Field,
    pub lam: Field,
    pub mu: Field,
    pub a: Field,
    pub b: Field,
    pub c: Field,
    pub d: Field,
    pub op1: EllipticProblem,
    pub op2: EllipticProblem,
}

impl LVSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: Kind,
        d1: Field,
        d2: Field,
        lam: Field,
        mu: Field,
        a: Field,
        b: Field,
        c: Field,
        d: Field,
        op1: EllipticProblem,
        op2: EllipticProblem,
    ) -> Result<LVSystem> {
        let g = op1.grid();
        for (name, f) in [
            ("d1", &d1),
            ("d2", &d2),
            ("lam", &lam),
            ("mu", &mu),
            ("a", &a),
            ("b", &b),
            ("c", &c),
            ("d", &d),
        ] {
            if f.grid() != g {
                return Err(Error::Config(format!("field {name} grid mismatch")));
            }
        }
        if op2.grid() != g {
            return Err(Error::Config("op2 grid mismatch".to_string()));
        }
        for (name, f) in [
            ("a", &a),
            ("b", &b),
            ("c", &c),
            ("d", &d),
            ("d1", &d1),
            ("d2", &d2),
        ] {
            if f.min_value() <= 0.0 {
                return Err(Error::Config(format!(
                    "field {name} must be strictly positive, min = {}",
                    f.min_value()
                )));
            }
        }
        let sys = LVSystem {
            kind,
            d1,
            d2,
            lam,
            mu,
            a,
            b,
            c,
            d,
            op1,
            op2,
        };
        let kappa = sys.kappa();
        if kappa.max_value() > 1.0 + 1e-12 {
            return Err(Error::LowInteraction(format!(
                "kappa = bc/(ad) exceeds 1 (max {})",
                kappa.max_value()
            )));
        }
        if kappa.min_value() >= 1.0 - 1e-12 {
            return Err(Error::LowInteraction(
                "kappa = bc/(ad) must be strictly below 1 somewhere".to_string(),
            ));
        }
        Ok(sys)
    }

    pub fn grid(&self) -> Grid {
        self.op1.grid()
    }

    /// κ = bc/(ad), nodewise.
    pub fn kappa(&self) -> Field {
        let num = self.b.zip_with(&self.c, |b, c| b * c);
        let den = self.a.zip_with(&self.d, |a, d| a * d);
        num.zip_with(&den, |n, d| n / d)
    }

    /// Copy with the growth rates replaced by constants.
    pub fn with_growth_overrides(&self, lam: Option<f64>, mu: Option<f64>) -> LVSystem {
        let mut out = self.clone();
        if let Some(l) = lam {
            out.lam = Field::constant(self.grid(), l);
        }
        if let Some(m) = mu {
            out.mu = Field::constant(self.grid(), m);
        }
        out
    }
}

/// F±(k) = (1/8)[27 − 18k − k² ± (9−k)^{3/2}(1−k)^{1/2}] for k ∈ [0, 1].
pub fn f_pm(k: f64) -> Result<(f64, f64)> {
    if !(-1e-12..=1.0 + 1e-12).contains(&k) {
        return Err(Error::Domain(format!(
            "F± is defined on [0, 1], got k = {k}"
        )));
    }
    let k = k.clamp(0.0, 1.0);
    let base = 27.0 - 18.0 * k - k * k;
    let rad = ((9.0 - k).powi(3) * (1.0 - k)).sqrt();
    Ok(((base - rad) / 8.0, (base + rad) / 8.0))
}

/// Critical points z±(k) of F(z; k) = z²(z−k)/(z−1): z− ∈ (0, 1], z+ ∈ [1, ∞).
pub fn z_pm(k: f64) -> Result<(f64, f64)> {
    if !(-1e-12..=1.0 + 1e-12).contains(&k) {
        return Err(Error::Domain(format!(
            "z± is defined on [0, 1], got k = {k}"
        )));
    }
    let k = k.clamp(0.0, 1.0);
    let s = ((9.0 - k) * (1.0 - k)).sqrt();
    Ok(((3.0 + k - s) / 4.0, (3.0 + k + s) / 4.0))
}

#[derive(Clone, Copy, Debug)]
pub struct StabilityWindow {
    /// max over nodes of (a d²/c³)(d2/d1) F−(κ)
    pub lower: f64,
    /// min over nodes of (a d²/c³)(d2/d1) F+(κ)
    pub upper: f64,
    pub feasible: bool,
    /// Midpoint of the window when feasible.
    pub xi: Option<f64>,
}

/// Nodewise evaluation of the F± window; a feasible window certifies linear
/// stability of every coexistence state.
pub fn stability_window(sys: &LVSystem) -> Result<StabilityWindow> {
    let kappa = sys.kappa();
    if kappa.max_value() > 1.0 + 1e-12 {
        return Err(Error::LowInteraction(format!(
            "kappa exceeds 1 (max {})",
            kappa.max_value()
        )));
    }
    let n = sys.grid().len();
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..n {
        let w = sys.a[i] * sys.d[i] * sys.d[i] / sys.c[i].powi(3) * sys.d2[i] / sys.d1[i];
        let (fm, fp) = f_pm(kappa[i])?;
        lower = lower.max(w * fm);
        upper = upper.min(w * fp);
    }
    let feasible = lower <= upper;
    Ok(StabilityWindow {
        lower,
        upper,
        feasible,
        xi: feasible.then_some(0.5 * (lower + upper)),
    })
}

/// Local damped Newton for the scalar logistic equation T θ = growth·θ − weight·θ².
fn newton_logistic(
    t: &Operator,
    growth: &[f64],
    weight: &[f64],
    theta0: Vec<f64>,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = t.n();
    let resid = |th: &[f64]| -> Vec<f64> {
        let mut r = t.apply(th);
        for i in 0..n {
            if !t.is_dirichlet(i) {
                r[i] += -growth[i] * th[i] + weight[i] * th[i] * th[i];
            }
        }
        r
    };
    let mut th = theta0;
    let mut fnorm = linf(&resid(&th));
    for _ in 0..80 {
        if fnorm <= tol {
            return Ok(th);
        }
        let mut jac = t.tridiag().clone();
        for i in 0..n {
            if !t.is_dirichlet(i) {
                jac.diag[i] += -growth[i] + 2.0 * weight[i] * th[i];
            }
        }
        let fac = jac.factor().map_err(|s| {
            Error::Solver(format!("singular logistic Jacobian (pivot {})", s.pivot))
        })?;
        let mut rhs = resid(&th);
        for v in rhs.iter_mut() {
            *v = -*v;
        }
        let step = fac.solve(&rhs);
        let mut tau = 1.0;
        let mut ok = false;
        for _ in 0..25 {
            let trial: Vec<f64> = th.iter().zip(&step).map(|(&x, &d)| x + tau * d).collect();
            let fnew = linf(&resid(&trial));
            if fnew < fnorm * (1.0 - 1e-4 * tau) || fnew <= tol {
                th = trial;
                fnorm = fnew;
                ok = true;
                break;
            }
            tau *= 0.5;
        }
        if !ok {
            break;
        }
    }
    if fnorm <= tol {
        Ok(th)
    } else {
        Err(Error::Iteration {
            iterations: 80,
            residual: fnorm,
        })
    }
}

/// Positive solution of d(x)·L θ = growth·θ − weight·θ², or zero when the
/// trivial state is stable (σ[dL − growth] ≥ 0). The Newton value is
/// cross-checked against a monotone iteration from a constant supersolution.
pub fn logistic_state(
    d: &Field,
    growth: &Field,
    weight: &Field,
    op: &EllipticProblem,
) -> Result<Field> {
    let t = assemble_scaled(op, Some(d))?;
    let g = op.grid();
    let n = g.len();
    let neg_growth: Vec<f64> = growth.values().iter().map(|&v| -v).collect();
    let pair = t.principal_eigenpair_with(Some(&neg_growth), &EigenOptions::default(), None)?;
    if pair.sigma >= 0.0 {
        return Ok(Field::zeros(g));
    }

    // eigen-expansion seed: θ ≈ amp·φ with amp = −σ / ∫ weight φ³
    let wphi3 = weight.zip_with(&pair.phi, |w, p| w * p.powi(3)).integrate();
    let amp = (-pair.sigma / wphi3).max(1e-14);
    let seed: Vec<f64> = pair.phi.values().iter().map(|&p| amp * p).collect();
    let row_norm = (0..n)
        .map(|i| t.tridiag().sub[i].abs() + t.tridiag().diag[i].abs() + t.tridiag().sup[i].abs())
        .fold(0.0f64, f64::max);
    let tol = (1e-11f64).max(row_norm * 8.0 * f64::EPSILON);
    let theta = newton_logistic(&t, growth.values(), weight.values(), seed, tol)?;

    // monotone iteration from a constant supersolution; the limit is the
    // maximal nonnegative solution and must agree with Newton's
    let mut cap = 1e-8f64;
    let mut row_lo = f64::INFINITY;
    for i in 0..n {
        if !t.is_dirichlet(i) {
            cap = cap.max((growth[i] - t.tridiag().row_sum(i)) / weight[i]);
            row_lo = row_lo.min(t.tridiag().row_sum(i));
        }
    }
    let cap = (cap.max(linf(&theta))) * 1.25;
    let m = 1.0
        + (-row_lo.min(0.0))
        + growth.values().iter().fold(0.0f64, |mx, &v| mx.max(-v))
        + weight.max_value() * cap;
    let mut shifted = t.tridiag().clone();
    for i in 0..n {
        if !t.is_dirichlet(i) {
            shifted.diag[i] += m;
        }
    }
    let fac = shifted.factor().map_err(|s| {
        Error::Solver(format!(
            "monotone iteration shift failed (pivot {})",
            s.pivot
        ))
    })?;
    let mut w = vec![cap; n];
    let mut iters = 0usize;
    loop {
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                if t.is_dirichlet(i) {
                    0.0
                } else {
                    (growth[i] + m) * w[i] - weight[i] * w[i] * w[i]
                }
            })
            .collect();
        let next = fac.solve(&rhs);
        let mut delta = 0.0f64;
        for i in 0..n {
            delta = delta.max((next[i] - w[i]).abs());
        }
        w = next;
        iters += 1;
        if delta < 1e-9 * linf(&w).max(1.0) {
            break;
        }
        if iters > 100_000 {
            return Err(Error::Iteration {
                iterations: iters,
                residual: delta,
            });
        }
    }
    let mut gap = 0.0f64;
    for i in 0..n {
        gap = gap.max((w[i] - theta[i]).abs());
    }
    if gap > 1e-6 * linf(&theta).max(1.0) {
        return Err(Error::Solver(format!(
            "logistic uniqueness cross-check failed: monotone limit differs from Newton by {gap:e}"
        )));
    }
    Field::from_values(g, theta)
}

/// Resolved system: scaled operators and coefficient slices.
struct Ctx {
    kind: Kind,
    grid: Grid,
    t1: Operator,
    t2: Operator,
    lam: Field,
    mu: Field,
    a: Field,
    b: Field,
    c: Field,
    d: Field,
}

impl Ctx {
    fn new(sys: &LVSystem) -> Result<Ctx> {
        Ok(Ctx {
            kind: sys.kind,
            grid: sys.grid(),
            t1: assemble_scaled(&sys.op1, Some(&sys.d1))?,
            t2: assemble_scaled(&sys.op2, Some(&sys.d2))?,
            lam: sys.lam.clone(),
            mu: sys.mu.clone(),
            a: sys.a.clone(),
            b: sys.b.clone(),
            c: sys.c.clone(),
            d: sys.d.clone(),
        })
    }

    fn n(&self) -> usize {
        self.grid.len()
    }

    /// Interleaved residual (u_0, v_0, u_1, v_1, ...); Dirichlet rows carry
    /// the boundary values themselves. `gamma` scales the interaction.
    fn residual(&self, u: &[f64], v: &[f64], gamma: f64) -> Vec<f64> {
        let n = self.n();
        let s = self.kind.sign();
        let r1 = self.t1.apply(u);
        let r2 = self.t2.apply(v);
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[2 * i] = if self.t1.is_dirichlet(i) {
                r1[i]
            } else {
                r1[i] - self.lam[i] * u[i] + self.a[i] * u[i] * u[i]
                    - s * gamma * self.b[i] * u[i] * v[i]
            };
            out[2 * i + 1] = if self.t2.is_dirichlet(i) {
                r2[i]
            } else {
                r2[i] - self.mu[i] * v[i] + self.d[i] * v[i] * v[i]
                    - s * gamma * self.c[i] * u[i] * v[i]
            };
        }
        out
    }

    /// Interleaved 2n×2n block matrix, bandwidth 2. With `eigen_form` the
    /// off-diagonal coupling is written in the cooperative orientation
    /// (−bu, −cv) regardless of kind, which for the competitive system is the
    /// sign flip of the second eigenfunction component.
    fn coupled_matrix(&self, u: &[f64], v: &[f64], gamma: f64, eigen_form: bool) -> Banded {
        let n = self.n();
        let s = self.kind.sign();
        let mut mat = Banded::zeros(2 * n, 2, 2);
        let t1 = self.t1.tridiag();
        let t2 = self.t2.tridiag();
        for i in 0..n {
            let (ru, rv) = (2 * i, 2 * i + 1);
            if self.t1.is_dirichlet(i) {
                mat.set(ru, ru, 1.0);
            } else {
                mat.set(
                    ru,
                    ru,
                    t1.diag[i] - self.lam[i] + 2.0 * self.a[i] * u[i]
                        - s * gamma * self.b[i] * v[i],
                );
                if i > 0 {
                    mat.set(ru, ru - 2, t1.sub[i]);
                }
                if i + 1 < n {
                    mat.set(ru, ru + 2, t1.sup[i]);
                }
                let coupling = if eigen_form {
                    -gamma * self.b[i] * u[i]
                } else {
                    -s * gamma * self.b[i] * u[i]
                };
                mat.set(ru, rv, coupling);
            }
            if self.t2.is_dirichlet(i) {
                mat.set(rv, rv, 1.0);
            } else {
                mat.set(
                    rv,
                    rv,
                    t2.diag[i] - self.mu[i] + 2.0 * self.d[i] * v[i] - s * gamma * self.c[i] * u[i],
                );
                if i > 0 {
                    mat.set(rv, rv - 2, t2.sub[i]);
                }
                if i + 1 < n {
                    mat.set(rv, rv + 2, t2.sup[i]);
                }
                let coupling = if eigen_form {
                    -gamma * self.c[i] * v[i]
                } else {
                    -s * gamma * self.c[i] * v[i]
                };
                mat.set(rv, ru, coupling);
            }
        }
        mat
    }

    fn active_mask(&self) -> Vec<bool> {
        let n = self.n();
        let mut active = vec![true; 2 * n];
        for i in 0..n {
            active[2 * i] = !self.t1.is_dirichlet(i);
            active[2 * i + 1] = !self.t2.is_dirichlet(i);
        }
        active
    }

    /// Damped Newton on the coupled system at fixed interaction strength.
    fn newton(&self, u0: &[f64], v0: &[f64], gamma: f64, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let mut u = u0.to_vec();
        let mut v = v0.to_vec();
        let mut fnorm = linf(&self.residual(&u, &v, gamma));
        for _ in 0..60 {
            if fnorm <= tol {
                return Ok((u, v));
            }
            let mat = self.coupled_matrix(&u, &v, gamma, false);
            let fac = mat.factor().map_err(|s| {
                Error::Solver(format!("singular coupled Jacobian (pivot {})", s.pivot))
            })?;
            let mut rhs = self.residual(&u, &v, gamma);
            for x in rhs.iter_mut() {
                *x = -*x;
            }
            let step = fac.solve(&rhs);
            let mut tau = 1.0;
            let mut ok = false;
            for _ in 0..25 {
                let mut ut = u.clone();
                let mut vt = v.clone();
                for i in 0..n {
                    ut[i] += tau * step[2 * i];
                    vt[i] += tau * step[2 * i + 1];
                }
                let fnew = linf(&self.residual(&ut, &vt, gamma));
                if fnew < fnorm * (1.0 - 1e-4 * tau) || fnew <= tol {
                    u = ut;
                    v = vt;
                    fnorm = fnew;
                    ok = true;
                    break;
                }
                tau *= 0.5;
            }
            if !ok {
                return Err(Error::Iteration {
                    iterations: 60,
                    residual: fnorm,
                });
            }
        }
        if fnorm <= tol {
            Ok((u, v))
        } else {
            Err(Error::Iteration {
                iterations: 60,
                residual: fnorm,
            })
        }
    }

    fn newton_tol(&self, scale: f64) -> f64 {
        let n = self.n();
        let mut row = 0.0f64;
        for i in 0..n {
            row = row.max(
                self.t1.tridiag().sub[i].abs()
                    + self.t1.tridiag().diag[i].abs()
                    + self.t1.tridiag().sup[i].abs(),
            );
            row = row.max(
                self.t2.tridiag().sub[i].abs()
                    + self.t2.tridiag().diag[i].abs()
                    + self.t2.tridiag().sup[i].abs(),
            );
        }
        (1e-11f64).max(row * 8.0 * f64::EPSILON * scale.max(1.0))
    }
}

#[derive(Clone, Debug)]
pub struct CoexistenceState {
    pub u: Field,
    pub v: Field,
    /// Sup-norm of the coupled residual.
    pub residual: f64,
    /// Principal eigenvalue of the coupled linearization; positive is stable.
    pub linearization_sigma: f64,
}

/// Principal eigenvalue of the coupled linearization at (u, v), through the
/// cooperative form of the eigenproblem.
pub fn linearization_sigma(
    sys: &LVSystem,
    lam_override: Option<f64>,
    mu_override: Option<f64>,
    u: &Field,
    v: &Field,
) -> Result<f64> {
    if u.grid() != sys.grid() || v.grid() != sys.grid() {
        return Err(Error::Config("state does not live on the system grid".to_string()));
    }
    let resolved = sys.with_growth_overrides(lam_override, mu_override);
    let ctx = Ctx::new(&resolved)?;
    let scale = u.sup_norm().max(v.sup_norm()).max(1.0);
    let res = linf(&ctx.residual(u.values(), v.values(), 1.0));
    if res > 1e-5 * scale * (1.0 + ctx.newton_tol(scale) / 1e-11) {
        return Err(Error::Precondition(format!(
            "state does not solve the system: residual {res:e}"
        )));
    }
    coupled_sigma(&ctx, u.values(), v.values()).map(|(s, _)| s)
}

fn coupled_sigma(ctx: &Ctx, u: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = ctx.n();
    let mat = ctx.coupled_matrix(u, v, 1.0, true);
    let active = ctx.active_mask();
    let wts = ctx.grid.trapezoid_weights();
    let mut weights = vec![0.0; 2 * n];
    for i in 0..n {
        weights[2 * i] = wts[i];
        weights[2 * i + 1] = wts[i];
    }
    let mut m0 = 0.0f64;
    let mut matrix_norm = 0.0f64;
    for i in 0..2 * n {
        if active[i] {
            m0 = m0.max(-mat.row_sum(i));
        }
        let (lo, hi) = (i.saturating_sub(2), (i + 2).min(2 * n - 1));
        let mut rs = 0.0;
        for j in lo..=hi {
            if i + 2 >= j && j + 2 >= i {
                rs += mat.get(i, j).abs();
            }
        }
        matrix_norm = matrix_norm.max(rs);
    }
    let m0 = 1.0 + m0;
    let mat_apply = mat.clone();
    let (sigma, vec, _res) = inverse_power(
        &|x| mat_apply.apply(x),
        &|m| {
            let mut shifted = mat.clone();
            for (i, &act) in active.iter().enumerate() {
                if act {
                    shifted.add(i, i, m);
                }
            }
            shifted.factor().ok().map(|f| {
                let sol = move |b: &[f64]| f.solve(b);
                Box::new(sol) as crate::elliptic::Solver
            })
        },
        &active,
        &weights,
        m0,
        matrix_norm,
        &EigenOptions::default(),
        None,
    )
    .map_err(|e| match e {
        Error::Iteration {
            iterations,
            residual,
        } => Error::CooperativeStructure(format!(
            "coupled principal eigenpair did not converge to a positive eigenvector \
             ({iterations} iterations, residual {residual:e})"
        )),
        other => other,
    })?;
    Ok((sigma, vec))
}

/// Eigenfunction lift ε·φ of σ[T − pot] used as a subsolution component when
/// a semitrivial state vanishes; requires σ < 0.
fn sub_lift(t: &Operator, pot: &[f64], self_weight: &Field) -> Result<Option<Vec<f64>>> {
    let pair = t.principal_eigenpair_with(Some(pot), &EigenOptions::default(), None)?;
    if pair.sigma >= 0.0 {
        return Ok(None);
    }
    let denom = self_weight
        .values()
        .iter()
        .zip(pair.phi.values())
        .map(|(&w, &p)| w * p)
        .fold(0.0f64, f64::max);
    let eps = (-pair.sigma / (2.0 * denom)).min(1.0);
    Ok(Some(pair.phi.values().iter().map(|&p| eps * p).collect()))
}

/// Coexistence state under optional constant growth overrides.
///
/// Symbiotic systems use the monotone increasing iteration of cooperative
/// type from the semitrivial pair (lifted off zero along the principal
/// eigenfunction where a component vanishes), bounded by the constant
/// supersolution cone when max(c/d) < min(a/b), then polish with Newton.
/// Competitive systems follow an interaction-strength homotopy from the
/// uncoupled logistic pair.
pub fn coexistence(
    sys: &LVSystem,
    lam_override: Option<f64>,
    mu_override: Option<f64>,
) -> Result<CoexistenceState> {
    let resolved = sys.with_growth_overrides(lam_override, mu_override);
    let ctx = Ctx::new(&resolved)?;
    let n = ctx.n();
    let theta1 = logistic_state(&resolved.d1, &resolved.lam, &resolved.a, &resolved.op1)?;
    let theta2 = logistic_state(&resolved.d2, &resolved.mu, &resolved.d, &resolved.op2)?;

    let (u, v) = match sys.kind {
        Kind::Symbiotic => symbiotic_monotone(&ctx, &theta1, &theta2)?,
        Kind::Competitive => competitive_homotopy(&ctx, &theta1, &theta2)?,
    };

    let residual = linf(&ctx.residual(&u, &v, 1.0));
    let active = ctx.active_mask();
    for i in 0..n {
        if (active[2 * i] && u[i] <= 0.0) || (active[2 * i + 1] && v[i] <= 0.0) {
            return Err(Error::Positivity(format!(
                "computed state is not a coexistence state (component vanishes at node {i})"
            )));
        }
    }
    let (sigma, _) = coupled_sigma(&ctx, &u, &v)?;
    Ok(CoexistenceState {
        u: Field::from_values(ctx.grid, u)?,
        v: Field::from_values(ctx.grid, v)?,
        residual,
        linearization_sigma: sigma,
    })
}

fn symbiotic_monotone(ctx: &Ctx, theta1: &Field, theta2: &Field) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = ctx.n();
    // subsolution start: semitrivial states, lifted along the cross-coupled
    // eigenfunction where one component vanishes
    let mut u: Vec<f64> = theta1.values().to_vec();
    let mut v: Vec<f64> = theta2.values().to_vec();
    if linf(&u) == 0.0 {
        let pot: Vec<f64> = (0..n).map(|i| -ctx.lam[i] - ctx.b[i] * theta2[i]).collect();
        u = sub_lift(&ctx.t1, &pot, &ctx.a)?.ok_or_else(|| {
            Error::Solver(
                "no positive subsolution: the trivial u-state is stable against invasion"
                    .to_string(),
            )
        })?;
    }
    if linf(&v) == 0.0 {
        let pot: Vec<f64> = (0..n).map(|i| -ctx.mu[i] - ctx.c[i] * theta1[i]).collect();
        v = sub_lift(&ctx.t2, &pot, &ctx.d)?.ok_or_else(|| {
            Error::Solver(
                "no positive subsolution: the trivial v-state is stable against invasion"
                    .to_string(),
            )
        })?;
    }

    // constant supersolution box from the nodewise maxima, when the cone is
    // nonempty; otherwise run with the blowup monitor only
    let mut eta1 = 0.0f64;
    let mut eta2 = 0.0f64;
    let mut g1 = 0.0f64;
    let mut g2 = 0.0f64;
    for i in 0..n {
        eta1 = eta1.max(ctx.b[i] / ctx.a[i]);
        eta2 = eta2.max(ctx.c[i] / ctx.d[i]);
        if !ctx.t1.is_dirichlet(i) {
            g1 = g1.max((ctx.lam[i] - ctx.t1.tridiag().row_sum(i)) / ctx.a[i]);
        }
        if !ctx.t2.is_dirichlet(i) {
            g2 = g2.max((ctx.mu[i] - ctx.t2.tridiag().row_sum(i)) / ctx.d[i]);
        }
    }
    let bound = if eta1 * eta2 < 1.0 {
        let ubar = ((g1 + eta1 * g2) / (1.0 - eta1 * eta2)).max(linf(&u)) * 1.5 + 1.0;
        let vbar = ((g2 + eta2 * g1) / (1.0 - eta1 * eta2)).max(linf(&v)) * 1.5 + 1.0;
        Some((ubar, vbar))
    } else {
        None
    };
    let (ucap, vcap) = bound.unwrap_or((BLOWUP_SUP, BLOWUP_SUP));

    // order-preserving shift
    let mut row_lo = f64::INFINITY;
    let mut growth_hi = 0.0f64;
    for i in 0..n {
        if !ctx.t1.is_dirichlet(i) {
            row_lo = row_lo.min(ctx.t1.tridiag().row_sum(i));
            growth_hi = growth_hi.max(ctx.lam[i].abs() + 2.0 * ctx.a[i] * ucap + ctx.b[i] * vcap);
        }
        if !ctx.t2.is_dirichlet(i) {
            row_lo = row_lo.min(ctx.t2.tridiag().row_sum(i));
            growth_hi = growth_hi.max(ctx.mu[i].abs() + 2.0 * ctx.d[i] * vcap + ctx.c[i] * ucap);
        }
    }
    let m = 1.0 + (-row_lo.min(0.0)) + growth_hi;
    let factor = |t: &Operator| -> Result<TridiagFactor> {
        let mut tri = t.tridiag().clone();
        for i in 0..n {
            if !t.is_dirichlet(i) {
                tri.diag[i] += m;
            }
        }
        tri.factor()
            .map_err(|s| Error::Solver(format!("monotone shift failed (pivot {})", s.pivot)))
    };
    let f1 = factor(&ctx.t1)?;
    let f2 = factor(&ctx.t2)?;

    let mut iters = 0usize;
    loop {
        let rhs1: Vec<f64> = (0..n)
            .map(|i| {
                if ctx.t1.is_dirichlet(i) {
                    0.0
                } else {
                    (ctx.lam[i] + m) * u[i] - ctx.a[i] * u[i] * u[i] + ctx.b[i] * u[i] * v[i]
                }
            })
            .collect();
        let rhs2: Vec<f64> = (0..n)
            .map(|i| {
                if ctx.t2.is_dirichlet(i) {
                    0.0
                } else {
                    (ctx.mu[i] + m) * v[i] - ctx.d[i] * v[i] * v[i] + ctx.c[i] * u[i] * v[i]
                }
            })
            .collect();
        let un = f1.solve(&rhs1);
        let vn = f2.solve(&rhs2);
        let mut delta = 0.0f64;
        for i in 0..n {
            delta = delta.max((un[i] - u[i]).abs()).max((vn[i] - v[i]).abs());
        }
        u = un;
        v = vn;
        if linf(&u) > ucap * (1.0 + 1e-9) || linf(&v) > vcap * (1.0 + 1e-9) {
            return Err(Error::BoundViolation(format!(
                "monotone iteration left the a priori box (sup u = {}, sup v = {})",
                linf(&u),
                linf(&v)
            )));
        }
        iters += 1;
        if delta < 1e-10 {
            break;
        }
        if iters > 200_000 {
            return Err(Error::Iteration {
                iterations: iters,
                residual: delta,
            });
        }
    }
    let tol = ctx.newton_tol(linf(&u).max(linf(&v)));
    ctx.newton(&u, &v, 1.0, tol)
}

fn competitive_homotopy(ctx: &Ctx, theta1: &Field, theta2: &Field) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = ctx.n();
    if linf(theta1.values()) == 0.0 || linf(theta2.values()) == 0.0 {
        return Err(Error::Solver(
            "competitive coexistence needs both semitrivial states".to_string(),
        ));
    }
    let mut u = theta1.values().to_vec();
    let mut v = theta2.values().to_vec();
    let (u_scale, v_scale) = (linf(&u), linf(&v));
    let tol = ctx.newton_tol(u_scale.max(v_scale));
    let mut gamma = 0.0f64;
    let mut dg = 0.25f64;
    while gamma < 1.0 {
        let target = (gamma + dg).min(1.0);
        match ctx.newton(&u, &v, target, tol) {
            Ok((un, vn)) => {
                let active = ctx.active_mask();
                let mut min_u = f64::INFINITY;
                let mut min_v = f64::INFINITY;
                for i in 0..n {
                    if active[2 * i] {
                        min_u = min_u.min(un[i]);
                    }
                    if active[2 * i + 1] {
                        min_v = min_v.min(vn[i]);
                    }
                }
                // a component collapsing onto the semitrivial state counts as
                // leaving the cone: past the transcritical crossing the branch
                // continues with a negative component
                if min_u <= 0.0
                    || min_v <= 0.0
                    || linf(&un) < 1e-6 * u_scale
                    || linf(&vn) < 1e-6 * v_scale
                {
                    return Err(Error::Positivity(format!(
                        "homotopy exits the positive cone at gamma = {target} \
                         (min u = {min_u:e}, min v = {min_v:e})"
                    )));
                }
                u = un;
                v = vn;
                gamma = target;
                dg = (dg * 1.5).min(0.25);
            }
            Err(_) => {
                dg *= 0.5;
                if dg < 1e-4 {
                    return Err(Error::Continuation(format!(
                        "interaction homotopy stalled at gamma = {gamma}"
                    )));
                }
            }
        }
    }
    Ok((u, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionLabel {
    A,
    B,
    C,
    D,
    E,
    F,
    BoundaryI,
    BoundaryII,
    BoundaryIII,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::A => "A",
            RegionLabel::B => "B",
            RegionLabel::C => "C",
            RegionLabel::D => "D",
            RegionLabel::E => "E",
            RegionLabel::F => "F",
            RegionLabel::BoundaryI => "boundary_I",
            RegionLabel::BoundaryII => "boundary_II",
            RegionLabel::BoundaryIII => "boundary_III",
        }
    }

    /// Regions in which a unique coexistence state exists.
    pub fn predicts_coexistence(&self, kind: Kind) -> bool {
        match kind {
            Kind::Symbiotic => matches!(
                self,
                RegionLabel::A | RegionLabel::B | RegionLabel::C | RegionLabel::BoundaryIII
            ),
            Kind::Competitive => matches!(self, RegionLabel::A),
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RegionData {
    pub lambda: f64,
    pub mu: f64,
    pub label: RegionLabel,
    /// σ[d1L1 − λ]
    pub sig1: f64,
    /// σ[d2L2 − μ]
    pub sig2: f64,
    /// σ[d1L1 − λ ∓ bθ2] (sign per kind)
    pub sig1_cross: f64,
    /// σ[d2L2 − μ ∓ cθ1]
    pub sig2_cross: f64,
}

/// Classify the point (λ, μ) of the constant-growth plane by the signs of the
/// four semitrivial eigenvalues. |σ| < tol maps to the matching boundary
/// label.
pub fn classify_region(sys: &LVSystem, lam_val: f64, mu_val: f64, tol: f64) -> Result<RegionData> {
    let resolved = sys.with_growth_overrides(Some(lam_val), Some(mu_val));
    let ctx = Ctx::new(&resolved)?;
    let n = ctx.n();
    let eig = |t: &Operator, pot: &[f64]| -> Result<f64> {
        Ok(
            t.principal_eigenpair_with(Some(pot), &EigenOptions::default(), None)?
                .sigma,
        )
    };
    let neg_lam: Vec<f64> = (0..n).map(|i| -ctx.lam[i]).collect();
    let neg_mu: Vec<f64> = (0..n).map(|i| -ctx.mu[i]).collect();
    let sig1 = eig(&ctx.t1, &neg_lam)?;
    let sig2 = eig(&ctx.t2, &neg_mu)?;
    let theta1 = logistic_state(&resolved.d1, &resolved.lam, &resolved.a, &resolved.op1)?;
    let theta2 = logistic_state(&resolved.d2, &resolved.mu, &resolved.d, &resolved.op2)?;
    let s = ctx.kind.sign();
    let pot1x: Vec<f64> = (0..n)
        .map(|i| -ctx.lam[i] - s * ctx.b[i] * theta2[i])
        .collect();
    let pot2x: Vec<f64> = (0..n)
        .map(|i| -ctx.mu[i] - s * ctx.c[i] * theta1[i])
        .collect();
    let sig1_cross = eig(&ctx.t1, &pot1x)?;
    let sig2_cross = eig(&ctx.t2, &pot2x)?;

    let near = |x: f64| x.abs() < tol;
    let label = match sys.kind {
        Kind::Symbiotic => {
            if near(sig1) || near(sig2) {
                let trivial_side = (near(sig1) && sig2 >= -tol) || (near(sig2) && sig1 >= -tol);
                if trivial_side {
                    RegionLabel::BoundaryI
                } else {
                    RegionLabel::BoundaryIII
                }
            } else if sig1 < 0.0 && sig2 < 0.0 {
                RegionLabel::B
            } else if sig1 > 0.0 && sig2 > 0.0 {
                RegionLabel::E
            } else if sig1 < 0.0 {
                // sig2 > 0: u-semitrivial exists, invasion of v decides
                if near(sig2_cross) {
                    RegionLabel::BoundaryII
                } else if sig2_cross < 0.0 {
                    RegionLabel::A
                } else {
                    RegionLabel::F
                }
            } else {
                // sig1 > 0, sig2 < 0
                if near(sig1_cross) {
                    RegionLabel::BoundaryII
                } else if sig1_cross < 0.0 {
                    RegionLabel::C
                } else {
                    RegionLabel::D
                }
            }
        }
        Kind::Competitive => {
            if near(sig1) || near(sig2) {
                let both_trivial = (near(sig1) && sig2 >= -tol) || (near(sig2) && sig1 >= -tol);
                if both_trivial {
                    RegionLabel::BoundaryII
                } else {
                    RegionLabel::BoundaryI
                }
            } else if sig1 > 0.0 && sig2 > 0.0 {
                RegionLabel::D
            } else if sig1 > 0.0 {
                RegionLabel::C
            } else if sig2 > 0.0 {
                RegionLabel::E
            } else if near(sig1_cross) || near(sig2_cross) {
                RegionLabel::BoundaryIII
            } else {
                match (sig2_cross < 0.0, sig1_cross < 0.0) {
                    (true, true) => RegionLabel::A,
                    (true, false) => RegionLabel::B,
                    (false, true) => RegionLabel::F,
                    // simultaneous stability of both semitrivial states is
                    // excluded under the low-competition window; classify as
                    // F so the scan stays total
                    (false, false) => RegionLabel::F,
                }
            }
        }
    };
    Ok(RegionData {
        lambda: lam_val,
        mu: mu_val,
        label,
        sig1,
        sig2,
        sig1_cross,
        sig2_cross,
    })
}

/// classify_region on a uniform (λ, μ) grid, row-major with λ as the outer
/// index. `steps == 1` degenerates to the lower corner.
pub fn region_scan(
    sys: &LVSystem,
    lam_range: (f64, f64),
    mu_range: (f64, f64),
    steps: usize,
    tol: f64,
) -> Result<Vec<RegionData>> {
    if steps == 0 {
        return Err(Error::Config(
            "region scan needs at least one step".to_string(),
        ));
    }
    let coord = |range: (f64, f64), i: usize| {
        if steps == 1 {
            range.0
        } else {
            range.0 + (range.1 - range.0) * i as f64 / (steps - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        for j in 0..steps {
            out.push(classify_region(
                sys,
                coord(lam_range, i),
                coord(mu_range, j),
                tol,
            )?);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvolveOutcome {
    Completed,
    Blowup { t: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct TrajectorySample {
    pub t: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub dist_to_reference: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub final_u: Field,
    pub final_v: Field,
    pub outcome: EvolveOutcome,
}

/// Semi-implicit Euler march: diffusion implicit through (I + dt·d_i L_i)
/// solves, reaction explicit, with automatic substepping to keep
/// dt·‖reaction slope‖∞ < 0.5. Snapshots every `stride` macro steps.
pub fn evolve(
    sys: &LVSystem,
    u0: &Field,
    v0: &Field,
    dt: f64,
    t_end: f64,
    stride: usize,
    reference: Option<(&Field, &Field)>,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::Config("dt and t_end must be positive".to_string()));
    }
    if u0.min_value() < 0.0 || v0.min_value() < 0.0 {
        return Err(Error::Config(
            "initial data must be nonnegative".to_string(),
        ));
    }
    let ctx = Ctx::new(sys)?;
    let n = ctx.n();
    let s = ctx.kind.sign();
    let stride = stride.max(1);

    // implicit factors per substep level, built on demand
    let mut factors: Vec<Option<(TridiagFactor, TridiagFactor)>> = vec![None; 25];
    let mut factor_for = |level: usize| -> Result<(TridiagFactor, TridiagFactor)> {
        if factors[level].is_none() {
            let dtk = dt / (1u64 << level) as f64;
            let build = |t: &Operator| {
                let mut tri = t.tridiag().clone();
                for i in 0..n {
                    if t.is_dirichlet(i) {
                        tri.sub[i] = 0.0;
                        tri.diag[i] = 1.0;
                        tri.sup[i] = 0.0;
                    } else {
                        tri.sub[i] *= dtk;
                        tri.diag[i] = 1.0 + dtk * tri.diag[i];
                        tri.sup[i] *= dtk;
                    }
                }
                tri.factor().map_err(|sg| {
                    Error::Solver(format!("implicit factor failed (pivot {})", sg.pivot))
                })
            };
            factors[level] = Some((build(&ctx.t1)?, build(&ctx.t2)?));
        }
        Ok(factors[level].clone().unwrap())
    };

    let mut u = u0.values().to_vec();
    let mut v = v0.values().to_vec();
    let steps = (t_end / dt).ceil() as usize;
    let mut samples = Vec::new();
    let dist = |u: &[f64], v: &[f64]| -> Option<f64> {
        reference.map(|(ru, rv)| {
            let mut m = 0.0f64;
            for i in 0..n {
                m = m.max((u[i] - ru[i]).abs()).max((v[i] - rv[i]).abs());
            }
            m
        })
    };
    samples.push(TrajectorySample {
        t: 0.0,
        u_max: linf(&u),
        v_max: linf(&v),
        dist_to_reference: dist(&u, &v),
    });
    let mut outcome = EvolveOutcome::Completed;

    'march: for step in 0..steps {
        // reaction Jacobian row sums at the current state choose the substep
        let mut slope = 0.0f64;
        for i in 0..n {
            slope = slope.max(
                (ctx.lam[i] - 2.0 * ctx.a[i] * u[i] + s * ctx.b[i] * v[i]).abs()
                    + (s * ctx.b[i] * u[i]).abs(),
            );
            slope = slope.max(
                (ctx.mu[i] - 2.0 * ctx.d[i] * v[i] + s * ctx.c[i] * u[i]).abs()
                    + (s * ctx.c[i] * v[i]).abs(),
            );
        }
        let mut level = 0usize;
        while dt / (1u64 << level) as f64 * slope >= 0.5 {
            level += 1;
            if level >= 24 {
                outcome = EvolveOutcome::Blowup {
                    t: step as f64 * dt,
                };
                break 'march;
            }
        }
        let (f1, f2) = factor_for(level)?;
        let dtk = dt / (1u64 << level) as f64;
        for _ in 0..(1u64 << level) {
            let rhs1: Vec<f64> = (0..n)
                .map(|i| {
                    if ctx.t1.is_dirichlet(i) {
                        0.0
                    } else {
                        u[i] + dtk
                            * (ctx.lam[i] * u[i] - ctx.a[i] * u[i] * u[i]
                                + s * ctx.b[i] * u[i] * v[i])
                    }
                })
                .collect();
            let rhs2: Vec<f64> = (0..n)
                .map(|i| {
                    if ctx.t2.is_dirichlet(i) {
                        0.0
                    } else {
                        v[i] + dtk
                            * (ctx.mu[i] * v[i] - ctx.d[i] * v[i] * v[i]
                                + s * ctx.c[i] * u[i] * v[i])
                    }
                })
                .collect();
            u = f1.solve(&rhs1);
            v = f2.solve(&rhs2);
        }
        if linf(&u) > BLOWUP_SUP || linf(&v) > BLOWUP_SUP {
            outcome = EvolveOutcome::Blowup {
                t: (step + 1) as f64 * dt,
            };
            samples.push(TrajectorySample {
                t: (step + 1) as f64 * dt,
                u_max: linf(&u),
                v_max: linf(&v),
                dist_to_reference: dist(&u, &v),
            });
            break;
        }
        if (step + 1) % stride == 0 || step + 1 == steps {
            samples.push(TrajectorySample {
                t: (step + 1) as f64 * dt,
                u_max: linf(&u),
                v_max: linf(&v),
                dist_to_reference: dist(&u, &v),
            });
        }
    }

    Ok(Trajectory {
        samples,
        final_u: Field::from_values(ctx.grid, u)?,
        final_v: Field::from_values(ctx.grid, v)?,
        outcome,
    })
}

/// Deterministic ensemble of positive initial conditions, one SplitMix64
/// stream for the whole batch.
pub fn random_positive_fields(
    grid: Grid,
    count: usize,
    amplitude: f64,
    seed: u64,
) -> Vec<(Field, Field)> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let u: Vec<f64> = (0..grid.len())
            .map(|_| rng.next_in(0.05, amplitude))
            .collect();
        let v: Vec<f64> = (0..grid.len())
            .map(|_| rng.next_in(0.05, amplitude))
            .collect();
        out.push((
            Field::from_values(grid, u).expect("grid sized"),
            Field::from_values(grid, v).expect("grid sized"),
        ));
    }
    out
}
