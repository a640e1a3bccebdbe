//! Discretization of L = -(A u')' + C u on a uniform mesh with per-endpoint
//! Dirichlet or Robin conditions, shifted banded solves, and principal
//! eigenpairs by shifted inverse iteration.
//!
//! Interior rows use the divergence-form stencil with arithmetic midpoint
//! averages of A. Robin rows eliminate a second-order ghost node, so the
//! whole scheme stays O(h^2). Dirichlet rows are identity rows; their nodes
//! are excluded from shifts, potentials, and eigen normalization.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{Singular, Tridiag, TridiagFactor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet,
    /// ±A u' + βu = 0 with the outward normal sign; β may take any sign.
    Robin {
        beta: f64,
    },
}

impl BoundaryCondition {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet)
    }
}

#[derive(Clone, Debug)]
pub struct EllipticProblem {
    grid: Grid,
    diffusion: Field,
    potential: Field,
    bc_left: BoundaryCondition,
    bc_right: BoundaryCondition,
}

impl EllipticProblem {
    /// Positivity of A is checked at assembly time, not here, so the same
    /// type can carry the sign-changing A allowed by the identity checker.
    pub fn new(
        diffusion: Field,
        potential: Field,
        bc_left: BoundaryCondition,
        bc_right: BoundaryCondition,
    ) -> Result<EllipticProblem> {
        if diffusion.grid() != potential.grid() {
            return Err(Error::Config(
                "diffusion and potential must share a grid".to_string(),
            ));
        }
        Ok(EllipticProblem {
            grid: diffusion.grid(),
            diffusion,
            potential,
            bc_left,
            bc_right,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn diffusion(&self) -> &Field {
        &self.diffusion
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn bc_left(&self) -> BoundaryCondition {
        self.bc_left
    }

    pub fn bc_right(&self) -> BoundaryCondition {
        self.bc_right
    }

    /// Same operator with the potential replaced by C + V.
    pub fn with_added_potential(&self, v: &Field) -> EllipticProblem {
        EllipticProblem {
            grid: self.grid,
            diffusion: self.diffusion.clone(),
            potential: self.potential.zip_with(v, |c, vv| c + vv),
            bc_left: self.bc_left,
            bc_right: self.bc_right,
        }
    }
}

/// Assembled tridiagonal form of (a scaled) L with boundary rows folded in.
#[derive(Clone, Debug)]
pub struct Operator {
    grid: Grid,
    tri: Tridiag,
    dirichlet: Vec<bool>,
}

pub fn assemble(p: &EllipticProblem) -> Result<Operator> {
    assemble_scaled(p, None)
}

/// Assemble d(x)·L: every non-Dirichlet row is multiplied by the nodal value
/// of `scale`. Dirichlet rows stay identity rows.
pub fn assemble_scaled(p: &EllipticProblem, scale: Option<&Field>) -> Result<Operator> {
    let g = p.grid;
    let n = g.len();
    let a = p.diffusion.values();
    let c = p.potential.values();
    let (min_a, argmin) = a
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0usize), |(m, am), (i, &v)| {
            if v < m {
                (v, i)
            } else {
                (m, am)
            }
        });
    if min_a <= 0.0 {
        return Err(Error::Ellipticity {
            min_a,
            node: argmin,
        });
    }
    if let Some(s) = scale {
        if s.grid() != g {
            return Err(Error::Config("scale field grid mismatch".to_string()));
        }
    }
    let h = g.h();
    let h2 = h * h;
    let mut tri = Tridiag::zeros(n);
    let mut dirichlet = vec![false; n];

    for i in 1..n - 1 {
        let am = 0.5 * (a[i - 1] + a[i]);
        let ap = 0.5 * (a[i] + a[i + 1]);
        tri.sub[i] = -am / h2;
        tri.diag[i] = (am + ap) / h2 + c[i];
        tri.sup[i] = -ap / h2;
    }

    match p.bc_left {
        BoundaryCondition::Dirichlet => {
            tri.diag[0] = 1.0;
            dirichlet[0] = true;
        }
        BoundaryCondition::Robin { beta } => {
            let ap = 0.5 * (a[0] + a[1]);
            tri.diag[0] = (ap + a[0]) / h2 + 2.0 * beta / h + c[0];
            tri.sup[0] = -(ap + a[0]) / h2;
        }
    }
    match p.bc_right {
        BoundaryCondition::Dirichlet => {
            tri.diag[n - 1] = 1.0;
            dirichlet[n - 1] = true;
        }
        BoundaryCondition::Robin { beta } => {
            let am = 0.5 * (a[n - 2] + a[n - 1]);
            tri.diag[n - 1] = (am + a[n - 1]) / h2 + 2.0 * beta / h + c[n - 1];
            tri.sub[n - 1] = -(am + a[n - 1]) / h2;
        }
    }

    if let Some(s) = scale {
        for i in 0..n {
            if !dirichlet[i] {
                let d = s.values()[i];
                tri.sub[i] *= d;
                tri.diag[i] *= d;
                tri.sup[i] *= d;
            }
        }
    }

    Ok(Operator {
        grid: g,
        tri,
        dirichlet,
    })
}

impl Operator {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.tri.n()
    }

    pub fn tridiag(&self) -> &Tridiag {
        &self.tri
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, i: usize) -> bool {
        self.dirichlet[i]
    }

    /// Apply the operator, boundary rows included (Dirichlet rows give u_i).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.tri.apply(u)
    }

    /// New operator with `v` added to the diagonal of every non-Dirichlet row.
    pub fn with_potential(&self, v: &[f64]) -> Operator {
        let mut out = self.clone();
        for i in 0..self.n() {
            if !self.dirichlet[i] {
                out.tri.diag[i] += v[i];
            }
        }
        out
    }

    fn shifted_factor(&self, m: f64) -> std::result::Result<TridiagFactor, Singular> {
        let mut tri = self.tri.clone();
        for i in 0..self.n() {
            if !self.dirichlet[i] {
                tri.diag[i] += m;
            }
        }
        tri.factor()
    }

    /// Smallest shift that makes the operator diagonally dominant; the rows
    /// have non-positive off-diagonal entries, so row sums bound the spectrum
    /// from below.
    fn default_shift(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for i in 0..self.n() {
            if !self.dirichlet[i] {
                lo = lo.min(self.tri.row_sum(i));
            }
        }
        if !lo.is_finite() {
            lo = 0.0;
        }
        1.0 + (-lo).max(0.0)
    }

    /// Direct solve of (L + m) u = rhs. Dirichlet nodes are forced to zero.
    pub fn solve_shifted(&self, m: f64, rhs: &Field) -> Result<Field> {
        if rhs.grid() != self.grid {
            return Err(Error::Config("rhs grid mismatch".to_string()));
        }
        let mut b = rhs.values().to_vec();
        for i in 0..self.n() {
            if self.dirichlet[i] {
                b[i] = 0.0;
            }
        }
        match self.shifted_factor(m) {
            Ok(f) => {
                let x = f.solve(&b);
                Field::from_values(self.grid, x)
            }
            Err(s) => {
                let est = self
                    .principal_eigenpair(&EigenOptions::default())
                    .map(|e| e.sigma)
                    .unwrap_or(f64::NAN);
                Err(Error::Shift {
                    pivot: s.pivot,
                    sigma_estimate: est,
                })
            }
        }
    }

    /// Principal eigenpair of the operator plus an optional diagonal
    /// potential; `start` warm-starts the iteration.
    pub fn principal_eigenpair_with(
        &self,
        potential: Option<&[f64]>,
        opts: &EigenOptions,
        start: Option<&[f64]>,
    ) -> Result<EigenPair> {
        let op = match potential {
            Some(v) => self.with_potential(v),
            None => self.clone(),
        };
        let weights = self.grid.trapezoid_weights();
        let active: Vec<bool> = op.dirichlet.iter().map(|d| !d).collect();
        let tri = op.tri.clone();
        let mut matrix_norm = 0.0f64;
        for i in 0..tri.n() {
            matrix_norm = matrix_norm.max(tri.sub[i].abs() + tri.diag[i].abs() + tri.sup[i].abs());
        }
        let (sigma, vecv, residual) = inverse_power(
            &|x| tri.apply(x),
            &|m| {
                let mut t = tri.clone();
                for i in 0..t.n() {
                    if active[i] {
                        t.diag[i] += m;
                    }
                }
                t.factor().ok().map(|f| {
                    let sol = move |b: &[f64]| f.solve(b);
                    Box::new(sol) as Solver
                })
            },
            &active,
            &weights,
            op.default_shift(),
            matrix_norm,
            opts,
            start,
        )?;
        Ok(EigenPair {
            sigma,
            phi: Field::from_values(self.grid, vecv)?,
            residual,
        })
    }

    pub fn principal_eigenpair(&self, opts: &EigenOptions) -> Result<EigenPair> {
        self.principal_eigenpair_with(None, opts, None)
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    /// Principal eigenvalue.
    pub sigma: f64,
    /// Positive eigenfunction, normalized so ∫ φ² = 1.
    pub phi: Field,
    /// ‖Lφ − σφ‖∞ / ‖φ‖∞.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Stop when the eigenvalue increment falls below this.
    pub tol_sigma: f64,
    /// Required final residual.
    pub tol_residual: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol_sigma: 1e-10,
            tol_residual: 1e-8,
            max_iter: 800,
        }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigenOptions {
            tol_sigma: tol,
            ..EigenOptions::default()
        }
    }
}

/// Shift-solver handle produced per attempted shift.
pub(crate) type Solver = Box<dyn Fn(&[f64]) -> Vec<f64>>;

/// Shifted inverse power iteration shared by the scalar and the coupled
/// (block) eigenproblems. `factor(m)` returns a solver for (T + m) restricted
/// to active rows, or None when the shifted matrix is numerically singular.
/// The start vector defaults to the indicator of the active set, so runs are
/// deterministic. Escalates the shift when the factorization fails or the
/// iteration converges to a sign-changing (non-principal) vector.
/// `matrix_norm` sets the achievable residual floor: applying rows of size
/// ‖T‖ cannot leave a residual below a few ulps of it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn inverse_power(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    factor: &dyn Fn(f64) -> Option<Solver>,
    active: &[bool],
    weights: &[f64],
    m0: f64,
    matrix_norm: f64,
    opts: &EigenOptions,
    start: Option<&[f64]>,
) -> Result<(f64, Vec<f64>, f64)> {
    let n = active.len();
    let norm_w = |v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            s += weights[i] * v[i] * v[i];
        }
        s.max(0.0).sqrt()
    };
    let inner_w = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            s += weights[i] * a[i] * b[i];
        }
        s
    };

    let tol_residual = opts.tol_residual.max(matrix_norm * 8.0 * f64::EPSILON);
    let mut m = m0;
    let mut last_residual = f64::NAN;
    for attempt in 0..8 {
        let solve = match factor(m) {
            Some(s) => s,
            None => {
                m = 2.0 * m + 2.0;
                continue;
            }
        };
        let mut v: Vec<f64> = match start {
            Some(s) if s.len() == n => s.to_vec(),
            _ => active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect(),
        };
        for i in 0..n {
            if !active[i] {
                v[i] = 0.0;
            }
        }
        let nv = norm_w(&v);
        if nv == 0.0 {
            return Err(Error::Solver("eigen start vector vanished".to_string()));
        }
        for x in v.iter_mut() {
            *x /= nv;
        }

        let mut sigma = f64::NAN;
        let max_iter = opts.max_iter * (attempt + 1);
        let mut converged = false;
        for it in 0..max_iter {
            let mut w = solve(&v);
            for i in 0..n {
                if !active[i] {
                    w[i] = 0.0;
                }
            }
            let theta = inner_w(&v, &w);
            let nw = norm_w(&w);
            if !nw.is_finite() || nw == 0.0 || theta == 0.0 {
                break; // escalate the shift
            }
            let sigma_new = 1.0 / theta - m;
            for x in w.iter_mut() {
                *x /= nw;
            }
            let delta = (sigma_new - sigma).abs();
            v = w;
            sigma = sigma_new;
            if delta <= opts.tol_sigma * sigma.abs().max(1.0) && it >= 1 {
                let lv = apply(&v);
                let mut r = 0.0f64;
                let sup = crate::util::linf(&v).max(f64::MIN_POSITIVE);
                for i in 0..n {
                    r = r.max((lv[i] - sigma * v[i]).abs());
                }
                last_residual = r / sup;
                if last_residual <= tol_residual {
                    converged = true;
                    break;
                }
            }
        }
        if converged {
            // Fix the sign, then demand strict positivity on the active set.
            let mean: f64 = (0..n).filter(|&i| active[i]).map(|i| v[i]).sum();
            if mean < 0.0 {
                for x in v.iter_mut() {
                    *x = -*x;
                }
            }
            let sup = crate::util::linf(&v);
            let min_active = (0..n)
                .filter(|&i| active[i])
                .map(|i| v[i])
                .fold(f64::INFINITY, f64::min);
            if min_active > 1e-13 * sup {
                return Ok((sigma, v, last_residual));
            }
            // Sign change: we converged to a non-principal eigenvalue, which
            // means the shift straddled the principal one. Escalate.
        }
        m = 2.0 * m + 2.0;
    }
    Err(Error::Iteration {
        iterations: opts.max_iter,
        residual: last_residual,
    })
}

/// Principal eigenpair of the problem operator. Deterministic: the iteration
/// always starts from the all-ones vector projected onto the boundary
/// conditions.
pub fn principal_eigenpair(p: &EllipticProblem, tol: f64) -> Result<EigenPair> {
    let op = assemble(p)?;
    op.principal_eigenpair(&EigenOptions::with_tol(tol))
}

/// σ[L + V, B, Ω]: identical to the eigenpair of the problem with C := C + V.
pub fn principal_eigenvalue_with_potential(
    p: &EllipticProblem,
    v: &Field,
    tol: f64,
) -> Result<f64> {
    let op = assemble(p)?;
    Ok(op
        .principal_eigenpair_with(Some(v.values()), &EigenOptions::with_tol(tol), None)?
        .sigma)
}
