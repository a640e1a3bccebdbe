//! Run configuration: one JSON document per run, unknown keys rejected,
//! every expression parsed before any computation starts.

use piconelab::elliptic::{BoundaryCondition, EllipticProblem};
use piconelab::expr::{self, Expr};
use piconelab::grid::{Field, Grid};
use piconelab::lotka_volterra::{Kind, LVSystem};
use piconelab::scalar_branch::{Nonlinearity, ScalarProblem};
use piconelab::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainCfg,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_prefix: Option<String>,
    #[serde(default)]
    pub operator: Option<OperatorCfg>,
    #[serde(default)]
    pub scalar: Option<ScalarCfg>,
    #[serde(default)]
    pub picone: Option<PiconeCfg>,
    #[serde(default)]
    pub direction: Option<DirectionCfg>,
    #[serde(default)]
    pub branch: Option<BranchCfg>,
    #[serde(default)]
    pub system: Option<SystemCfg>,
    #[serde(default)]
    pub lv_solve: Option<LvSolveCfg>,
    #[serde(default)]
    pub lv_classify: Option<LvClassifyCfg>,
    #[serde(default)]
    pub evolve: Option<EvolveCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainCfg {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_eigen_tol")]
    pub eigen: f64,
    #[serde(default = "default_newton_tol")]
    pub newton: f64,
    #[serde(default = "default_boundary_tol")]
    pub boundary: f64,
}

fn default_eigen_tol() -> f64 {
    1e-10
}
fn default_newton_tol() -> f64 {
    1e-10
}
fn default_boundary_tol() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen: default_eigen_tol(),
            newton: default_newton_tol(),
            boundary: default_boundary_tol(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorCfg {
    pub diffusion: String,
    pub potential: String,
    pub bc_left: BcCfg,
    pub bc_right: BcCfg,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BcCfg {
    Dirichlet,
    Robin { beta: f64 },
}

impl BcCfg {
    fn to_core(&self) -> BoundaryCondition {
        match self {
            BcCfg::Dirichlet => BoundaryCondition::Dirichlet,
            BcCfg::Robin { beta } => BoundaryCondition::Robin { beta: *beta },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarCfg {
    pub weight: String,
    pub nonlinearity: NonlinearityCfg,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinearityCfg {
    Power { p: f64 },
    Ulogu,
    Composite { nu: f64, p: f64, q: f64 },
}

impl NonlinearityCfg {
    pub fn to_core(&self) -> Nonlinearity {
        match *self {
            NonlinearityCfg::Power { p } => Nonlinearity::PowerLaw { p },
            NonlinearityCfg::Ulogu => Nonlinearity::ULogU,
            NonlinearityCfg::Composite { nu, p, q } => Nonlinearity::Composite { nu, p, q },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiconeCfg {
    pub u: String,
    pub v: String,
    pub g: String,
    pub g_prime: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionCfg {
    /// Exponent for the limit f(s)/s^p; omitted means the natural exponent.
    #[serde(default)]
    pub p: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchCfg {
    pub eps: f64,
    pub step: f64,
    pub max_points: usize,
    pub window: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemCfg {
    pub kind: KindCfg,
    pub d1: String,
    pub d2: String,
    pub lambda: String,
    pub mu: String,
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub op1: OperatorCfg,
    pub op2: OperatorCfg,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
pub enum KindCfg {
    Symbiotic,
    Competitive,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvSolveCfg {
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvClassifyCfg {
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub lambda_range: Option<[f64; 2]>,
    #[serde(default)]
    pub mu_range: Option<[f64; 2]>,
    #[serde(default)]
    pub steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveCfg {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    pub initial: InitialCfg,
    #[serde(default)]
    pub reference: Option<ReferenceCfg>,
}

fn default_dt() -> f64 {
    0.01
}
fn default_stride() -> usize {
    100
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCfg {
    Expressions {
        u: String,
        v: String,
    },
    RandomEnsemble {
        count: usize,
        amplitude: f64,
        #[serde(default = "default_seed")]
        seed: u64,
    },
}

fn default_seed() -> u64 {
    0xC0FFEE
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceCfg {
    Coexistence,
    Expressions { u: String, v: String },
    None,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Parse every expression present anywhere in the document and check the
/// scalar preconditions, before any computation starts.
fn validate(cfg: &RunConfig) -> Result<()> {
    Grid::new(cfg.domain.x_lo, cfg.domain.x_hi, cfg.domain.n)?;
    for (name, tol) in [
        ("tolerances.eigen", cfg.tolerances.eigen),
        ("tolerances.newton", cfg.tolerances.newton),
        ("tolerances.boundary", cfg.tolerances.boundary),
    ] {
        if !(tol > 0.0) {
            return Err(Error::Config(format!("{name} must be positive, got {tol}")));
        }
    }
    let check = |key: &str, src: &str| -> Result<()> {
        expr::parse(src).map_err(|e| Error::Config(format!("in key {key:?}: {e}")))?;
        Ok(())
    };
    let check_op = |prefix: &str, op: &OperatorCfg| -> Result<()> {
        check(&format!("{prefix}.diffusion"), &op.diffusion)?;
        check(&format!("{prefix}.potential"), &op.potential)
    };
    if let Some(op) = &cfg.operator {
        check_op("operator", op)?;
    }
    if let Some(s) = &cfg.scalar {
        check("scalar.weight", &s.weight)?;
        if let NonlinearityCfg::Power { p } = s.nonlinearity {
            if !(p > 0.0) {
                return Err(Error::Config(format!("power law needs p > 0, got {p}")));
            }
        }
    }
    if let Some(p) = &cfg.picone {
        check("picone.u", &p.u)?;
        check("picone.v", &p.v)?;
        check("picone.g", &p.g)?;
        check("picone.g_prime", &p.g_prime)?;
    }
    if let Some(b) = &cfg.branch {
        if !(b.eps > 0.0) || !(b.step > 0.0) || b.max_points == 0 {
            return Err(Error::Config(
                "branch.eps, branch.step must be positive and branch.max_points nonzero"
                    .to_string(),
            ));
        }
        if !(b.window[0] < b.window[1]) {
            return Err(Error::Config(
                "branch.window must be a nonempty interval".to_string(),
            ));
        }
    }
    if let Some(s) = &cfg.system {
        for (key, src) in [
            ("system.d1", &s.d1),
            ("system.d2", &s.d2),
            ("system.lambda", &s.lambda),
            ("system.mu", &s.mu),
            ("system.a", &s.a),
            ("system.b", &s.b),
            ("system.c", &s.c),
            ("system.d", &s.d),
        ] {
            check(key, src)?;
        }
        check_op("system.op1", &s.op1)?;
        check_op("system.op2", &s.op2)?;
    }
    if let Some(c) = &cfg.lv_classify {
        let point = c.lambda.is_some() && c.mu.is_some();
        let scan = c.lambda_range.is_some() && c.mu_range.is_some() && c.steps.is_some();
        if !point && !scan {
            return Err(Error::Config(
                "lv_classify needs either {lambda, mu} or {lambda_range, mu_range, steps}"
                    .to_string(),
            ));
        }
        if let Some(steps) = c.steps {
            if steps == 0 {
                return Err(Error::Config(
                    "lv_classify.steps must be nonzero".to_string(),
                ));
            }
        }
    }
    if let Some(e) = &cfg.evolve {
        if !(e.dt > 0.0) || !(e.t_end > 0.0) {
            return Err(Error::Config(
                "evolve.dt and evolve.t_end must be positive".to_string(),
            ));
        }
        match &e.initial {
            InitialCfg::Expressions { u, v } => {
                check("evolve.initial.u", u)?;
                check("evolve.initial.v", v)?;
            }
            InitialCfg::RandomEnsemble {
                count, amplitude, ..
            } => {
                if *count == 0 || !(*amplitude > 0.0) {
                    return Err(Error::Config(
                        "evolve.initial ensemble needs count > 0 and amplitude > 0".to_string(),
                    ));
                }
            }
        }
        if let Some(ReferenceCfg::Expressions { u, v }) = &e.reference {
            check("evolve.reference.u", u)?;
            check("evolve.reference.v", v)?;
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain.x_lo, self.domain.x_hi, self.domain.n)
    }

    pub fn sample(&self, src: &str) -> Result<Field> {
        let e: Expr = expr::parse(src)?;
        Field::sample(self.grid()?, &e)
    }

    pub fn elliptic_problem(&self) -> Result<EllipticProblem> {
        let op = self.operator.as_ref().ok_or_else(|| {
            Error::Config("this subcommand needs an \"operator\" block".to_string())
        })?;
        build_problem(self.grid()?, op)
    }

    pub fn scalar_problem(&self) -> Result<ScalarProblem> {
        let s = self
            .scalar
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand needs a \"scalar\" block".to_string()))?;
        let weight = self.sample(&s.weight)?;
        ScalarProblem::new(self.elliptic_problem()?, weight, s.nonlinearity.to_core())
    }

    pub fn lv_system(&self) -> Result<LVSystem> {
        let s = self
            .system
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand needs a \"system\" block".to_string()))?;
        let g = self.grid()?;
        let kind = match s.kind {
            KindCfg::Symbiotic => Kind::Symbiotic,
            KindCfg::Competitive => Kind::Competitive,
        };
        LVSystem::new(
            kind,
            self.sample(&s.d1)?,
            self.sample(&s.d2)?,
            self.sample(&s.lambda)?,
            self.sample(&s.mu)?,
            self.sample(&s.a)?,
            self.sample(&s.b)?,
            self.sample(&s.c)?,
            self.sample(&s.d)?,
            build_problem(g, &s.op1)?,
            build_problem(g, &s.op2)?,
        )
    }
}

fn build_problem(g: Grid, op: &OperatorCfg) -> Result<EllipticProblem> {
    let a = Field::sample(g, &expr::parse(&op.diffusion)?)?;
    let c = Field::sample(g, &expr::parse(&op.potential)?)?;
    EllipticProblem::new(a, c, op.bc_left.to_core(), op.bc_right.to_core())
}
