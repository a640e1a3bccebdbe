//! Subcommand execution and deterministic file emission. Every number goes
//! out through fmt17, CSV uses Unix newlines, and reruns of the same config
//! produce byte-identical files.

use crate::config::{InitialCfg, ReferenceCfg, RunConfig};
use piconelab::grid::Field;
use piconelab::lotka_volterra::{
    self as lv, classify_region, coexistence, evolve, region_scan, stability_window,
};

use piconelab::picone::picone_check;
use piconelab::scalar_branch::{
    self as sb, bifurcation_direction, continue_branch, lambda_star_bound,
    nonexistence_certificate, seed_branch, verify_stable_branch, Certificate, Nonlinearity,
};
use piconelab::util::fmt17;
use piconelab::{elliptic, expr, Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Successful run outcome: summary line plus whether a verification report
/// flagged violations (exit code 4).
pub struct RunOutput {
    pub summary: String,
    pub report_failure: bool,
}

pub fn run(subcommand: &str, cfg: &RunConfig, out_override: Option<&str>) -> Result<RunOutput> {
    let prefix = out_override
        .map(str::to_string)
        .or_else(|| cfg.output_prefix.clone())
        .unwrap_or_else(|| format!("out/{subcommand}"));
    match subcommand {
        "eigen" => run_eigen(cfg, &prefix),
        "picone" => run_picone(cfg, &prefix),
        "direction" => run_direction(cfg, &prefix),
        "branch" => run_branch(cfg, &prefix),
        "window" => run_window(cfg, &prefix),
        "lv-solve" => run_lv_solve(cfg, &prefix),
        "lv-classify" => run_lv_classify(cfg, &prefix),
        "evolve" => run_evolve(cfg, &prefix),
        other => Err(Error::Config(format!("unknown subcommand {other:?}"))),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::Solver(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| Error::Solver(format!("cannot write {}: {e}", path.display())))
}

fn path_with(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

fn ok(summary: String) -> Result<RunOutput> {
    Ok(RunOutput {
        summary,
        report_failure: false,
    })
}

fn run_eigen(cfg: &RunConfig, prefix: &str) -> Result<RunOutput> {
    let p = cfg.elliptic_problem()?;
    let pair = elliptic::principal_eigenpair(&p, cfg.tolerances.eigen)?;
    let json = format!(
        "{{\n  \"sigma\": {},\n  \"residual\": {}\n}}\n",
        fmt17(pair.sigma),
        fmt17(pair.residual)
    );
    write_file(&path_with(prefix, "eigen.json"), &json)?;
    write_file(&path_with(prefix, "eigenfunction.csv"), &pair.phi.to_csv())?;
    ok(format!("sigma0 = {}", fmt17(pair.sigma)))
}

fn run_picone(cfg: &RunConfig, prefix: &str) -> Result<RunOutput> {
    let p = cfg.elliptic_problem()?;
    let pc = cfg
        .picone
        .as_ref()
        .ok_or_else(|| Error::Config("picone needs a \"picone\" block".to_string()))?;
    let u = cfg.sample(&pc.u)?;
    let v = cfg.sample(&pc.v)?;
    let g = expr::parse(&pc.g)?;
    let gp = expr::parse(&pc.g_prime)?;
    let chk = picone_check(&p, &u, &v, &g, &gp)?;
    if chk.gprime_gap > 1e-3 {
        eprintln!(
            "warning: g_prime disagrees with a finite difference of g (relative gap {})",
            fmt17(chk.gprime_gap)
        );
    }
    let r = chk.report;
    let json = format!(
        "{{\n  \"lhs\": {},\n  \"volume_term\": {},\n  \"boundary_term\": {},\n  \"residual\": {}\n}}\n",
        fmt17(r.lhs),
        fmt17(r.volume_term),
        fmt17(r.boundary_term),
        fmt17(r.residual)
    );
    write_file(&path_with(prefix, "picone.json"), &json)?;
    ok(format!("picone residual = {}", fmt17(r.residual)))
}

fn run_direction(cfg: &RunConfig, prefix: &str) -> Result<RunOutput> {
    let sp = cfg.scalar_problem()?;
    let dcfg = cfg
        .direction
        .as_ref()
        .ok_or_else(|| Error::Config("direction needs a \"direction\" block".to_string()))?;
    let (p, _) = match dcfg.p {
        Some(p) => (p, sp.f.limit_coefficient(p)?),
        None => sp.f.natural_exponent()?,
    };
    let dp = bifurcation_direction(&sp, p)?;
    // the same weight integral against the sup-normalized eigenfunction, the
    // convention in which tabulated values are usually quoted
    let eig = elliptic::principal_eigenpair(&sp.op, cfg.tolerances.eigen)?;
    let amp = eig.phi.sup_norm();
    let sup_integral = sp
        .weight
        .zip_with(&eig.phi, |a, phi| a * (phi / amp).powf(p + 1.0))
        .integrate();
    let direction = if dp > 0.0 {
        "supercritical"
    } else {
        "subcritical"
    };
    let certificate = match sp.f {
        Nonlinearity::PowerLaw { p } if p > 1.0 => match nonexistence_certificate(&sp)? {
            Certificate::Certified { .. } => "certified",
            Certificate::NotApplicable { .. } => "not_applicable",
        },
        _ => "not_applicable",
    };
    let json = format!(
        "{{\n  \"p\": {},\n  \"d_p\": {},\n  \"weight_integral_sup_normalized\": {},\n  \
         \"direction\": \"{}\",\n  \"certificate\": \"{}\"\n}}\n",
        fmt17(p),
        fmt17(dp),
        fmt17(sup_integral),
        direction,
        certificate
    );
    write_file(&path_with(prefix, "direction.json"), &json)?;
    ok(format!(
        "D_{p} = {} ({direction}; weight integral {} sup-normalized; certificate {certificate})",
        fmt17(dp),
        fmt17(sup_integral)
    ))
}

fn run_branch(cfg: &RunConfig, prefix: &str) -> Result<RunOutput> {
    let sp = cfg.scalar_problem()?;
    let bcfg = cfg
        .branch
        .as_ref()
        .ok_or_else(|| Error::Config("branch needs a \"branch\" block".to_string()))?;
    let seed = seed_branch(&sp, bcfg.eps)?;
    let branch = continue_branch(
        &sp,
        &seed,
        bcfg.step,
        bcfg.max_points,
        (bcfg.window[0], bcfg.window[1]),
    )?;

    let mut csv = String::from("s,lambda,u_max,u_l2,stability_sigma,event\n");
    for (i, pt) in branch.points.iter().enumerate() {
        let mut event = "none";
        for e in &branch.events {
            match e {
                sb::BranchEvent::Fold { index } if *index == i => {
                    event = "fold";
                }
                sb::BranchEvent::StabilityChange { index } if *index == i && event == "none" => {
                    event = "stab_change";
                }
                _ => {}
            }
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt17(pt.s),
            fmt17(pt.lambda),
            fmt17(pt.u.sup_norm()),
            fmt17(pt.u.l2_norm()),
            fmt17(pt.stability_sigma),
            event
        );
    }
    write_file(&path_with(prefix, "branch.csv"), &csv)?;

    let termination = match branch.termination {
        sb::Termination::WindowEdge => "window_edge",
        sb::Termination::Blowup => "blowup",
        sb::Termination::MaxPoints => "max_points",
        sb::Termination::Stalled => "stalled",
    };
    let verify = match sp.f {
        Nonlinearity::PowerLaw { p } if p >= 2.0 => Some(verify_stable_branch(&branch)),
        _ => None,
    };
    let star = if sp.weight.min_value() < 0.0 {
        Some(lambda_star_bound(&sp)?)
    } else {
        None
    };
    let mut json = String::from("{\n");
    let _ = writeln!(json, "  \"sigma0\": {},", fmt17(branch.sigma0));
    let _ = writeln!(json, "  \"points\": {},", branch.points.len());
    let _ = writeln!(json, "  \"termination\": \"{termination}\",");
    let _ = writeln!(
        json,
        "  \"folds\": {},",
        branch.points.iter().filter(|p| p.is_fold).count()
    );
    match star {
        Some(s) => {
            let _ = writeln!(json, "  \"lambda_star_bound\": {},", fmt17(s));
        }
        None => {
            let _ = writeln!(json, "  \"lambda_star_bound\": null,");
        }
    }
    match &verify {
        Some(rep) => {
            let _ = writeln!(
                json,
                "  \"verify\": {{\n    \"stable_above_sigma0\": {},\n    \"stable_monotone\": {},\n    \
                 \"stable_single_valued\": {},\n    \"terminal_state_admissible\": {},\n    \"pass\": {}\n  }}",
                rep.stable_above_sigma0,
                rep.stable_monotone,
                rep.stable_single_valued,
                rep.terminal_state_admissible,
                rep.pass()
            );
        }
        None => {
            let _ = writeln!(json, "  \"verify\": null");
        }
    }
    json.push_str("}\n");
    write_file(&path_with(prefix, "branch.json"), &json)?;

    let report_failure = verify.as_ref().is_some_and(|r| !r.pass());
    let summary = format!(
        "branch: {} points, termination {termination}, sigma0 = {}{}",
        branch.points.len(),
        fmt17(branch.sigma0),
        if report_failure {
            ", verify FAILED"
        } else {
            ""
        }
    );
    Ok(RunOutput {
        summary,
        report_failure,
    })
}

fn run_window(cfg: &RunConfig, prefix: &str) -> Result<RunOutput> {
    let sys = cfg.lv_system()?;
    let w = stability_window(&sys)?;
    let xi = w.xi.map(fmt17).unwrap_or_else(|| "null".to_string());
    // extremizer diagnostics at the extreme interaction ratios
    let kappa = sys.kappa();
    let (kappa_min, kappa_max) = (kappa.min_value(), kappa.max_value());
    let (z_minus, z_plus) = lv::z_pm(kappa_max.clamp(0.0, 1.0))?;
    let json = format!(
        "{{\n  \"lower\": {},\n  \"upper\": {},\n  \"feasible\": {},\n  \"xi\": {},\n           \"kappa_min\": {},\n  \"kappa_max\": {},\n  \"z_minus_at_kappa_max\": {},\n           \"z_plus_at_kappa_max\": {}\n}}\n",
        fmt17(w.lower),
        fmt17(w.upper),
        w.feasible,
        xi,
        fmt17(kappa_min),
        fmt17(kappa_max),
        fmt17(z_minus),
        fmt17(z_plus)
    );
    write_file(&path_with(prefix, "window.json"), &json)?;
    ok(format!(
        "window = [{}, {}], feasible = {}",
        fmt17(w.lower),
        fmt17(w.upper),
        w.feasible
    ))
}

fn run_lv_solve(cfg: &RunConfig, prefix: &str) -> Result<RunOutput> {
    let sys = cfg.lv_system()?;
    let (lam, mu) = cfg
        .lv_solve
        .as_ref()
        .map(|s| (s.lambda, s.mu))
        .unwrap_or((None, None));
    let st = coexistence(&sys, lam, mu)?;
    let w = stability_window(&sys)?;
    let join17 = |f: &Field| {
        f.values()
            .iter()
            .map(|&v| fmt17(v))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let json = format!(
        "{{\n  \"u\": [{}],\n  \"v\": [{}],\n  \"residual\": {},\n  \"linearization_sigma\": {},\n  \
         \"window\": {{\"lower\": {}, \"upper\": {}, \"feasible\": {}}}\n}}\n",
        join17(&st.u),
        join17(&st.v),
        fmt17(st.residual),
        fmt17(st.linearization_sigma),
        fmt17(w.lower),
        fmt17(w.upper),
        w.feasible
    );
    write_file(&path_with(prefix, "coexistence.json"), &json)?;
    ok(format!(
        "coexistence: residual = {}, linearization sigma = {}",
        fmt17(st.residual),
        fmt17(st.linearization_sigma)
    ))
}

fn run_lv_classify(cfg: &RunConfig, prefix: &str) -> Result<RunOutput> {
    let sys = cfg.lv_system()?;
    let ccfg = cfg
        .lv_classify
        .as_ref()
        .ok_or_else(|| Error::Config("lv-classify needs an \"lv_classify\" block".to_string()))?;
    let tol = cfg.tolerances.boundary;
    let rows = match (ccfg.lambda, ccfg.mu) {
        (Some(l), Some(m)) => vec![classify_region(&sys, l, m, tol)?],
        _ => {
            let lr = ccfg.lambda_range.unwrap();
            let mr = ccfg.mu_range.unwrap();
            region_scan(
                &sys,
                (lr[0], lr[1]),
                (mr[0], mr[1]),
                ccfg.steps.unwrap(),
                tol,
            )?
        }
    };
    let mut csv = String::from("lambda,mu,label,sig1,sig2,sig1_cross,sig2_cross\n");
    let mut counts: std::collections::BTreeMap<&'static str, usize> = Default::default();
    for r in &rows {
        *counts.entry(r.label.as_str()).or_insert(0) += 1;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt17(r.lambda),
            fmt17(r.mu),
            r.label,
            fmt17(r.sig1),
            fmt17(r.sig2),
            fmt17(r.sig1_cross),
            fmt17(r.sig2_cross)
        );
    }
    write_file(&path_with(prefix, "regions.csv"), &csv)?;
    let tally = counts
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ");
    ok(format!("classified {} points: {tally}", rows.len()))
}

fn run_evolve(cfg: &RunConfig, prefix: &str) -> Result<RunOutput> {
    let sys = cfg.lv_system()?;
    let ecfg = cfg
        .evolve
        .as_ref()
        .ok_or_else(|| Error::Config("evolve needs an \"evolve\" block".to_string()))?;
    let g = sys.grid();

    let reference: Option<(Field, Field)> = match &ecfg.reference {
        Some(ReferenceCfg::Coexistence) => {
            let st = coexistence(&sys, None, None)?;
            Some((st.u, st.v))
        }
        Some(ReferenceCfg::Expressions { u, v }) => Some((cfg.sample(u)?, cfg.sample(v)?)),
        Some(ReferenceCfg::None) | None => None,
    };

    let initials: Vec<(Field, Field)> = match &ecfg.initial {
        InitialCfg::Expressions { u, v } => vec![(cfg.sample(u)?, cfg.sample(v)?)],
        InitialCfg::RandomEnsemble {
            count,
            amplitude,
            seed,
        } => lv::random_positive_fields(g, *count, *amplitude, *seed),
    };

    let mut worst = 0.0f64;
    let mut any_blowup = false;
    let many = initials.len() > 1;
    for (j, (u0, v0)) in initials.iter().enumerate() {
        let traj = evolve(
            &sys,
            u0,
            v0,
            ecfg.dt,
            ecfg.t_end,
            ecfg.stride,
            reference.as_ref().map(|(u, v)| (u, v)),
        )?;
        let mut csv = String::from("t,u_max,v_max,dist_to_reference\n");
        for s in &traj.samples {
            let dist = s.dist_to_reference.map(fmt17).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                fmt17(s.t),
                fmt17(s.u_max),
                fmt17(s.v_max),
                dist
            );
        }
        let tag = if many {
            format!("traj_{j:03}.csv")
        } else {
            "trajectory.csv".to_string()
        };
        write_file(&path_with(prefix, &tag), &csv)?;
        let (fu, fv) = if many {
            (format!("final_u_{j:03}.csv"), format!("final_v_{j:03}.csv"))
        } else {
            ("final_u.csv".to_string(), "final_v.csv".to_string())
        };
        write_file(&path_with(prefix, &fu), &traj.final_u.to_csv())?;
        write_file(&path_with(prefix, &fv), &traj.final_v.to_csv())?;
        if let Some(d) = traj.samples.last().and_then(|s| s.dist_to_reference) {
            worst = worst.max(d);
        }
        if matches!(traj.outcome, lv::EvolveOutcome::Blowup { .. }) {
            any_blowup = true;
        }
    }
    let summary = if any_blowup {
        "evolve: blowup detected (sup-norm threshold exceeded)".to_string()
    } else if reference.is_some() {
        format!(
            "evolve: {} run(s), max final distance to reference = {}",
            initials.len(),
            fmt17(worst)
        )
    } else {
        format!("evolve: {} run(s) completed", initials.len())
    };
    ok(summary)
}
